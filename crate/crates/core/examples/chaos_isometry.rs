//! Multiple Wiener-Ito integrals: isometry, cross-order orthogonality, the
//! Hermite identity, and the chaos-diagonal operators.

use pamham::chaos::{h_inner, ChaosKernelTensor, ChaosRepresentation, PreparedTensor};
use pamham::grid::GridSpec;
use pamham::kernels::{CorrelationKernel, SpatialKernel, TemporalKernel};
use pamham::noise::{build_noise_model, sample_realizations};

fn main() {
    let grid = GridSpec::new(1.0, 4, 2.0, 8, 1).unwrap();
    let kernel = CorrelationKernel::new(
        TemporalKernel::Exponential { rate: 1.0 },
        SpatialKernel::ExponentialDecay { rate: 1.0, amplitude: 1.0 },
        1,
    );
    let model = build_noise_model(&grid, &kernel).unwrap();
    let m = model.n_cells();

    let vec_of = |phase: f64| -> Vec<f64> {
        (0..m).map(|i| ((i as f64 * 0.37 + phase).sin() + 1.1) / (1.0 + 0.04 * i as f64)).collect()
    };
    let n = 10_000;
    let reals = sample_realizations(&model, 7, n).unwrap();
    let xis: Vec<Vec<f64>> = reals.iter().map(|r| r.xi.clone()).collect();

    println!("{:>6} {:>14} {:>14} {:>8}", "order", "Var(I_p)", "p!||f||^2", "ratio");
    let mut samples = Vec::new();
    for p in 1..=3usize {
        let t = ChaosKernelTensor::rank_one(p, model.n_time(), model.n_space(), &vec_of(p as f64))
            .unwrap();
        let prep = PreparedTensor::prepare(&t, &model).unwrap();
        let s = prep.sample_batch(&xis);
        let mean = s.iter().sum::<f64>() / n as f64;
        let var = s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let mut factorial = 1.0;
        for q in 2..=p {
            factorial *= q as f64;
        }
        let target = factorial * h_inner(&t, &t, &model).unwrap();
        println!("{p:>6} {var:>14.5e} {target:>14.5e} {:>8.3}", var / target);
        samples.push(s);
    }

    println!("\ncross-order correlations (target 0 within ~1/sqrt(N)):");
    for (a, b) in [(0usize, 1usize), (0, 2), (1, 2)] {
        let corr = correlation(&samples[a], &samples[b]);
        println!("  Corr(I_{}, I_{}) = {corr:+.4}", a + 1, b + 1);
    }

    // Hermite identity: I_2(e (x) e) = xi^2 - 1 for a unit direction.
    let mut e = vec_of(0.4);
    let t1 = ChaosKernelTensor::rank_one(1, model.n_time(), model.n_space(), &e).unwrap();
    let norm = h_inner(&t1, &t1, &model).unwrap().sqrt();
    e.iter_mut().for_each(|v| *v /= norm);
    let unit1 = ChaosKernelTensor::rank_one(1, model.n_time(), model.n_space(), &e).unwrap();
    let unit2 = ChaosKernelTensor::rank_one(2, model.n_time(), model.n_space(), &e).unwrap();
    let p1 = PreparedTensor::prepare(&unit1, &model).unwrap();
    let p2 = PreparedTensor::prepare(&unit2, &model).unwrap();
    let z = p1.sample(&xis[0]);
    println!("\nHermite identity: I_2 = {:.6}, z^2 - 1 = {:.6}", p2.sample(&xis[0]), z * z - 1.0);

    // Operator identities on a two-order representation.
    let rep = ChaosRepresentation {
        mean: 0.0,
        tensors: vec![unit1.clone(), unit2.clone()],
    };
    let m0 = rep.second_moment(&model).unwrap();
    let pt = rep.apply_pt(0.4).unwrap().second_moment(&model).unwrap();
    println!("\nsemigroup contraction: ||F||^2 = {m0:.4} -> ||P_0.4 F||^2 = {pt:.4}");
    let back = rep.apply_linv().unwrap().apply_l().second_moment(&model).unwrap();
    println!("L L^-1 identity: second moment back to {back:.4}");
}

fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cxy = 0.0;
    let mut cxx = 0.0;
    let mut cyy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cxy += (a - mx) * (b - my);
        cxx += (a - mx) * (a - mx);
        cyy += (b - my) * (b - my);
    }
    cxy / (cxx * cyy).sqrt()
}
