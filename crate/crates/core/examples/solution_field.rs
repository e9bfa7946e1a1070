//! The chaos representation of the solution itself: mean one, captured
//! variance across orders, Malliavin derivative majorants, and pointwise
//! kernel evaluations.

use pamham::fields::{captured_variance, ModelEquation, ModelSpec};
use pamham::grid::GridSpec;
use pamham::kernels::{CorrelationKernel, SpatialKernel, TemporalKernel};

fn main() {
    let grid = GridSpec::new(1.0, 4, 4.0, 24, 1).unwrap();
    let kernel = CorrelationKernel::new(
        TemporalKernel::Exponential { rate: 1.0 },
        SpatialKernel::ExponentialDecay { rate: 1.0, amplitude: 1.0 },
        1,
    );
    let spec = ModelSpec::new(ModelEquation::Pam, 1, 1.0, kernel, 3, grid).unwrap();
    let noise = spec.noise_model().unwrap();

    let rep = spec.solution_representation(&[0.0]).unwrap();
    println!("E[u(t0, 0)] = {}", rep.mean);
    println!("E[u(t0, 0)^2] = {:.6}", rep.second_moment(&noise).unwrap());
    let cv = captured_variance(&rep, &noise).unwrap();
    for (p, v) in &cv.per_order {
        println!("  order {p}: variance contribution {v:.5e}");
    }
    println!(
        "captured variance fraction {:.4} (extrapolated tail {:.2e})",
        cv.captured_fraction, cv.tail_estimate
    );

    // Pointwise kernel values: the first Picard iterate at the midpoint.
    let v = spec
        .chaos_kernel_eval(1, 1.0, &[0.0], &[0.5], &[&[0.0]])
        .unwrap();
    println!("\nf_(t0,0,1)(0.5, 0) = {v:.6} (heat kernel at lag 1/2)");
    let sorted = spec
        .chaos_kernel_eval(2, 1.0, &[0.0], &[0.7, 0.2], &[&[0.1], &[-0.1]])
        .unwrap();
    let shuffled = spec
        .chaos_kernel_eval(2, 1.0, &[0.0], &[0.2, 0.7], &[&[-0.1], &[0.1]])
        .unwrap();
    println!("order-2 kernel, argument order irrelevant: {sorted:.6} = {shuffled:.6}");

    // Derivative of the solution: the first-chaos part of D u equals the
    // anchored Green average.
    let d = rep.apply_d();
    let cell = spec.grid.n_space() / 2;
    println!(
        "\n||D_c u(t0,0)||_2^2 at an interior cell: {:.5e}",
        d.norm_sq_at(&noise, &[cell]).unwrap()
    );
}
