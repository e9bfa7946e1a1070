//! The Ibragimov-Lifshits statistic: logarithmically averaged characteristic
//! function discrepancies K_t(s) over a path ensemble, and the partial
//! criterion integral whose finiteness underwrites the almost-sure CLT.

use pamham::fields::{geometric_grid, sample_average_series, ModelEquation, ModelSpec};
use pamham::grid::GridSpec;
use pamham::kernels::{CorrelationKernel, SpatialKernel, TemporalKernel};
use pamham::limits::{il_statistic, synthetic_iid_paths};
use pamham::noise::sample_realizations;

fn main() {
    let r_grid = geometric_grid(1.0, 64.0, 1.1);
    let s_grid: Vec<f64> = (-12..=12).map(|k| k as f64 * 0.25).collect();
    let t_grid: Vec<f64> = r_grid.iter().cloned().filter(|&t| t >= 2.0).collect();
    let checkpoints = [4.0, 8.0, 16.0, 32.0, 64.0];

    println!("synthetic i.i.d. ensemble (100 paths):");
    let paths = synthetic_iid_paths(&r_grid, 100, 1);
    let stat = il_statistic(&paths, &t_grid, &s_grid).unwrap();
    print_profile(&stat, &checkpoints);

    println!("\nsimulated model ensemble (60 paths, heat, integrable):");
    let grid = GridSpec::new(1.0, 4, 36.0, 40, 1).unwrap();
    let kernel = CorrelationKernel::new(
        TemporalKernel::Exponential { rate: 1.0 },
        SpatialKernel::ExponentialDecay { rate: 1.0, amplitude: 1.0 },
        1,
    );
    let spec = ModelSpec::new(ModelEquation::Pam, 1, 1.0, kernel, 3, grid).unwrap();
    let noise = spec.noise_model().unwrap();
    let r_model = geometric_grid(1.0, 32.0, 1.1);
    let reals = sample_realizations(&noise, 3, 60).unwrap();
    let model_paths = sample_average_series(&spec, &noise, &r_model, 3, &reals).unwrap();
    let t_model: Vec<f64> = r_model.iter().cloned().filter(|&t| t >= 2.0).collect();
    let stat2 = il_statistic(&model_paths, &t_model, &s_grid).unwrap();
    print_profile(&stat2, &[4.0, 8.0, 16.0, 32.0]);
}

fn print_profile(stat: &pamham::limits::IlStatistic, checkpoints: &[f64]) {
    println!("{:>6} {:>16} {:>10}", "t", "sup_s E|K|^2", "SE");
    for &t in checkpoints {
        if let Some(i) = stat.t_grid.iter().position(|&g| (g - t).abs() / t < 0.08) {
            println!("{:>6} {:>16.5e} {:>10.2e}", t, stat.sup_by_t[i], stat.se_by_t[i]);
        }
    }
    let t_last = *checkpoints.last().unwrap();
    let p_half = stat.partial_criterion_integral(t_last / 2.0).unwrap();
    let p_full = stat.partial_criterion_integral(t_last).unwrap();
    println!(
        "partial criterion integral: {:.5e} (t <= {}) -> {:.5e} (t <= {}), change {:.2}%",
        p_half,
        t_last / 2.0,
        p_full,
        t_last,
        100.0 * (p_full - p_half).abs() / p_full
    );
}
