//! Second-order-Poincare variance bound: the majorized A-functional of the
//! normalized averages decays like R^{-d} (integrable gamma_1) and R^{-alpha}
//! (Riesz), which drives the quantitative CLT rates.

use pamham::covariance::{a_functional, fit_du_constants, stein_tv_bound, AQuadrature};
use pamham::fields::{ModelEquation, ModelSpec};
use pamham::fit::fit_power_law;
use pamham::grid::GridSpec;
use pamham::kernels::{CorrelationKernel, SpatialKernel, TemporalKernel};

fn main() {
    for (name, spatial, t0, target) in [
        (
            "case 1: heat, integrable",
            SpatialKernel::ExponentialDecay { rate: 1.0, amplitude: 1.0 },
            1.0,
            1.0,
        ),
        ("case 2: heat, Riesz a=1/2", SpatialKernel::Riesz { alpha: 0.5 }, 0.5, 0.5),
    ] {
        let grid = GridSpec::new(t0, 4, 32.0 + t0 + 3.0 * t0.sqrt(), 48, 1).unwrap();
        let kernel =
            CorrelationKernel::new(TemporalKernel::Exponential { rate: 1.0 }, spatial, 1);
        let spec = ModelSpec::new(ModelEquation::Pam, 1, t0, kernel, 3, grid).unwrap();
        let noise = spec.noise_model().unwrap();
        let consts = fit_du_constants(&spec, &noise).unwrap();
        let quad = AQuadrature::default();
        let radii = [8.0, 16.0, 32.0];
        let mut vals = Vec::new();
        println!("{name} (t0 = {t0}, fitted derivative constants c1 = {:.2}, c2 = {:.2})", consts.c1, consts.c2);
        for &r in &radii {
            let a = a_functional(&spec, &noise, r, r, &consts, &quad).unwrap();
            println!("  R = {r:>4}: A bound = {a:.4e}");
            vals.push(a);
        }
        let fit = fit_power_law(&radii, &vals, 1).unwrap();
        println!("  decay exponent {:.3} (asymptote {target})\n", -fit.exponent);

        // The assembled Stein-type bound for one (theta, w) pair.
        let bound = stein_tv_bound(&spec, &noise, 8.0, 16.0, &consts, &quad).unwrap();
        println!("  stein-type bound at (theta, w) = (8, 16): {bound:.4}\n");
    }
}
