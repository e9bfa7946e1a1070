//! sigma_R scaling: the normalizing standard deviation of the spatial
//! average F_R grows like R^{d/2} for integrable spatial correlations and
//! like R^{d - alpha/2} for Riesz correlations.

use pamham::covariance::sigma_r;
use pamham::fields::{ModelEquation, ModelSpec};
use pamham::fit::fit_power_law;
use pamham::grid::GridSpec;
use pamham::kernels::{CorrelationKernel, SpatialKernel, TemporalKernel};

fn spec_for(eq: ModelEquation, spatial: SpatialKernel, r: f64) -> ModelSpec {
    let pad = match eq {
        ModelEquation::Pam => 4.0,
        ModelEquation::Ham => 1.0,
    };
    let grid = GridSpec::new(1.0, 4, r + pad, 40, 1).unwrap();
    let kernel = CorrelationKernel::new(TemporalKernel::Exponential { rate: 1.0 }, spatial, 1);
    ModelSpec::new(eq, 1, 1.0, kernel, 3, grid).unwrap()
}

fn main() {
    let radii = [4.0, 8.0, 16.0, 32.0];
    for (name, eq, spatial, target) in [
        (
            "case 1: heat, integrable",
            ModelEquation::Pam,
            SpatialKernel::ExponentialDecay { rate: 1.0, amplitude: 1.0 },
            0.5,
        ),
        (
            "case 2: heat, Riesz a=1/2",
            ModelEquation::Pam,
            SpatialKernel::Riesz { alpha: 0.5 },
            0.75,
        ),
        (
            "case 3: wave, integrable",
            ModelEquation::Ham,
            SpatialKernel::ExponentialDecay { rate: 1.0, amplitude: 1.0 },
            0.5,
        ),
        (
            "case 4: wave, Riesz a=1/2",
            ModelEquation::Ham,
            SpatialKernel::Riesz { alpha: 0.5 },
            0.75,
        ),
    ] {
        let mut sigmas = Vec::new();
        for &r in &radii {
            let spec = spec_for(eq, spatial, r);
            let noise = spec.noise_model().unwrap();
            sigmas.push(sigma_r(&spec, &noise, r).unwrap());
        }
        let fit = fit_power_law(&radii, &sigmas, 1).unwrap();
        println!("{name}");
        for (r, s) in radii.iter().zip(&sigmas) {
            println!("  R = {r:>4}: sigma_R = {s:>9.4}");
        }
        println!(
            "  fitted slope {:.3} (target {target}), CI ({:.3}, {:.3})\n",
            fit.exponent, fit.ci.0, fit.ci.1
        );
    }
}
