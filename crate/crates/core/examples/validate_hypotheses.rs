//! Standing-hypothesis audit: kernel admissibility and Dalang's spectral
//! integrability across the supported kernel catalogue.

use pamham::kernels::{dalang_check, CorrelationKernel, SpatialKernel, TemporalKernel};

fn main() {
    println!("Dalang check across the Riesz exponent range");
    println!("{:>5} {:>5} {:>10} {:>14}", "d", "alpha", "satisfied", "integral");
    for d in [1usize, 2, 3] {
        for alpha in [0.3, 0.5, 0.9, 1.5, 2.5] {
            let kernel = CorrelationKernel::new(
                TemporalKernel::Constant { level: 1.0 },
                SpatialKernel::Riesz { alpha },
                d,
            );
            let rep = dalang_check(&kernel);
            println!(
                "{d:>5} {alpha:>5.1} {:>10} {:>14}",
                rep.satisfied,
                if rep.integral_estimate.is_finite() {
                    format!("{:.4e}", rep.integral_estimate)
                } else {
                    "divergent".into()
                }
            );
        }
    }

    println!("\nIntegrable (b1) kernels: bounded spectral densities");
    for (name, spatial) in [
        ("exponential", SpatialKernel::ExponentialDecay { rate: 1.0, amplitude: 1.0 }),
        ("gaussian", SpatialKernel::GaussianBump { length: 0.8, amplitude: 1.0 }),
    ] {
        let kernel = CorrelationKernel::new(
            TemporalKernel::Exponential { rate: 1.0 },
            spatial,
            1,
        );
        let rep = dalang_check(&kernel);
        println!("  {name}: satisfied = {}, integral ~ {:.4e}", rep.satisfied, rep.integral_estimate);
    }

    println!("\nHypothesis violations are aggregated:");
    let bad = CorrelationKernel::new(
        TemporalKernel::FractionalPower { hurst: 0.3 },
        SpatialKernel::Riesz { alpha: 1.5 },
        1,
    );
    for issue in bad.issues() {
        println!("  - {issue}");
    }
}
