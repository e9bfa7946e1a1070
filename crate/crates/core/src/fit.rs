//! Log-log power-law fitting with residual-bootstrap confidence intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fitted power-law decay/growth: values ~ C * abscissa^exponent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    pub abscissas: Vec<f64>,
    pub values: Vec<f64>,
    /// Log-log slope.
    pub exponent: f64,
    pub intercept: f64,
    /// Percentile bootstrap CI for the exponent (2.5%, 97.5%).
    pub ci: (f64, f64),
    /// Target exponent the fit is compared against, if any.
    pub target: Option<f64>,
    /// Pass verdict against the target (filled by the caller's rule).
    pub pass: Option<bool>,
    pub n_points: usize,
    pub span_decades: f64,
    /// Whether the fit meets the >= 4 points over >= 1 decade recommendation.
    pub meets_span_recommendation: bool,
}

impl DecayFit {
    pub fn with_target(mut self, target: f64, pass: bool) -> Self {
        self.target = Some(target);
        self.pass = Some(pass);
        self
    }
}

/// Ordinary least squares on (log x, log y) with a residual bootstrap for the
/// slope CI. Requires >= 3 positive points; the 4-points/1-decade guideline
/// is reported, not enforced.
pub fn fit_power_law(xs: &[f64], ys: &[f64], bootstrap_seed: u64) -> Result<DecayFit> {
    if xs.len() != ys.len() {
        return Err(Error::ShapeMismatch("fit needs matching x/y lengths".into()));
    }
    if xs.len() < 3 {
        return Err(Error::Precondition(format!(
            "power-law fit needs at least 3 points, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain("power-law fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let (slope, intercept) = ols(&lx, &ly);
    let residuals: Vec<f64> = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();

    let b = 1000;
    let mut slopes = Vec::with_capacity(b);
    let mut rng = ChaCha8Rng::seed_from_u64(bootstrap_seed);
    let n = lx.len();
    let mut ly_star = vec![0.0; n];
    for _ in 0..b {
        for i in 0..n {
            let e = residuals[rng.random_range(0..n)];
            ly_star[i] = intercept + slope * lx[i] + e;
        }
        slopes.push(ols(&lx, &ly_star).0);
    }
    slopes.sort_by(|a, z| a.partial_cmp(z).unwrap());
    let lo = slopes[(0.025 * b as f64) as usize];
    let hi = slopes[((0.975 * b as f64) as usize).min(b - 1)];

    let xmin = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let xmax = xs.iter().cloned().fold(0.0f64, f64::max);
    let span = (xmax / xmin).log10();
    Ok(DecayFit {
        abscissas: xs.to_vec(),
        values: ys.to_vec(),
        exponent: slope,
        intercept,
        ci: (lo, hi),
        target: None,
        pass: None,
        n_points: n,
        span_decades: span,
        meets_span_recommendation: n >= 4 && span >= 1.0,
    })
}

fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_power_law_recovered() {
        let xs = [4.0f64, 8.0, 16.0, 32.0, 64.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(0.75)).collect();
        let fit = fit_power_law(&xs, &ys, 1).unwrap();
        assert_relative_eq!(fit.exponent, 0.75, epsilon = 1e-12);
        assert!(fit.ci.0 <= 0.75 + 1e-9 && fit.ci.1 >= 0.75 - 1e-9);
        assert!(fit.meets_span_recommendation);
    }

    #[test]
    fn noisy_fit_ci_covers_truth() {
        let xs: Vec<f64> = (0..8).map(|k| 2.0f64.powi(k + 1)).collect();
        let ys: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| 2.0 * x.powf(-0.5) * (1.0 + 0.05 * ((i as f64 * 2.3).sin())))
            .collect();
        let fit = fit_power_law(&xs, &ys, 7).unwrap();
        assert!((fit.exponent + 0.5).abs() < 0.08);
        assert!(fit.ci.0 < fit.exponent && fit.exponent < fit.ci.1);
    }

    #[test]
    fn short_fits_flagged_not_rejected() {
        let xs = [8.0, 16.0, 32.0];
        let ys = [1.0, 0.5, 0.25];
        let fit = fit_power_law(&xs, &ys, 3).unwrap();
        assert!(!fit.meets_span_recommendation);
        assert_eq!(fit.n_points, 3);
        assert!(fit_power_law(&xs[..2], &ys[..2], 3).is_err());
    }

    #[test]
    fn nonpositive_data_rejected() {
        assert!(fit_power_law(&[1.0, 2.0, 3.0], &[1.0, -2.0, 3.0], 1).is_err());
    }
}
