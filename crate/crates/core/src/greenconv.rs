//! Convolutions of Green functions with balls and cells: the quantities
//! (1_{B_R} * G_t)(y) and cell averages of G that the chaos tensors and the
//! covariance bounds are assembled from.

use crate::kernels::Equation;
use crate::numeric::{gauss_legendre, gl_integrate, normal_cdf, normal_pdf};

/// Second antiderivative of the centered Gaussian density with variance `var`:
/// A''(v) = g_var(v), A(v) = v Phi(v / s) + s phi(v / s).
#[inline]
pub fn gaussian_second_antideriv(v: f64, var: f64) -> f64 {
    let s = var.sqrt();
    v * normal_cdf(v / s) + s * normal_pdf(v / s)
}

/// (1_{B_R} * G_t)(y): integral of the Green function at time lag `t` over
/// the centered ball of radius `r`, evaluated at `y`. Zero for t <= 0.
pub fn ball_convolution(eq: Equation, dim: usize, r: f64, t: f64, y: &[f64]) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    match (eq, dim) {
        (Equation::Heat, 1) => {
            let s = t.sqrt();
            normal_cdf((y[0] + r) / s) - normal_cdf((y[0] - r) / s)
        }
        (Equation::Heat, 2) => {
            // Polar quadrature of the Gaussian over the disk.
            let c = (y[0] * y[0] + y[1] * y[1]).sqrt();
            let (nr, wr) = gauss_legendre(40);
            let (na, wa) = gauss_legendre(48);
            let mut acc = 0.0;
            for (rn, rw) in nr.iter().zip(&wr) {
                let rho = 0.5 * r * (rn + 1.0);
                let jr = 0.5 * r * rw;
                let mut ang = 0.0;
                for (an, aw) in na.iter().zip(&wa) {
                    let phi = std::f64::consts::PI * (an + 1.0);
                    let d2 = c * c + rho * rho - 2.0 * c * rho * phi.cos();
                    ang += aw * (-d2 / (2.0 * t)).exp();
                }
                // angle weight: full circle 2 pi = pi * sum(aw * ...)
                acc += jr * rho * ang * std::f64::consts::PI;
            }
            acc / (2.0 * std::f64::consts::PI * t)
        }
        (Equation::Wave, 1) => {
            let lo = (y[0] - t).max(-r);
            let hi = (y[0] + t).min(r);
            0.5 * (hi - lo).max(0.0)
        }
        (Equation::Wave, 2) => {
            let c = (y[0] * y[0] + y[1] * y[1]).sqrt();
            // Radial substitution rho = sqrt(t^2 - v^2) removes the rim
            // singularity: integral = (1/2pi) int_0^t beta(rho(v)) dv.
            let angle = |rho: f64| disk_angular_overlap(rho, c, r);
            // Breakpoints where rho(v) crosses |r - c| and r + c.
            let mut cuts = vec![0.0, t];
            for &rho_c in &[(r - c).abs(), r + c] {
                if rho_c < t {
                    let v = (t * t - rho_c * rho_c).sqrt();
                    if v > 0.0 && v < t {
                        cuts.push(v);
                    }
                }
            }
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
            let mut acc = 0.0;
            for w in cuts.windows(2) {
                acc += gl_integrate(
                    |v| angle((t * t - v * v).max(0.0).sqrt()),
                    w[0],
                    w[1],
                    24,
                );
            }
            acc / (2.0 * std::f64::consts::PI)
        }
        _ => panic!("ball_convolution: unsupported (equation, dim)"),
    }
}

/// Angular measure of the circle of radius `rho` centered at distance `c`
/// that lies inside the ball of radius `r`.
pub fn disk_angular_overlap(rho: f64, c: f64, r: f64) -> f64 {
    if rho <= 0.0 {
        return if c < r { 2.0 * std::f64::consts::PI } else { 0.0 };
    }
    if c + rho <= r {
        return 2.0 * std::f64::consts::PI;
    }
    if rho >= c + r || c >= rho + r {
        return 0.0;
    }
    let cosv = (c * c + rho * rho - r * r) / (2.0 * c * rho);
    2.0 * cosv.clamp(-1.0, 1.0).acos()
}

/// Average of G_t over one spatial cell (1-d axis pair helper): for the heat
/// kernel this is exact via Gaussian antiderivatives; callers supply the
/// cell as [lo, hi] and the evaluation abscissa.
pub fn heat_interval_integral(t: f64, lo: f64, hi: f64) -> f64 {
    // integral over [lo, hi] of the Gaussian density with variance t.
    let s = t.sqrt();
    normal_cdf(hi / s) - normal_cdf(lo / s)
}

/// Integral over u in [lo, hi] of the tent-weighted heat kernel:
/// int (h - |u - mu|)_+ g_t(u) du via second-antiderivative differences.
pub fn heat_tent_integral(t: f64, mu: f64, h: f64) -> f64 {
    gaussian_second_antideriv(mu + h, t) - 2.0 * gaussian_second_antideriv(mu, t)
        + gaussian_second_antideriv(mu - h, t)
}

/// Integral over u of the tent-weighted 1-d wave kernel
/// int (h - |u - mu|)_+ (1/2) 1_{|u| < t} du, exact piecewise closed form.
pub fn wave_tent_integral_1d(t: f64, mu: f64, h: f64) -> f64 {
    // Tent CDF-style: integrate the tent over [-t, t].
    let tent_mass_below = |x: f64| -> f64 {
        // integral of (h - |u - mu|)_+ for u < x
        let z = x - mu;
        if z <= -h {
            0.0
        } else if z <= 0.0 {
            0.5 * (z + h) * (z + h)
        } else if z <= h {
            h * h - 0.5 * (h - z) * (h - z)
        } else {
            h * h
        }
    };
    0.5 * (tent_mass_below(t) - tent_mass_below(-t))
}
