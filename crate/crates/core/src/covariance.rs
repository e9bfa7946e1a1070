//! Normalizing variances sigma_R, covariance decay of normalized averages,
//! the spectral (Plancherel) cross-route for Riesz kernels, the wave
//! smoothing inequality, and the second-order-Poincare variance bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ModelSpec;
use crate::fit::{fit_power_law, DecayFit};
use crate::greenconv::ball_convolution;
use crate::kernels::{riesz_spectral_constant, Axis, CellBox, Equation, SpatialKernel};
use crate::linalg::{dot, Mat};
use crate::noise::NoiseModel;
use crate::numeric::{adaptive_simpson, gl_integrate};

/// sigma_R = sqrt(Var F_R) from the chaos contraction; strictly positive for
/// admissible kernels.
pub fn sigma_r(spec: &ModelSpec, noise: &NoiseModel, r: f64) -> Result<f64> {
    let rep = spec.average_representation(r)?;
    let var = rep.variance(noise)?;
    if var <= 1e-24 {
        return Err(Error::NumericDegeneracy {
            axis: "sigma",
            detail: format!("variance of F_R degenerate at R = {r}"),
        });
    }
    Ok(var.sqrt())
}

/// Power-law fit of sigma_R over a radius grid.
pub fn sigma_scaling(
    spec: &ModelSpec,
    noise: &NoiseModel,
    radii: &[f64],
    seed: u64,
) -> Result<DecayFit> {
    let mut sigmas = Vec::with_capacity(radii.len());
    for &r in radii {
        sigmas.push(sigma_r(spec, noise, r)?);
    }
    fit_power_law(radii, &sigmas, seed)
}

/// Tabulated lag covariance of the stationary solution law.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceFunction {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    /// True when gamma_1 is integrable (cases 1 and 3).
    pub integrable_class: bool,
}

/// Cov(u(t0, 0), u(t0, lag)) on a grid of cell-center lags.
pub fn covariance_function(
    spec: &ModelSpec,
    noise: &NoiseModel,
    n_lags: usize,
) -> Result<CovarianceFunction> {
    if spec.dim != 1 {
        return Err(Error::UnsupportedConfiguration(
            "lag tabulation implemented for d = 1".into(),
        ));
    }
    let dx = spec.grid.dx();
    let base = spec.solution_representation(&[0.0])?;
    let mut lags = Vec::with_capacity(n_lags);
    let mut values = Vec::with_capacity(n_lags);
    for k in 0..n_lags {
        let lag = k as f64 * dx;
        let other = spec.solution_representation(&[lag])?;
        lags.push(lag);
        values.push(base.covariance(&other, noise)?);
    }
    Ok(CovarianceFunction {
        lags,
        values,
        integrable_class: !spec.kernel.spatial.is_riesz(),
    })
}

/// Corr(F^_theta, F^_w) via the chaos contraction; exactly 1 at theta = w.
pub fn cov_normalized(
    spec: &ModelSpec,
    noise: &NoiseModel,
    theta: f64,
    w: f64,
) -> Result<f64> {
    if !(theta > 0.0 && w >= theta) {
        return Err(Error::Precondition(format!(
            "needs 0 < theta <= w, got theta = {theta}, w = {w}"
        )));
    }
    if (theta - w).abs() < 1e-15 {
        return Ok(1.0);
    }
    let reps = spec.average_representations(&[theta, w])?;
    let var_t = reps[0].variance(noise)?;
    let var_w = reps[1].variance(noise)?;
    if var_t <= 1e-24 || var_w <= 1e-24 {
        return Err(Error::NumericDegeneracy {
            axis: "sigma",
            detail: "degenerate normalization in cov_normalized".into(),
        });
    }
    Ok(reps[0].covariance(&reps[1], noise)? / (var_t * var_w).sqrt())
}

/// Decay fit of Corr(F^_theta, F^_w) against theta/w over a ratio grid.
pub fn covariance_decay(
    spec: &ModelSpec,
    noise: &NoiseModel,
    theta: f64,
    ratios: &[f64],
    seed: u64,
) -> Result<DecayFit> {
    let mut xs = Vec::with_capacity(ratios.len());
    let mut ys = Vec::with_capacity(ratios.len());
    for &q in ratios {
        let w = theta * q;
        xs.push(theta / w);
        ys.push(cov_normalized(spec, noise, theta, w)?.abs().max(1e-300));
    }
    fit_power_law(&xs, &ys, seed)
}

/// First-chaos covariance Cov_1(F_theta, F_w) by radial spectral quadrature
/// (Riesz kernels, d = 1): int c_a |xi|^{a-1} 1^_th 1^_w T(xi) dxi with T the
/// double time integral of gamma_0 against the Green transforms.
pub fn spectral_first_order_cov(spec: &ModelSpec, theta: f64, w: f64) -> Result<f64> {
    let alpha = match spec.kernel.spatial {
        SpatialKernel::Riesz { alpha } => alpha,
        _ => {
            return Err(Error::UnsupportedConfiguration(
                "the spectral route applies to Riesz spatial kernels".into(),
            ))
        }
    };
    if spec.dim != 1 {
        return Err(Error::UnsupportedConfiguration(
            "spectral route implemented for d = 1".into(),
        ));
    }
    let c = riesz_spectral_constant(alpha, 1)?;
    let t0 = spec.t0;
    let eq = spec.equation.green_equation();
    let gamma0 = spec.kernel.temporal;

    // T(xi) = int_{-t0}^{t0} gamma_0(u) K(u, xi) du with the r-integral in
    // closed form for each equation.
    let time_factor = |xi: f64| -> f64 {
        let k_of_u = |u: f64| -> f64 {
            let lo = u.max(0.0);
            let hi = t0 + u.min(0.0);
            if hi <= lo {
                return 0.0;
            }
            match eq {
                Equation::Heat => {
                    // int_lo^hi exp(-xi^2/2 (2 t0 - 2 r + u)) dr
                    let q = xi * xi / 2.0;
                    if q < 1e-14 {
                        hi - lo
                    } else {
                        ((-q * (2.0 * t0 - 2.0 * hi + u)).exp()
                            - (-q * (2.0 * t0 - 2.0 * lo + u)).exp())
                            / (2.0 * q)
                    }
                }
                Equation::Wave => {
                    // int sin((t0-r)xi) sin((t0-r+u)xi) dr / xi^2 via
                    // product-to-sum: 1/2 [cos(u xi) - cos((2(t0-r)+u) xi)].
                    if xi.abs() < 1e-12 {
                        gl_integrate(|r| (t0 - r) * (t0 - r + u), lo, hi, 8)
                    } else {
                        let steady = 0.5 * (hi - lo) * (u * xi).cos();
                        let osc = 0.5
                            * (((2.0 * (t0 - lo) + u) * xi).sin()
                                - ((2.0 * (t0 - hi) + u) * xi).sin())
                            / (2.0 * xi);
                        (steady - osc) / (xi * xi)
                    }
                }
            }
        };
        // gamma_0 may be singular at 0: split and integrate each side.
        let f = |u: f64| gamma0.eval(u) * k_of_u(u);
        adaptive_simpson(&f, -t0, -1e-9, 1e-10) + adaptive_simpson(&f, 1e-9, t0, 1e-10)
    };

    let hat = |r: f64, xi: f64| 2.0 * (r * xi).sin() / xi;
    let integrand = |xi: f64| -> f64 {
        c * xi.powf(alpha - 1.0) * hat(theta, xi) * hat(w, xi) * time_factor(xi)
    };
    // Near zero: substitute xi = s^{1/alpha}.
    let near = adaptive_simpson(
        &|s: f64| {
            let xi = s.powf(1.0 / alpha);
            (1.0 / alpha) * c * hat(theta, xi) * hat(w, xi) * time_factor(xi)
        },
        1e-14,
        1.0,
        1e-8,
    );
    // Panels synchronized with the faster oscillation; refine until stable.
    let period = std::f64::consts::PI / w.max(theta);
    let mut total = near;
    let mut xi_lo = 1.0;
    let panel = period.min(0.5);
    let mut panels = 0usize;
    while panels < 100_000 {
        let inc = gl_integrate(integrand, xi_lo, xi_lo + panel, 16);
        total += inc;
        xi_lo += panel;
        let last_increment = inc.abs();
        panels += 1;
        if xi_lo > 4.0 && last_increment < 1e-6 * total.abs().max(1e-12) {
            break;
        }
        if xi_lo > 5e4 {
            return Err(Error::Accuracy(format!(
                "spectral quadrature not converged by xi = {xi_lo:.1}: \
                 last panel {last_increment:.3e} vs total {total:.3e}"
            )));
        }
    }
    Ok(2.0 * total)
}

/// First-chaos covariance from the discrete contraction, for cross-checking
/// the spectral route.
pub fn chaos_first_order_cov(
    spec: &ModelSpec,
    noise: &NoiseModel,
    theta: f64,
    w: f64,
) -> Result<f64> {
    let tbar = spec.transfer_matrix();
    let a_t = spec.ball_anchor(theta)?;
    let a_w = spec.ball_anchor(w)?;
    let mut one = spec.clone();
    one.truncation = 1;
    let rep_t = crate::chaos::ChaosRepresentation {
        mean: 0.0,
        tensors: one.chain_tensors(&tbar, &a_t)?,
    };
    let rep_w = crate::chaos::ChaosRepresentation {
        mean: 0.0,
        tensors: one.chain_tensors(&tbar, &a_w)?,
    };
    rep_t.covariance(&rep_w, noise)
}

/// The wave smoothing inequality (1_R * G_r)(y) <= r 1_{|y| <= R + r}:
/// returns (lhs, rhs, holds).
pub fn wave_smoothing_bound(dim: usize, r_ball: f64, r_time: f64, y: &[f64]) -> (f64, f64, bool) {
    let lhs = ball_convolution(Equation::Wave, dim, r_ball, r_time, y);
    let dist = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rhs = if dist <= r_ball + r_time { r_time } else { 0.0 };
    (lhs, rhs, lhs <= rhs + 1e-10)
}

/// Fitted majorant constants for the Malliavin derivative bounds:
/// ||D u|| <= c1 G and ||D D u|| <= c2 G G, estimated from a truncated
/// representation on the model grid.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DuConstants {
    pub c1: f64,
    pub c2: f64,
}

/// Fit the derivative-majorant constants by scanning cell-frozen derivative
/// norms of u(t0, x) against cell-averaged Green products.
pub fn fit_du_constants(spec: &ModelSpec, noise: &NoiseModel) -> Result<DuConstants> {
    if spec.dim != 1 {
        return Err(Error::UnsupportedConfiguration(
            "derivative-constant fitting implemented for d = 1".into(),
        ));
    }
    let x = [0.0f64];
    let rep = spec.solution_representation(&x)?;
    let d1 = rep.apply_d();
    let d2 = rep.apply_d2();
    let g = &spec.grid;
    let n_sp = g.n_space();
    // The L^4 norms are majorized through hypercontractivity of the fixed
    // chaos; compare against the anchored Green average.
    let anchor = spec.point_anchor(&x);
    let mut c1 = 0.0f64;
    let peak = anchor.iter().cloned().fold(0.0f64, f64::max);
    for c in 0..g.n_cells() {
        let major = anchor[c];
        if major < 1e-3 * peak {
            continue;
        }
        let norm4 = d1.norm_p_bound_at(noise, &[c], 4.0)?;
        c1 = c1.max(norm4 / major);
    }
    // Second derivative: majorant G_{t0-s}(x - y) G_{s - r}(y - z) with the
    // frozen pair ((s,y),(r,z)); scan ordered pairs on the grid.
    let tbar = spec.transfer_matrix();
    let mut c2 = 0.0f64;
    for s_cell in 0..g.n_t {
        for r_cell in 0..s_cell {
            for y_cell in 0..n_sp {
                let cy = s_cell * n_sp + y_cell;
                let major_anchor = anchor[cy];
                if major_anchor < 1e-3 * peak {
                    continue;
                }
                for z_cell in (0..n_sp).step_by(2) {
                    let cz = r_cell * n_sp + z_cell;
                    let major = major_anchor * tbar.get(cz, cy);
                    if major < 1e-8 {
                        continue;
                    }
                    let norm4 = d2.norm_p_bound_at(noise, &[cy, cz], 4.0)?;
                    c2 = c2.max(norm4 / major);
                }
            }
        }
    }
    if c1 == 0.0 {
        c1 = 1.0;
    }
    if c2 == 0.0 {
        c2 = c1 * c1;
    }
    Ok(DuConstants { c1, c2 })
}

/// Quadrature resolution for the second-order-Poincare bound.
#[derive(Debug, Clone, Copy)]
pub struct AQuadrature {
    pub n_time: usize,
    pub n_space_per_unit: f64,
    pub max_space_nodes: usize,
}

impl Default for AQuadrature {
    fn default() -> Self {
        AQuadrature { n_time: 8, n_space_per_unit: 4.0, max_space_nodes: 360 }
    }
}

/// Upper bound for A(F^_R, F^_R') + A(F^_R', F^_R) with the Green-function
/// majorants substituted for the Malliavin derivative norms, evaluated by a
/// chain of 1-d integral operators (d = 1).
pub fn a_functional(
    spec: &ModelSpec,
    noise: &NoiseModel,
    r1: f64,
    r2: f64,
    consts: &DuConstants,
    quad: &AQuadrature,
) -> Result<f64> {
    let s1 = sigma_r(spec, noise, r1)?;
    let s2 = sigma_r(spec, noise, r2)?;
    let a12 = a_functional_raw(spec, r1, r2, quad)?;
    let a21 = a_functional_raw(spec, r2, r1, quad)?;
    let scale = consts.c2 * consts.c2 * consts.c1 * consts.c1;
    Ok(scale * (a12 / (s1 * s1 * s2 * s2) + a21 / (s2 * s2 * s1 * s1)))
}

/// Region-enlargement variant used by the monotonicity property: both
/// derivative regions can be overridden while keeping the normalization.
pub fn a_functional_raw(
    spec: &ModelSpec,
    r_second: f64,
    r_first: f64,
    quad: &AQuadrature,
) -> Result<f64> {
    if spec.dim != 1 {
        return Err(Error::UnsupportedConfiguration(
            "the A-functional quadrature is implemented for d = 1".into(),
        ));
    }
    let eq = spec.equation.green_equation();
    let t0 = spec.t0;
    let m = quad.n_time;
    let dt = t0 / m as f64;
    let r_max = r_second.max(r_first);
    let pad = match eq {
        Equation::Heat => t0 + 3.0 * t0.sqrt(),
        Equation::Wave => t0,
    };
    let l = r_max + pad;
    let k_needed = (2.0 * l * quad.n_space_per_unit).ceil() as usize;
    if k_needed > quad.max_space_nodes {
        return Err(Error::Accuracy(format!(
            "quadrature budget exceeded: the bound needs {k_needed} spatial nodes over \
             [-{l:.1}, {l:.1}] but the cap is {}; raise max_space_nodes or lower \
             n_space_per_unit",
            quad.max_space_nodes
        )));
    }
    let k = k_needed.max(64);
    let dz = 2.0 * l / k as f64;
    let centers: Vec<f64> = (0..k).map(|i| -l + (i as f64 + 0.5) * dz).collect();

    // gamma_1 pair-integral operator (includes the dz' measure and z-average).
    let mut gamma_sp = Mat::zeros(k, k);
    {
        let mut offsets = Vec::with_capacity(k);
        for off in 0..k {
            let a = CellBox::interval(0.0, dz);
            let b = CellBox::interval(off as f64 * dz, (off + 1) as f64 * dz);
            offsets.push(spec.kernel.cell_integral(&a, &b, Axis::Space)? / dz);
        }
        for i in 0..k {
            for j in 0..k {
                gamma_sp.set(i, j, offsets[i.abs_diff(j)]);
            }
        }
    }

    // Averaged temporal kernel on midpoint cells.
    let mut gamma_t = Mat::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let a = CellBox::interval(i as f64 * dt, (i + 1) as f64 * dt);
            let b = CellBox::interval(j as f64 * dt, (j + 1) as f64 * dt);
            gamma_t.set(i, j, spec.kernel.cell_integral(&a, &b, Axis::Time)? / (dt * dt));
        }
    }

    // Averaged Green matrices for the lags used by ordered midpoint pairs.
    let green_avg = |tau: f64| -> Mat {
        let mut mat = Mat::zeros(k, k);
        let mut offsets = Vec::with_capacity(k);
        for off in 0..k {
            let mu = off as f64 * dz;
            let v = match eq {
                Equation::Heat => crate::greenconv::heat_tent_integral(tau, mu, dz),
                Equation::Wave => crate::greenconv::wave_tent_integral_1d(tau, mu, dz),
            } / (dz * dz);
            offsets.push(v);
        }
        for i in 0..k {
            for j in 0..k {
                mat.set(i, j, offsets[i.abs_diff(j)]);
            }
        }
        mat
    };
    let mut greens: Vec<Mat> = Vec::with_capacity(m);
    greens.push(green_avg(dt / 3.0)); // same-cell ordered lag
    for gap in 1..m {
        greens.push(green_avg(gap as f64 * dt));
    }

    let mids: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) * dt).collect();
    // Ball convolutions: rows = time midpoints.
    let table = |radius: f64| -> Vec<Vec<f64>> {
        mids.iter()
            .map(|&tm| {
                let tau = t0 - tm;
                centers
                    .iter()
                    .map(|&z| ball_convolution(eq, 1, radius, tau, &[z]))
                    .collect()
            })
            .collect()
    };
    let a_second = table(r_second); // region of the two D^2 factors
    let a_first = table(r_first); // region of the two D factors

    // e[r'] = Gamma_sp . A_first(r', .): the D-factor endpoints.
    let endpoint: Vec<Vec<f64>> = (0..m).map(|rp| gamma_sp.matvec(&a_first[rp])).collect();
    // abar(r) = sum_{r'} gamma_t(r, r') e[r'] (time coupling of D to D^2).
    let coupled: Vec<Vec<f64>> = (0..m)
        .map(|r| {
            let mut acc = vec![0.0; k];
            for rp in 0..m {
                let wgt = gamma_t.get(r, rp);
                for (a, &e) in acc.iter_mut().zip(&endpoint[rp]) {
                    *a += wgt * e;
                }
            }
            acc
        })
        .collect();

    // v(slot1_time = r, slot2_time = th): vector on the w-node, for both
    // orderings of the D^2 factor's two时 arguments.
    let factor_vector = |r_idx: usize, th_idx: usize| -> Vec<f64> {
        if r_idx == th_idx {
            // same-cell: average the two orderings with the dt/3 lag
            let g = &greens[0];
            let with_a: Vec<f64> = coupled[r_idx]
                .iter()
                .zip(&a_second[r_idx])
                .map(|(c, a)| c * a)
                .collect();
            let v1 = {
                let mut v = g.matvec_t(&with_a);
                v.iter_mut().for_each(|x| *x *= 0.5);
                v
            };
            let mut v2 = g.matvec_t(&coupled[r_idx]);
            for (x, a) in v2.iter_mut().zip(&a_second[r_idx]) {
                *x *= 0.5 * a;
            }
            v1.iter().zip(&v2).map(|(a, b)| a + b).collect()
        } else if th_idx < r_idx {
            // anchor-side time is r: A sits on the z-node.
            let g = &greens[r_idx - th_idx];
            let with_a: Vec<f64> = coupled[r_idx]
                .iter()
                .zip(&a_second[r_idx])
                .map(|(c, a)| c * a)
                .collect();
            g.matvec_t(&with_a)
        } else {
            // anchor-side time is th: A sits on the w-node.
            let g = &greens[th_idx - r_idx];
            let mut v = g.matvec_t(&coupled[r_idx]);
            for (x, a) in v.iter_mut().zip(&a_second[th_idx]) {
                *x *= a;
            }
            v
        }
    };

    // Assemble both D^2 factors and couple them through gamma_t (theta, th')
    // and gamma_sp (w, w').
    let mut first: Vec<Vec<f64>> = Vec::with_capacity(m * m);
    let mut second: Vec<Vec<f64>> = Vec::with_capacity(m * m);
    for r in 0..m {
        for th in 0..m {
            let v = factor_vector(r, th);
            second.push(gamma_sp.matvec(&v));
            first.push(v);
        }
    }
    let mut total = 0.0;
    for r in 0..m {
        for th in 0..m {
            let f = &first[r * m + th];
            for s in 0..m {
                for thp in 0..m {
                    let wgt = gamma_t.get(th, thp);
                    if wgt == 0.0 {
                        continue;
                    }
                    total += wgt * dot(f, &second[s * m + thp]);
                }
            }
        }
    }
    // Six time integrals discretized on midpoints.
    Ok(total * dt.powi(6))
}

/// Stein-bound assembly: d_TV((F^_th - F^_w)/sqrt 2, N(0,1)) <=
/// 2 |Corr| + sqrt(Var <D Delta, -D L^{-1} Delta>), the variance estimated
/// by the second-order-Poincare A bounds of the four pairings.
pub fn stein_tv_bound(
    spec: &ModelSpec,
    noise: &NoiseModel,
    theta: f64,
    w: f64,
    consts: &DuConstants,
    quad: &AQuadrature,
) -> Result<f64> {
    if !(theta < w) {
        return Err(Error::Precondition(format!(
            "stein_tv_bound needs theta < w, got {theta} vs {w}"
        )));
    }
    let cov = cov_normalized(spec, noise, theta, w)?;
    let mut var_sum = 0.0;
    for (a, b) in [(theta, theta), (theta, w), (w, theta), (w, w)] {
        var_sum += a_functional(spec, noise, a, b, consts, quad)?;
    }
    Ok(2.0 * cov.abs() + 2.0 * var_sum.sqrt())
}
