//! Space-time discretization: uniform cells on [0, t0] x [-X, X]^d and exact
//! overlap weights of spatial cells with centered balls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform space-time grid. Time cells cover [0, t0]; spatial cells cover
/// [-x_max, x_max] per axis with `n_x` cells per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t0: f64,
    pub n_t: usize,
    pub x_max: f64,
    pub n_x: usize,
    pub dim: usize,
}

impl GridSpec {
    pub fn new(t0: f64, n_t: usize, x_max: f64, n_x: usize, dim: usize) -> Result<Self> {
        let g = GridSpec { t0, n_t, x_max, n_x, dim };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0) {
            return Err(Error::Domain(format!("horizon t0 must be positive, got {}", self.t0)));
        }
        if self.n_t < 2 || self.n_x < 2 {
            return Err(Error::Domain(format!(
                "grid needs at least 2 cells per axis, got n_t={}, n_x={}",
                self.n_t, self.n_x
            )));
        }
        if !(self.x_max > 0.0) {
            return Err(Error::Domain("spatial half-width must be positive".into()));
        }
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::UnsupportedConfiguration(format!(
                "engine targets d in {{1, 2}}, got d = {}",
                self.dim
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.t0 / self.n_t as f64
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        2.0 * self.x_max / self.n_x as f64
    }

    /// Number of spatial cells (n_x^d).
    pub fn n_space(&self) -> usize {
        self.n_x.pow(self.dim as u32)
    }

    /// Total number of space-time cells.
    pub fn n_cells(&self) -> usize {
        self.n_t * self.n_space()
    }

    /// Volume of one spatial cell.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    pub fn time_cell(&self, k: usize) -> (f64, f64) {
        let dt = self.dt();
        (k as f64 * dt, (k + 1) as f64 * dt)
    }

    pub fn time_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dt()
    }

    /// 1-d cell bounds along one spatial axis.
    pub fn axis_cell(&self, i: usize) -> (f64, f64) {
        let dx = self.dx();
        (-self.x_max + i as f64 * dx, -self.x_max + (i + 1) as f64 * dx)
    }

    pub fn axis_center(&self, i: usize) -> f64 {
        -self.x_max + (i as f64 + 0.5) * self.dx()
    }

    /// Decompose a flat spatial index into per-axis indices.
    pub fn space_multi_index(&self, s: usize) -> [usize; 2] {
        match self.dim {
            1 => [s, 0],
            2 => [s / self.n_x, s % self.n_x],
            _ => unreachable!(),
        }
    }

    /// Center of a spatial cell given its flat index.
    pub fn space_center(&self, s: usize) -> [f64; 2] {
        let mi = self.space_multi_index(s);
        match self.dim {
            1 => [self.axis_center(mi[0]), 0.0],
            2 => [self.axis_center(mi[0]), self.axis_center(mi[1])],
            _ => unreachable!(),
        }
    }

    /// Overlap fraction of every spatial cell with the centered ball of
    /// radius `r`, i.e. |cell ∩ B_r| / |cell| per cell, flat-indexed.
    pub fn ball_overlap_fractions(&self, r: f64) -> Result<Vec<f64>> {
        if r <= 0.0 {
            return Err(Error::Domain(format!("ball radius must be positive, got {r}")));
        }
        if r > self.x_max + 1e-12 {
            return Err(Error::Domain(format!(
                "ball radius {r} exceeds padded box half-width {}",
                self.x_max
            )));
        }
        let vol = self.cell_volume();
        match self.dim {
            1 => Ok((0..self.n_x)
                .map(|i| {
                    let (a, b) = self.axis_cell(i);
                    (b.min(r) - a.max(-r)).max(0.0) / vol
                })
                .collect()),
            2 => {
                let mut out = Vec::with_capacity(self.n_space());
                for i in 0..self.n_x {
                    let (x0, x1) = self.axis_cell(i);
                    for j in 0..self.n_x {
                        let (y0, y1) = self.axis_cell(j);
                        out.push(disk_rect_overlap(r, x0, x1, y0, y1) / vol);
                    }
                }
                Ok(out)
            }
            _ => unreachable!(),
        }
    }
}

/// Exact area of {x^2 + y^2 < r^2} ∩ [x0,x1] x [y0,y1], via the closed-form
/// antiderivative of the circular segment height.
pub fn disk_rect_overlap(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    debug_assert!(x0 <= x1 && y0 <= y1);
    // Clip x-range to the disk's extent.
    let a = x0.max(-r);
    let b = x1.min(r);
    if a >= b {
        return 0.0;
    }
    // Integral over [a, b] of len(x) where
    // len(x) = clamp(min(y1, h(x)) - max(y0, -h(x)), 0), h(x) = sqrt(r^2 - x^2).
    // Split at points where h(x) crosses |y0|, |y1| so each piece is smooth.
    let mut cuts = vec![a, b];
    for &yb in &[y0.abs(), y1.abs()] {
        if yb < r {
            let xc = (r * r - yb * yb).sqrt();
            for &c in &[-xc, xc] {
                if c > a && c < b {
                    cuts.push(c);
                }
            }
        }
    }
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    cuts.dedup_by(|p, q| (*p - *q).abs() < 1e-14);

    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo < 1e-15 {
            continue;
        }
        let xm = 0.5 * (lo + hi);
        let h = (r * r - xm * xm).max(0.0).sqrt();
        let top_is_circle = y1 > h;
        let bot_is_circle = y0 < -h;
        let top_at = |x: f64| if top_is_circle { circ_antideriv(r, x) } else { y1 * x };
        let bot_at = |x: f64| if bot_is_circle { -circ_antideriv(r, x) } else { y0 * x };
        let seg_top = h.min(y1.max(-h));
        let seg_bot = (-h).max(y0.min(h));
        if seg_top <= seg_bot {
            continue;
        }
        area += (top_at(hi) - top_at(lo)) - (bot_at(hi) - bot_at(lo));
    }
    area.max(0.0)
}

/// Antiderivative of sqrt(r^2 - x^2) on [-r, r].
fn circ_antideriv(r: f64, x: f64) -> f64 {
    let xc = x.clamp(-r, r);
    0.5 * (xc * (r * r - xc * xc).sqrt() + r * r * (xc / r).asin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn interval_overlap_weights_sum_to_ball_length() {
        let g = GridSpec::new(1.0, 4, 8.0, 37, 1).unwrap();
        let r = 5.3;
        let fr = g.ball_overlap_fractions(r).unwrap();
        let total: f64 = fr.iter().map(|f| f * g.cell_volume()).sum();
        assert_relative_eq!(total, 2.0 * r, epsilon = 1e-10);
    }

    #[test]
    fn disk_rect_full_cover_and_disjoint() {
        // Rectangle fully inside the disk.
        assert_relative_eq!(disk_rect_overlap(10.0, -1.0, 1.0, -1.0, 1.0), 4.0, epsilon = 1e-12);
        // Rectangle fully outside.
        assert_relative_eq!(disk_rect_overlap(1.0, 2.0, 3.0, 2.0, 3.0), 0.0, epsilon = 1e-12);
        // Disk fully inside rectangle.
        assert_relative_eq!(
            disk_rect_overlap(1.0, -5.0, 5.0, -5.0, 5.0),
            std::f64::consts::PI,
            epsilon = 1e-10
        );
    }

    #[test]
    fn disk_rect_overlap_matches_midpoint_oracle() {
        // Independent oracle: dense midpoint grid count.
        let (r, x0, x1, y0, y1) = (1.7, -0.4, 1.9, 0.2, 2.3);
        let n = 2000;
        let hx = (x1 - x0) / n as f64;
        let hy = (y1 - y0) / n as f64;
        let mut hits = 0usize;
        for i in 0..n {
            let x = x0 + (i as f64 + 0.5) * hx;
            for j in 0..n {
                let y = y0 + (j as f64 + 0.5) * hy;
                if x * x + y * y < r * r {
                    hits += 1;
                }
            }
        }
        let oracle = hits as f64 * hx * hy;
        let exact = disk_rect_overlap(r, x0, x1, y0, y1);
        assert_relative_eq!(exact, oracle, max_relative = 2e-3);
    }

    #[test]
    fn disk_overlap_fractions_sum_to_disk_area() {
        let g = GridSpec::new(1.0, 2, 4.0, 23, 2).unwrap();
        let r = 2.7;
        let fr = g.ball_overlap_fractions(r).unwrap();
        let total: f64 = fr.iter().map(|f| f * g.cell_volume()).sum();
        assert_relative_eq!(total, std::f64::consts::PI * r * r, epsilon = 1e-8);
    }

    #[test]
    fn radius_beyond_box_rejected() {
        let g = GridSpec::new(1.0, 4, 8.0, 16, 1).unwrap();
        assert!(g.ball_overlap_fractions(9.0).is_err());
    }
}
