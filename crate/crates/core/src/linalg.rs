//! Small dense linear algebra kit: matrices, PSD factorization with a jitter
//! ladder, and strided axis transforms used by the tensor contractions.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len());
        self.data
            .chunks_exact(self.cols)
            .map(|row| dot(row, x))
            .collect()
    }

    /// y = A^T x.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len());
        let mut y = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = self.row(i);
            for (yj, &aij) in y.iter_mut().zip(row) {
                *yj += xi * aij;
            }
        }
        y
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        matmul_into(
            &self.data,
            &other.data,
            &mut out.data,
            self.rows,
            self.cols,
            other.cols,
        );
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Frobenius-symmetric check used by tests.
    pub fn symmetry_gap(&self) -> f64 {
        let mut gap = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                gap = gap.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        gap
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// C += A * B with A (m x k), B (k x n), all row-major. Parallel over row
/// blocks of A; deterministic since each output row is owned by one task.
pub fn matmul_into(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    let block = usize::max(1, 2048 / n.max(1)).min(m.max(1));
    c.par_chunks_mut(block * n)
        .enumerate()
        .for_each(|(bi, c_chunk)| {
            let row0 = bi * block;
            let rows = c_chunk.len() / n;
            for r in 0..rows {
                let arow = &a[(row0 + r) * k..(row0 + r + 1) * k];
                let crow = &mut c_chunk[r * n..(r + 1) * n];
                for (l, &al) in arow.iter().enumerate() {
                    if al == 0.0 {
                        continue;
                    }
                    let brow = &b[l * n..(l + 1) * n];
                    for (cv, &bv) in crow.iter_mut().zip(brow) {
                        *cv += al * bv;
                    }
                }
            }
        });
}

/// Plain Cholesky; `None` if the matrix is not numerically positive definite.
pub fn cholesky(a: &Mat) -> Option<Mat> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Some(l)
}

/// Result of the jitter-stabilized factorization of a PSD covariance block.
#[derive(Debug, Clone)]
pub struct PsdFactor {
    pub l: Mat,
    /// Diagonal jitter that was added (absolute value, not relative).
    pub jitter: f64,
}

/// Factor a symmetric PSD matrix, climbing a jitter ladder
/// eps in {0, 1e-12, 1e-10, ..., 1e-4} * ||C||_max until Cholesky succeeds.
pub fn factor_psd(c: &Mat, axis: &'static str) -> Result<PsdFactor> {
    let scale = c.max_abs();
    let ladder = [0.0, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4];
    for &rel in &ladder {
        let jitter = rel * scale;
        let mut work = c.clone();
        if jitter > 0.0 {
            for i in 0..work.rows {
                let v = work.get(i, i) + jitter;
                work.set(i, i, v);
            }
        }
        if let Some(l) = cholesky(&work) {
            return Ok(PsdFactor { l, jitter });
        }
    }
    Err(Error::NumericDegeneracy {
        axis,
        detail: format!(
            "covariance factorization failed even with jitter 1e-4 * {scale:.3e}"
        ),
    })
}

/// In-place linear transform of one axis of a dense tensor stored flat.
///
/// The tensor is viewed as [outer, len, inner] with the axis of length `len`
/// at stride `inner`; each line x is replaced by M^T x (`mat` is len x len,
/// applied as out[j] = sum_i mat[i][j] x[i]).
pub fn apply_axis_transposed(data: &mut [f64], len: usize, inner: usize, mat: &Mat) {
    assert_eq!(mat.rows, len);
    assert_eq!(mat.cols, len);
    let total = data.len();
    assert_eq!(total % (len * inner), 0);
    let outer_block = len * inner;
    data.par_chunks_mut(outer_block).for_each(|chunk| {
        let mut line = vec![0.0f64; len];
        let mut out = vec![0.0f64; len];
        for i in 0..inner {
            for (k, slot) in line.iter_mut().enumerate() {
                *slot = chunk[k * inner + i];
            }
            out.iter_mut().for_each(|v| *v = 0.0);
            for (k, &xv) in line.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let mrow = mat.row(k);
                for (ov, &mv) in out.iter_mut().zip(mrow) {
                    *ov += xv * mv;
                }
            }
            for (k, &ov) in out.iter().enumerate() {
                chunk[k * inner + i] = ov;
            }
        }
    });
}

/// Same as [`apply_axis_transposed`] but applies M x (no transpose).
pub fn apply_axis(data: &mut [f64], len: usize, inner: usize, mat: &Mat) {
    apply_axis_transposed(data, len, inner, &mat.transpose());
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cholesky_recovers_spd_factor() {
        let a = Mat::from_fn(3, 3, |i, j| if i == j { 2.0 } else { 0.5 });
        let l = cholesky(&a).expect("spd");
        let rec = l.matmul(&l.transpose());
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(rec.get(i, j), a.get(i, j), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Mat::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 2.0 });
        assert!(cholesky(&a).is_none());
    }

    #[test]
    fn jitter_ladder_rescues_rank_deficient() {
        // Rank-1 PSD matrix: plain Cholesky fails, jitter succeeds.
        let a = Mat::from_fn(3, 3, |_, _| 1.0);
        let f = factor_psd(&a, "test").expect("jitter ladder");
        assert!(f.jitter > 0.0);
        let rec = f.l.matmul(&f.l.transpose());
        for i in 0..3 {
            for j in 0..3 {
                assert!((rec.get(i, j) - a.get(i, j)).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn axis_transform_matches_direct_kron_product() {
        // Tensor of shape [2, 3]; transform axis 1 by M^T and compare entrywise.
        let mat = Mat::from_fn(3, 3, |i, j| (i * 3 + j) as f64 * 0.1 + 1.0);
        let mut data: Vec<f64> = (0..6).map(|v| v as f64).collect();
        let orig = data.clone();
        apply_axis_transposed(&mut data, 3, 1, &mat);
        for o in 0..2 {
            for j in 0..3 {
                let mut want = 0.0;
                for i in 0..3 {
                    want += mat.get(i, j) * orig[o * 3 + i];
                }
                assert_relative_eq!(data[o * 3 + j], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn matmul_small_case() {
        let a = Mat::from_fn(2, 3, |i, j| (i + j) as f64);
        let b = Mat::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
        let c = a.matmul(&b);
        // row 0 of a = [0,1,2]; col 0 of b = [0,2,4] -> 10
        assert_relative_eq!(c.get(0, 0), 10.0);
        assert_relative_eq!(c.get(1, 1), 1.0 * 1.0 + 2.0 * 3.0 + 3.0 * 5.0);
    }
}
