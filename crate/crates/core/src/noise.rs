//! Discretized noise: separable covariance of cell masses W(1_cell) with
//! factored time/space blocks, and deterministic counter-seeded sampling.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::kernels::{Axis, CellBox, CorrelationKernel};
use crate::linalg::{factor_psd, Mat};

/// Factored covariance model of the smoothed noise masses.
///
/// The covariance of W(1_cellA), W(1_cellB) is the product of a temporal and
/// a spatial cell-pair integral of the correlation kernels; both blocks are
/// kept with their (jitter-stabilized) Cholesky factors.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub grid: GridSpec,
    pub kernel: CorrelationKernel,
    pub c_time: Mat,
    pub c_space: Mat,
    pub l_time: Mat,
    pub l_space: Mat,
    /// Diagonal jitter added to each block before factorization succeeded.
    pub jitter: (f64, f64),
}

impl NoiseModel {
    pub fn n_time(&self) -> usize {
        self.grid.n_t
    }

    pub fn n_space(&self) -> usize {
        self.grid.n_space()
    }

    pub fn n_cells(&self) -> usize {
        self.grid.n_cells()
    }

    /// Covariance of two cell masses, time-major flat indices.
    pub fn cell_covariance(&self, a: usize, b: usize) -> f64 {
        let ns = self.n_space();
        let (ta, sa) = (a / ns, a % ns);
        let (tb, sb) = (b / ns, b % ns);
        self.c_time.get(ta, tb) * self.c_space.get(sa, sb)
    }

    /// Deterministic sampler rooted at `seed`.
    pub fn sampler(&self, seed: u64) -> NoiseSampler<'_> {
        NoiseSampler { model: self, seed }
    }
}

/// Build the noise model for a grid and an admissible correlation kernel.
pub fn build_noise_model(grid: &GridSpec, kernel: &CorrelationKernel) -> Result<NoiseModel> {
    grid.validate()?;
    kernel.validate()?;
    if kernel.dim != grid.dim {
        return Err(Error::ShapeMismatch(format!(
            "kernel dimension {} != grid dimension {}",
            kernel.dim, grid.dim
        )));
    }
    let report = crate::kernels::dalang_check(kernel);
    if !report.satisfied {
        return Err(Error::Precondition(format!(
            "Dalang's condition fails: {}",
            report.divergence.unwrap_or_default()
        )));
    }

    let n_t = grid.n_t;
    let mut c_time = Mat::zeros(n_t, n_t);
    for i in 0..n_t {
        let (a0, a1) = grid.time_cell(i);
        for j in 0..=i {
            let (b0, b1) = grid.time_cell(j);
            let v = kernel.cell_integral(
                &CellBox::interval(a0, a1),
                &CellBox::interval(b0, b1),
                Axis::Time,
            )?;
            c_time.set(i, j, v);
            c_time.set(j, i, v);
        }
    }

    let ns = grid.n_space();
    let cells: Vec<CellBox> = (0..ns)
        .map(|s| {
            let mi = grid.space_multi_index(s);
            match grid.dim {
                1 => {
                    let (a, b) = grid.axis_cell(mi[0]);
                    CellBox::interval(a, b)
                }
                _ => CellBox::rect(grid.axis_cell(mi[0]), grid.axis_cell(mi[1])),
            }
        })
        .collect();
    // Spatial block is translation-invariant on the uniform grid: compute one
    // value per offset and broadcast.
    let mut c_space = Mat::zeros(ns, ns);
    match grid.dim {
        1 => {
            let offsets: Vec<f64> = (0..grid.n_x)
                .map(|k| {
                    kernel.cell_integral(&cells[0], &cells[k], Axis::Space)
                })
                .collect::<Result<_>>()?;
            for i in 0..ns {
                for j in 0..ns {
                    c_space.set(i, j, offsets[i.abs_diff(j)]);
                }
            }
        }
        2 => {
            let n_x = grid.n_x;
            let offsets: Vec<f64> = (0..n_x * n_x)
                .into_par_iter()
                .map(|k| {
                    let (di, dj) = (k / n_x, k % n_x);
                    kernel.cell_integral(&cells[0], &cells[di * n_x + dj], Axis::Space)
                })
                .collect::<Result<_>>()?;
            for i in 0..ns {
                let (ix, iy) = (i / n_x, i % n_x);
                for j in 0..ns {
                    let (jx, jy) = (j / n_x, j % n_x);
                    c_space.set(i, j, offsets[ix.abs_diff(jx) * n_x + iy.abs_diff(jy)]);
                }
            }
        }
        _ => unreachable!(),
    }

    let ft = factor_psd(&c_time, "time")?;
    let fx = factor_psd(&c_space, "space")?;
    Ok(NoiseModel {
        grid: grid.clone(),
        kernel: *kernel,
        c_time,
        c_space,
        l_time: ft.l,
        l_space: fx.l,
        jitter: (ft.jitter, fx.jitter),
    })
}

/// One realization of the discretized noise: the whitened coordinates xi
/// (i.i.d. standard normal) plus the induced cell masses W = L_t Xi L_x^T.
#[derive(Debug, Clone)]
pub struct Realization {
    pub index: u64,
    pub n_t: usize,
    pub n_sp: usize,
    /// Whitened coordinates, time-major: xi[(a, i)] = xi[a * n_sp + i].
    pub xi: Vec<f64>,
}

impl Realization {
    /// Smoothed cell masses W(1_cell), time-major.
    pub fn cell_masses(&self, model: &NoiseModel) -> Vec<f64> {
        let (n_t, n_sp) = (self.n_t, self.n_sp);
        // tmp = L_t * Xi
        let mut tmp = vec![0.0; n_t * n_sp];
        crate::linalg::matmul_into(&model.l_time.data, &self.xi, &mut tmp, n_t, n_t, n_sp);
        // W = tmp * L_x^T
        let lxt = model.l_space.transpose();
        let mut w = vec![0.0; n_t * n_sp];
        crate::linalg::matmul_into(&tmp, &lxt.data, &mut w, n_t, n_sp, n_sp);
        w
    }

    /// The isonormal pairing W(h) for a step function h given by cell values
    /// (h is sum of h[c] * 1_cell): W(h) = sum h[c] * mass[c].
    pub fn pair(&self, model: &NoiseModel, h: &[f64]) -> f64 {
        let masses = self.cell_masses(model);
        crate::linalg::dot(h, &masses)
    }
}

/// Counter-based stream sampler: realization `index` is always generated from
/// stream `index` of the seeded ChaCha generator, independent of call order.
pub struct NoiseSampler<'a> {
    model: &'a NoiseModel,
    seed: u64,
}

impl NoiseSampler<'_> {
    pub fn realization(&self, index: u64) -> Realization {
        let n_t = self.model.n_time();
        let n_sp = self.model.n_space();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let xi: Vec<f64> = (0..n_t * n_sp)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Realization { index, n_t, n_sp, xi }
    }

    /// Realizations `0..count`, generated in parallel, deterministically.
    pub fn realizations(&self, count: usize) -> Vec<Realization> {
        (0..count as u64)
            .into_par_iter()
            .map(|i| self.realization(i))
            .collect()
    }
}

/// Sample `count` realizations for a model (spec-level convenience wrapper).
pub fn sample_realizations(model: &NoiseModel, seed: u64, count: usize) -> Result<Vec<Realization>> {
    if count == 0 {
        return Err(Error::Precondition("sample count must be >= 1".into()));
    }
    Ok(model.sampler(seed).realizations(count))
}

// ---------------------------------------------------------------------------
// Binary cache of covariance factors keyed by a content hash of (grid, kernel).
// ---------------------------------------------------------------------------

const CACHE_MAGIC: &[u8; 8] = b"PHNOISE1";

/// FNV-1a content hash of the (grid, kernel) description.
pub fn model_content_hash(grid: &GridSpec, kernel: &CorrelationKernel) -> u64 {
    let desc = format!("{grid:?}|{kernel:?}");
    let mut h: u64 = 0xcbf29ce484222325;
    for b in desc.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn cache_path(dir: &Path, hash: u64) -> PathBuf {
    dir.join(format!("noise-{hash:016x}.bin"))
}

/// Serialize the four covariance/factor blocks into the cache directory.
pub fn save_noise_cache(model: &NoiseModel, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let hash = model_content_hash(&model.grid, &model.kernel);
    let path = cache_path(dir, hash);
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CACHE_MAGIC);
    let blocks = [&model.c_time, &model.c_space, &model.l_time, &model.l_space];
    for m in blocks {
        buf.extend_from_slice(&(m.rows as u64).to_le_bytes());
        buf.extend_from_slice(&(m.cols as u64).to_le_bytes());
        for v in &m.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf.extend_from_slice(&model.jitter.0.to_le_bytes());
    buf.extend_from_slice(&model.jitter.1.to_le_bytes());
    let mut f = std::fs::File::create(&path)?;
    f.write_all(&buf)?;
    Ok(path)
}

/// Try to load a cached model for (grid, kernel); None on miss or mismatch.
pub fn load_noise_cache(
    grid: &GridSpec,
    kernel: &CorrelationKernel,
    dir: &Path,
) -> Result<Option<NoiseModel>> {
    let hash = model_content_hash(grid, kernel);
    let path = cache_path(dir, hash);
    if !path.exists() {
        return Ok(None);
    }
    let mut bytes = Vec::new();
    std::fs::File::open(&path)?.read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > bytes.len() {
            return Err(Error::Parse("noise cache truncated".into()));
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    if take(&mut pos, 8)? != CACHE_MAGIC {
        return Ok(None);
    }
    let mut mats = Vec::with_capacity(4);
    for _ in 0..4 {
        let rows = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
        let cols = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()));
        }
        mats.push(Mat { rows, cols, data });
    }
    let j0 = f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
    let j1 = f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
    let l_space = mats.pop().unwrap();
    let l_time = mats.pop().unwrap();
    let c_space = mats.pop().unwrap();
    let c_time = mats.pop().unwrap();
    Ok(Some(NoiseModel {
        grid: grid.clone(),
        kernel: *kernel,
        c_time,
        c_space,
        l_time,
        l_space,
        jitter: (j0, j1),
    }))
}

/// Build with cache lookup when `cache_dir` is set.
pub fn build_noise_model_cached(
    grid: &GridSpec,
    kernel: &CorrelationKernel,
    cache_dir: Option<&Path>,
) -> Result<NoiseModel> {
    if let Some(dir) = cache_dir {
        if let Some(model) = load_noise_cache(grid, kernel, dir)? {
            return Ok(model);
        }
        let model = build_noise_model(grid, kernel)?;
        save_noise_cache(&model, dir)?;
        return Ok(model);
    }
    build_noise_model(grid, kernel)
}
