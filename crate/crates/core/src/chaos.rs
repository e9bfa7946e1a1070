//! Wiener-chaos machinery over the discretized noise: dense symmetric kernel
//! tensors, inner products in the correlated Hilbert space, multiple-integral
//! sampling through whitened Wick polynomials, and the chaos-diagonal
//! Malliavin operators D, D^2, L, L^{-1}, P_t.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::GreenKernel;
use crate::linalg::{apply_axis_transposed, dot, matmul_into};
use crate::noise::{NoiseModel, Realization};

/// Highest multiple-integral order the sampler supports.
pub const MAX_ORDER: usize = 4;

/// Convention for the p-th chaos kernel product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelConvention {
    /// Product of the p Picard factors ending at the anchor (t, x); the
    /// first Picard iterate is G_{t-s}(x-z).
    #[default]
    PicardChain,
    /// Variant with an extra factor anchored at the space-time origin,
    /// matching a p+1-fold product display; kept for comparison runs.
    WithOriginFactor,
}

/// Pointwise evaluation of the order-p chaos kernel: times are sorted, the
/// Green factors chain through the sorted points and end at (t, x), and the
/// whole product carries 1/p!.
#[allow(clippy::too_many_arguments)]
pub fn chaos_kernel_eval(
    green: &GreenKernel,
    convention: KernelConvention,
    t: f64,
    x: &[f64],
    times: &[f64],
    points: &[&[f64]],
    p: usize,
) -> Result<f64> {
    if p == 0 {
        return Err(Error::Domain(
            "order zero has no kernel; the chaos mean handles p = 0".into(),
        ));
    }
    if times.len() != p || points.len() != p {
        return Err(Error::ShapeMismatch(format!(
            "expected {p} times and points, got {} and {}",
            times.len(),
            points.len()
        )));
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| times[a].partial_cmp(&times[b]).unwrap());

    let mut factorial = 1.0;
    for k in 2..=p {
        factorial *= k as f64;
    }
    let d = green.dim;
    let mut value = 1.0 / factorial;
    let mut prev_t;
    let mut prev_x: Vec<f64>;
    match convention {
        KernelConvention::PicardChain => {
            prev_t = times[order[0]];
            prev_x = points[order[0]].to_vec();
        }
        KernelConvention::WithOriginFactor => {
            prev_t = 0.0;
            prev_x = vec![0.0; d];
        }
    }
    let start = if convention == KernelConvention::WithOriginFactor { 0 } else { 1 };
    for idx in start..p {
        let k = order[idx];
        let dt = times[k] - prev_t;
        let dx: Vec<f64> = points[k].iter().zip(&prev_x).map(|(a, b)| a - b).collect();
        value *= green.eval(dt, &dx);
        prev_t = times[k];
        prev_x = points[k].to_vec();
    }
    // Anchor factor to (t, x).
    let dx: Vec<f64> = x.iter().zip(&prev_x).map(|(a, b)| a - b).collect();
    value *= green.eval(t - prev_t, &dx);
    Ok(value)
}

/// Dense symmetric kernel tensor over (time-cell x space-cell)^p; entries are
/// cell-averaged kernel values, time-major slot indices c = a * n_sp + i.
#[derive(Debug, Clone)]
pub struct ChaosKernelTensor {
    pub order: usize,
    pub n_t: usize,
    pub n_sp: usize,
    pub data: Vec<f64>,
    pub symmetrized: bool,
}

impl ChaosKernelTensor {
    pub fn n_slots(&self) -> usize {
        self.n_t * self.n_sp
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn zeros(order: usize, n_t: usize, n_sp: usize) -> Self {
        let m = n_t * n_sp;
        ChaosKernelTensor {
            order,
            n_t,
            n_sp,
            data: vec![0.0; m.pow(order as u32)],
            symmetrized: true,
        }
    }

    pub fn from_data(order: usize, n_t: usize, n_sp: usize, data: Vec<f64>) -> Result<Self> {
        let m = n_t * n_sp;
        if data.len() != m.pow(order as u32) {
            return Err(Error::ShapeMismatch(format!(
                "tensor of order {order} over {m} slots needs {} entries, got {}",
                m.pow(order as u32),
                data.len()
            )));
        }
        Ok(ChaosKernelTensor { order, n_t, n_sp, data, symmetrized: false })
    }

    /// Rank-one tensor a ⊗ a ⊗ ... ⊗ a (already symmetric).
    pub fn rank_one(order: usize, n_t: usize, n_sp: usize, a: &[f64]) -> Result<Self> {
        let m = n_t * n_sp;
        if a.len() != m {
            return Err(Error::ShapeMismatch("rank-one factor length mismatch".into()));
        }
        let mut data = a.to_vec();
        for _ in 1..order {
            let mut next = Vec::with_capacity(data.len() * m);
            for &v in &data {
                for &w in a {
                    next.push(v * w);
                }
            }
            data = next;
        }
        Ok(ChaosKernelTensor { order, n_t, n_sp, data, symmetrized: true })
    }

    fn same_grid(&self, other: &ChaosKernelTensor) -> bool {
        self.n_t == other.n_t && self.n_sp == other.n_sp
    }

    /// Canonical symmetrization (average over slot permutations). Idempotent.
    pub fn symmetrize(&mut self) {
        if self.symmetrized || self.order <= 1 {
            self.symmetrized = true;
            return;
        }
        let p = self.order;
        let m = self.n_slots();
        let perms = permutations(p);
        let inv_count = 1.0 / perms.len() as f64;
        let strides: Vec<usize> = (0..p).map(|k| m.pow((p - 1 - k) as u32)).collect();
        let old = std::mem::take(&mut self.data);
        let mut slots = vec![0usize; p];
        let mut data = vec![0.0; old.len()];
        for (flat, out) in data.iter_mut().enumerate() {
            let mut rem = flat;
            for k in 0..p {
                slots[k] = rem / strides[k];
                rem %= strides[k];
            }
            let mut acc = 0.0;
            for perm in &perms {
                let mut idx = 0usize;
                for (k, &pk) in perm.iter().enumerate() {
                    idx += slots[pk] * strides[k];
                }
                acc += old[idx];
            }
            *out = acc * inv_count;
        }
        self.data = data;
        self.symmetrized = true;
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// Contiguous slice with the first `frozen` slots fixed (valid because
    /// leading slots are outermost in the flat layout).
    pub fn frozen_slice(&self, frozen: &[usize]) -> &[f64] {
        let m = self.n_slots();
        let remaining = self.order - frozen.len();
        let block = m.pow(remaining as u32);
        let mut offset = 0usize;
        for (k, &c) in frozen.iter().enumerate() {
            offset += c * m.pow((self.order - 1 - k) as u32);
        }
        &self.data[offset..offset + block]
    }
}

fn permutations(p: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let v = rest.remove(i);
            prefix.push(v);
            rec(prefix, rest, out);
            prefix.pop();
            rest.insert(i, v);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..p).collect(), &mut out);
    out
}

/// Apply the slot covariance C_t (x) C_x to every slot of a flat tensor copy.
fn apply_covariance_all_slots(
    data: &mut [f64],
    order: usize,
    n_t: usize,
    n_sp: usize,
    model: &NoiseModel,
) {
    let m = n_t * n_sp;
    for k in 0..order {
        let slot_stride = m.pow((order - 1 - k) as u32);
        // time component: length n_t, stride n_sp * slot_stride
        apply_axis_transposed(data, n_t, n_sp * slot_stride, &model.c_time);
        // space component: length n_sp, stride slot_stride
        apply_axis_transposed(data, n_sp, slot_stride, &model.c_space);
    }
}

/// Inner product <f, g> in H^{(x) p}: p-fold contraction against the
/// separable cell covariance.
pub fn h_inner(f: &ChaosKernelTensor, g: &ChaosKernelTensor, model: &NoiseModel) -> Result<f64> {
    if f.order != g.order || !f.same_grid(g) {
        return Err(Error::ShapeMismatch(format!(
            "h_inner needs matching tensors, got order {} vs {} on {}x{} vs {}x{}",
            f.order, g.order, f.n_t, f.n_sp, g.n_t, g.n_sp
        )));
    }
    if f.n_t != model.n_time() || f.n_sp != model.n_space() {
        return Err(Error::ShapeMismatch(
            "tensor grid does not match the noise model grid".into(),
        ));
    }
    let mut work = g.data.clone();
    apply_covariance_all_slots(&mut work, g.order, g.n_t, g.n_sp, model);
    Ok(dot(&f.data, &work))
}

/// Kernel tensor whitened into the factorized coordinates, with the partial
/// traces needed by the Wick polynomial evaluation.
#[derive(Debug, Clone)]
pub struct PreparedTensor {
    pub order: usize,
    m: usize,
    data: Vec<f64>,
    /// tr(G) for order 2; sum_i g[i,i,.] for order 3; sum_i g[i,i,.,.] for 4.
    trace0: f64,
    trace1: Vec<f64>,
    trace2: Vec<f64>,
}

impl PreparedTensor {
    /// Whiten `tensor` against the model factors: per slot, apply L_t^T to
    /// the time component and L_x^T to the space component.
    pub fn prepare(tensor: &ChaosKernelTensor, model: &NoiseModel) -> Result<Self> {
        if tensor.order == 0 || tensor.order > MAX_ORDER {
            return Err(Error::UnsupportedConfiguration(format!(
                "multiple integrals supported for orders 1..={MAX_ORDER}, got {}",
                tensor.order
            )));
        }
        if !tensor.symmetrized {
            return Err(Error::Precondition(
                "prepare() requires a symmetrized tensor".into(),
            ));
        }
        if tensor.n_t != model.n_time() || tensor.n_sp != model.n_space() {
            return Err(Error::ShapeMismatch(
                "tensor grid does not match the noise model grid".into(),
            ));
        }
        let p = tensor.order;
        let m = tensor.n_slots();
        let mut data = tensor.data.clone();
        for k in 0..p {
            let slot_stride = m.pow((p - 1 - k) as u32);
            apply_axis_transposed(&mut data, tensor.n_t, tensor.n_sp * slot_stride, &model.l_time);
            apply_axis_transposed(&mut data, tensor.n_sp, slot_stride, &model.l_space);
        }
        let mut trace0 = 0.0;
        let mut trace1 = Vec::new();
        let mut trace2 = Vec::new();
        match p {
            2 => {
                for i in 0..m {
                    trace0 += data[i * m + i];
                }
            }
            3 => {
                trace1 = vec![0.0; m];
                for i in 0..m {
                    let base = i * m * m + i * m;
                    for (k, t) in trace1.iter_mut().enumerate() {
                        *t += data[base + k];
                    }
                }
            }
            4 => {
                trace2 = vec![0.0; m * m];
                for i in 0..m {
                    let base = i * m * m * m + i * m * m;
                    for (kl, t) in trace2.iter_mut().enumerate() {
                        *t += data[base + kl];
                    }
                }
                for k in 0..m {
                    trace0 += trace2[k * m + k];
                }
            }
            _ => {}
        }
        Ok(PreparedTensor { order: p, m, data, trace0, trace1, trace2 })
    }

    /// Euclidean norm^2 of the whitened tensor, i.e. <f, f>_{H^(x)p}.
    pub fn norm_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }

    /// Evaluate the Wick (Hermite) polynomial I_p at one whitened noise
    /// vector; E[I_p] = 0 and E[I_p I_q] = 1_{p=q} p! <f, f> hold exactly.
    pub fn sample(&self, xi: &[f64]) -> f64 {
        assert_eq!(xi.len(), self.m, "whitened coordinate length mismatch");
        let m = self.m;
        match self.order {
            1 => dot(&self.data, xi),
            2 => {
                let mut quad = 0.0;
                for i in 0..m {
                    quad += xi[i] * dot(&self.data[i * m..(i + 1) * m], xi);
                }
                quad - self.trace0
            }
            3 => {
                let mut cubic = 0.0;
                for i in 0..m {
                    let xi_i = xi[i];
                    if xi_i == 0.0 {
                        continue;
                    }
                    let mut inner = 0.0;
                    for j in 0..m {
                        let row = &self.data[i * m * m + j * m..i * m * m + (j + 1) * m];
                        inner += xi[j] * dot(row, xi);
                    }
                    cubic += xi_i * inner;
                }
                cubic - 3.0 * dot(&self.trace1, xi)
            }
            4 => {
                let mut quart = 0.0;
                for i in 0..m {
                    let xi_i = xi[i];
                    if xi_i == 0.0 {
                        continue;
                    }
                    for j in 0..m {
                        let xi_j = xi[j];
                        if xi_j == 0.0 {
                            continue;
                        }
                        let mut inner = 0.0;
                        for k in 0..m {
                            let row = &self.data
                                [((i * m + j) * m + k) * m..((i * m + j) * m + k + 1) * m];
                            inner += xi[k] * dot(row, xi);
                        }
                        quart += xi_i * xi_j * inner;
                    }
                }
                let mut mid = 0.0;
                for k in 0..m {
                    mid += xi[k] * dot(&self.trace2[k * m..(k + 1) * m], xi);
                }
                quart - 6.0 * mid + 3.0 * self.trace0
            }
            _ => unreachable!(),
        }
    }

    /// Batched evaluation over many realizations; orders 2 and 3 go through a
    /// blocked matrix product so the heavy contraction is shared.
    pub fn sample_batch(&self, xis: &[Vec<f64>]) -> Vec<f64> {
        let n = xis.len();
        let m = self.m;
        match self.order {
            1 => xis.par_iter().map(|xi| dot(&self.data, xi)).collect(),
            2 => {
                // Y = G * Xi with Xi (m x n) column per sample.
                let mut xi_mat = vec![0.0; m * n];
                for (j, xi) in xis.iter().enumerate() {
                    for i in 0..m {
                        xi_mat[i * n + j] = xi[i];
                    }
                }
                let mut y = vec![0.0; m * n];
                matmul_into(&self.data, &xi_mat, &mut y, m, m, n);
                (0..n)
                    .into_par_iter()
                    .map(|j| {
                        let xi = &xis[j];
                        let mut quad = 0.0;
                        for i in 0..m {
                            quad += xi[i] * y[i * n + j];
                        }
                        quad - self.trace0
                    })
                    .collect()
            }
            3 => {
                // Chunked: B = reshape(g, m^2 x m) * Xi_chunk, then per-sample
                // quadratic form against B columns.
                let chunk = usize::max(1, (1usize << 24) / (m * m)).min(n.max(1));
                let mut out = vec![0.0; n];
                let mut start = 0;
                while start < n {
                    let stop = (start + chunk).min(n);
                    let nc = stop - start;
                    let mut xi_mat = vec![0.0; m * nc];
                    for (j, xi) in xis[start..stop].iter().enumerate() {
                        for i in 0..m {
                            xi_mat[i * nc + j] = xi[i];
                        }
                    }
                    let mut b = vec![0.0; m * m * nc];
                    matmul_into(&self.data, &xi_mat, &mut b, m * m, m, nc);
                    let vals: Vec<f64> = (0..nc)
                        .into_par_iter()
                        .map(|j| {
                            let xi = &xis[start + j];
                            let mut cubic = 0.0;
                            for i in 0..m {
                                let xi_i = xi[i];
                                if xi_i == 0.0 {
                                    continue;
                                }
                                let mut inner = 0.0;
                                for k in 0..m {
                                    inner += xi[k] * b[(i * m + k) * nc + j];
                                }
                                cubic += xi_i * inner;
                            }
                            cubic - 3.0 * dot(&self.trace1, xi)
                        })
                        .collect();
                    out[start..stop].copy_from_slice(&vals);
                    start = stop;
                }
                out
            }
            _ => xis.par_iter().map(|xi| self.sample(xi)).collect(),
        }
    }
}

const TENSOR_MAGIC: &[u8; 8] = b"PHTENSR1";

/// Binary tensor dump in the same little-endian layout as the noise cache.
pub fn save_tensor(tensor: &ChaosKernelTensor, path: &std::path::Path) -> Result<()> {
    let mut buf: Vec<u8> = Vec::with_capacity(40 + tensor.data.len() * 8);
    buf.extend_from_slice(TENSOR_MAGIC);
    for v in [tensor.order as u64, tensor.n_t as u64, tensor.n_sp as u64, tensor.symmetrized as u64] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in &tensor.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_tensor(path: &std::path::Path) -> Result<ChaosKernelTensor> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 40 || &bytes[..8] != TENSOR_MAGIC {
        return Err(Error::Parse("not a tensor dump".into()));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[8 + 8 * k..16 + 8 * k].try_into().unwrap());
    let order = word(0) as usize;
    let n_t = word(1) as usize;
    let n_sp = word(2) as usize;
    let symmetrized = word(3) != 0;
    let m = n_t * n_sp;
    let expect = m.pow(order as u32);
    let body = &bytes[40..];
    if body.len() != expect * 8 {
        return Err(Error::Parse("tensor dump size mismatch".into()));
    }
    let data: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(ChaosKernelTensor { order, n_t, n_sp, data, symmetrized })
}

/// Spec-level operation: one sample of I_p(f) from a realization.
pub fn multiple_integral_sample(
    f: &ChaosKernelTensor,
    model: &NoiseModel,
    realization: &Realization,
) -> Result<f64> {
    let prepared = PreparedTensor::prepare(f, model)?;
    Ok(prepared.sample(&realization.xi))
}

/// Truncated chaos decomposition: mean plus kernel tensors for p = 1..P.
#[derive(Debug, Clone)]
pub struct ChaosRepresentation {
    pub mean: f64,
    pub tensors: Vec<ChaosKernelTensor>,
}

impl ChaosRepresentation {
    pub fn constant(mean: f64) -> Self {
        ChaosRepresentation { mean, tensors: Vec::new() }
    }

    pub fn truncation_order(&self) -> usize {
        self.tensors.iter().map(|t| t.order).max().unwrap_or(0)
    }

    pub fn tensor_of_order(&self, p: usize) -> Option<&ChaosKernelTensor> {
        self.tensors.iter().find(|t| t.order == p)
    }

    /// Per-order variance contributions p! ||f_p||^2.
    pub fn order_variances(&self, model: &NoiseModel) -> Result<Vec<(usize, f64)>> {
        let mut out = Vec::with_capacity(self.tensors.len());
        for t in &self.tensors {
            let mut factorial = 1.0;
            for k in 2..=t.order {
                factorial *= k as f64;
            }
            out.push((t.order, factorial * h_inner(t, t, model)?));
        }
        Ok(out)
    }

    /// Second moment mean^2 + sum_p p! ||f_p||^2.
    pub fn second_moment(&self, model: &NoiseModel) -> Result<f64> {
        Ok(self.mean * self.mean
            + self
                .order_variances(model)?
                .iter()
                .map(|(_, v)| v)
                .sum::<f64>())
    }

    pub fn variance(&self, model: &NoiseModel) -> Result<f64> {
        Ok(self.second_moment(model)? - self.mean * self.mean)
    }

    /// Covariance with another representation (orthogonality across orders).
    pub fn covariance(&self, other: &ChaosRepresentation, model: &NoiseModel) -> Result<f64> {
        let mut acc = 0.0;
        for t in &self.tensors {
            if let Some(o) = other.tensor_of_order(t.order) {
                let mut factorial = 1.0;
                for k in 2..=t.order {
                    factorial *= k as f64;
                }
                acc += factorial * h_inner(t, o, model)?;
            }
        }
        Ok(acc)
    }

    /// Ornstein-Uhlenbeck generator: orderwise multiplier -n, mean dropped.
    pub fn apply_l(&self) -> ChaosRepresentation {
        let tensors = self
            .tensors
            .iter()
            .map(|t| {
                let mut c = t.clone();
                c.scale(-(t.order as f64));
                c
            })
            .collect();
        ChaosRepresentation { mean: 0.0, tensors }
    }

    /// Pseudo-inverse L^{-1}: orderwise multiplier -1/n; requires mean zero.
    pub fn apply_linv(&self) -> Result<ChaosRepresentation> {
        if self.mean.abs() > 1e-12 {
            return Err(Error::Precondition(format!(
                "L^-1 needs a centered representation, mean = {}",
                self.mean
            )));
        }
        let tensors = self
            .tensors
            .iter()
            .map(|t| {
                let mut c = t.clone();
                c.scale(-1.0 / t.order as f64);
                c
            })
            .collect();
        Ok(ChaosRepresentation { mean: 0.0, tensors })
    }

    /// Ornstein-Uhlenbeck semigroup P_t: orderwise multiplier e^{-tn}.
    pub fn apply_pt(&self, t: f64) -> Result<ChaosRepresentation> {
        if t < 0.0 {
            return Err(Error::Domain(format!("P_t needs t >= 0, got {t}")));
        }
        let tensors = self
            .tensors
            .iter()
            .map(|tn| {
                let mut c = tn.clone();
                c.scale((-t * tn.order as f64).exp());
                c
            })
            .collect();
        Ok(ChaosRepresentation { mean: self.mean, tensors })
    }

    /// Malliavin derivative: order-n term becomes n I_{n-1}(f_n(slot, .))
    /// with one frozen argument slot.
    pub fn apply_d(&self) -> DerivativeField {
        DerivativeField {
            frozen: 1,
            terms: self
                .tensors
                .iter()
                .map(|t| DerivativeTerm { scale: t.order as f64, tensor: t.clone() })
                .collect(),
        }
    }

    /// Second Malliavin derivative with two frozen slots:
    /// sum_n n (n-1) I_{n-2}(f_n(slot, slot', .)).
    pub fn apply_d2(&self) -> DerivativeField {
        DerivativeField {
            frozen: 2,
            terms: self
                .tensors
                .iter()
                .filter(|t| t.order >= 2)
                .map(|t| DerivativeTerm {
                    scale: (t.order * (t.order - 1)) as f64,
                    tensor: t.clone(),
                })
                .collect(),
        }
    }

    /// Prepare all orders for repeated sampling against one noise model.
    pub fn prepare(&self, model: &NoiseModel) -> Result<PreparedRepresentation> {
        let prepared = self
            .tensors
            .iter()
            .map(|t| PreparedTensor::prepare(t, model))
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedRepresentation { mean: self.mean, prepared })
    }
}

/// Whitened, sampling-ready representation.
pub struct PreparedRepresentation {
    pub mean: f64,
    pub prepared: Vec<PreparedTensor>,
}

impl PreparedRepresentation {
    pub fn sample(&self, realization: &Realization) -> f64 {
        self.mean + self.prepared.iter().map(|p| p.sample(&realization.xi)).sum::<f64>()
    }

    pub fn sample_batch(&self, realizations: &[Realization]) -> Vec<f64> {
        let xis: Vec<Vec<f64>> = realizations.iter().map(|r| r.xi.clone()).collect();
        let mut out = vec![self.mean; realizations.len()];
        for p in &self.prepared {
            let vals = p.sample_batch(&xis);
            for (o, v) in out.iter_mut().zip(vals) {
                *o += v;
            }
        }
        out
    }
}

/// One term of a Malliavin derivative: scale * f_n with `frozen` slots fixed.
#[derive(Debug, Clone)]
pub struct DerivativeTerm {
    pub scale: f64,
    pub tensor: ChaosKernelTensor,
}

/// D F or D^2 F as a field over frozen cell indices; evaluating at frozen
/// cells yields a lower-order chaos representation.
#[derive(Debug, Clone)]
pub struct DerivativeField {
    pub frozen: usize,
    pub terms: Vec<DerivativeTerm>,
}

impl DerivativeField {
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The deterministic (order frozen == n) component at a frozen cell:
    /// for DF of F = I_1(f) this is just f(cell).
    pub fn deterministic_part(&self, frozen_cells: &[usize]) -> f64 {
        assert_eq!(frozen_cells.len(), self.frozen);
        self.terms
            .iter()
            .filter(|t| t.tensor.order == self.frozen)
            .map(|t| t.scale * t.tensor.frozen_slice(frozen_cells)[0])
            .sum()
    }

    /// L^2(Omega) norm squared of the derivative at frozen cells:
    /// sum_n scale_n^2 (n - frozen)! || f_n(cells, .) ||^2.
    pub fn norm_sq_at(&self, model: &NoiseModel, frozen_cells: &[usize]) -> Result<f64> {
        assert_eq!(frozen_cells.len(), self.frozen);
        let mut acc = 0.0;
        for term in &self.terms {
            let rem = term.tensor.order - self.frozen;
            let slice = term.tensor.frozen_slice(frozen_cells);
            let inner = if rem == 0 {
                slice[0] * slice[0]
            } else {
                let mut work = slice.to_vec();
                apply_covariance_all_slots(&mut work, rem, term.tensor.n_t, term.tensor.n_sp, model);
                dot(slice, &work)
            };
            let mut factorial = 1.0;
            for k in 2..=rem {
                factorial *= k as f64;
            }
            acc += term.scale * term.scale * factorial * inner;
        }
        Ok(acc)
    }

    /// L^p(Omega)-norm estimate at frozen cells for even p, via the
    /// equivalence of norms on a fixed finite chaos (hypercontractivity):
    /// ||X||_p <= (p-1)^{n/2} ||X||_2 per order n; used as a majorant.
    pub fn norm_p_bound_at(&self, model: &NoiseModel, frozen_cells: &[usize], p: f64) -> Result<f64> {
        let mut acc = 0.0;
        for term in &self.terms {
            let rem = term.tensor.order - self.frozen;
            let single = DerivativeField { frozen: self.frozen, terms: vec![term.clone()] };
            let l2 = single.norm_sq_at(model, frozen_cells)?.sqrt();
            acc += (p - 1.0).powf(rem as f64 / 2.0) * l2;
        }
        Ok(acc)
    }
}
