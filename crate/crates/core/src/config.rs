//! Declarative run configuration: a single TOML document selecting the
//! model, kernels, grid, and one experiment, with aggregated validation
//! against the standing hypotheses.

use serde::{Deserialize, Serialize};

use crate::chaos::KernelConvention;
use crate::error::{Error, Result};
use crate::fields::{recommended_x_max, ModelEquation, ModelSpec};
use crate::grid::GridSpec;
use crate::kernels::{dalang_check, CorrelationKernel, DalangReport, SpatialKernel, TemporalKernel};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub equation: ModelEquation,
    pub dimension: usize,
    pub t0: f64,
    pub truncation: usize,
    #[serde(default)]
    pub convention: KernelConvention,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelConfig {
    pub temporal: TemporalKernel,
    pub spatial: SpatialKernel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub n_t: usize,
    pub n_x: usize,
    /// Spatial half-width; when omitted it is derived from the experiment's
    /// largest radius plus the padding rule.
    #[serde(default)]
    pub x_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathSource {
    /// Coupled averages of the simulated model.
    Model,
    /// I.i.d. standard normal values on the grid (harness sanity mode).
    Synthetic,
}

impl Default for PathSource {
    fn default() -> Self {
        PathSource::Model
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentConfig {
    /// Hypothesis and configuration audit only.
    Validate {},
    /// sigma_R scaling over a radius grid.
    Variance {
        radii: Vec<f64>,
        #[serde(default)]
        target_exponent: Option<f64>,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    /// Correlation decay over (theta, theta * ratios).
    Covariance {
        theta: f64,
        ratios: Vec<f64>,
        #[serde(default)]
        target_exponent: Option<f64>,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
        /// Cross-validate against the spectral route (Riesz, d = 1).
        #[serde(default)]
        spectral_check: bool,
    },
    /// KS/Wasserstein distances of normalized averages against N(0,1).
    Clt {
        radii: Vec<f64>,
        replicas: usize,
        #[serde(default)]
        ks_threshold: Option<f64>,
        /// Also run the first-chaos control (exactly Gaussian).
        #[serde(default)]
        control_first_chaos: bool,
    },
    /// Logarithmic-average measure gaps along coupled paths.
    Asclt {
        r_min: f64,
        r_max: f64,
        ratio: f64,
        seeds: Vec<u64>,
        t_checkpoints: Vec<f64>,
        #[serde(default)]
        source: PathSource,
        #[serde(default)]
        final_gap_threshold: Option<f64>,
        #[serde(default = "default_pass_fraction")]
        pass_fraction: f64,
    },
    /// Ibragimov-Lifshits statistic over a path ensemble.
    Criterion {
        r_min: f64,
        r_max: f64,
        ratio: f64,
        n_paths: usize,
        s_max: f64,
        s_step: f64,
        t_checkpoints: Vec<f64>,
        #[serde(default)]
        source: PathSource,
        #[serde(default = "default_cauchy_tolerance")]
        cauchy_tolerance: f64,
    },
    /// Majorant-integral finiteness check.
    BoundCheck {
        beta1: f64,
        beta2: f64,
        beta3: f64,
        #[serde(default = "default_one")]
        c1: f64,
        #[serde(default = "default_one")]
        c2: f64,
        #[serde(default = "default_s_sup")]
        s_sup: f64,
        #[serde(default)]
        expect_finite: Option<bool>,
    },
}

fn default_tolerance() -> f64 {
    0.1
}
fn default_pass_fraction() -> f64 {
    0.8
}
fn default_cauchy_tolerance() -> f64 {
    0.05
}
fn default_one() -> f64 {
    1.0
}
fn default_s_sup() -> f64 {
    3.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSection {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub out_dir: Option<String>,
}

fn default_seed() -> u64 {
    1
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { seed: default_seed(), workers: 0, out_dir: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub kernel: KernelConfig,
    pub grid: GridConfig,
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn correlation_kernel(&self) -> CorrelationKernel {
        CorrelationKernel::new(self.kernel.temporal, self.kernel.spatial, self.model.dimension)
    }

    /// Largest radius the experiment needs the box to accommodate.
    pub fn max_radius(&self) -> f64 {
        match &self.experiment {
            ExperimentConfig::Variance { radii, .. } => {
                radii.iter().cloned().fold(0.0, f64::max)
            }
            ExperimentConfig::Covariance { theta, ratios, .. } => {
                theta * ratios.iter().cloned().fold(1.0, f64::max)
            }
            ExperimentConfig::Clt { radii, .. } => radii.iter().cloned().fold(0.0, f64::max),
            ExperimentConfig::Asclt { r_max, .. }
            | ExperimentConfig::Criterion { r_max, .. } => *r_max,
            _ => 1.0,
        }
    }

    pub fn resolved_x_max(&self) -> f64 {
        self.grid.x_max.unwrap_or_else(|| {
            recommended_x_max(self.model.equation, self.max_radius(), self.model.t0)
        })
    }

    /// Build the validated model spec.
    pub fn model_spec(&self) -> Result<ModelSpec> {
        let grid = GridSpec::new(
            self.model.t0,
            self.grid.n_t,
            self.resolved_x_max(),
            self.grid.n_x,
            self.model.dimension,
        )?;
        let mut spec = ModelSpec::new(
            self.model.equation,
            self.model.dimension,
            self.model.t0,
            self.correlation_kernel(),
            self.model.truncation,
            grid,
        )?;
        spec.convention = self.model.convention;
        Ok(spec)
    }
}

/// Aggregated validation outcome: every violated hypothesis is reported.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
    pub dalang: DalangReport,
    /// Estimated bytes of the largest dense tensor the run would allocate.
    pub tensor_bytes_estimate: f64,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Validate a configuration against the standing hypotheses and desk-scale
/// budgets; never stops at the first failure.
pub fn validate_config(config: &RunConfig) -> ValidationReport {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();

    let kernel = config.correlation_kernel();
    errors.extend(kernel.issues());

    if config.model.dimension == 0 || config.model.dimension > 2 {
        errors.push(format!(
            "engine targets d in {{1, 2}}, got d = {}",
            config.model.dimension
        ));
    }
    if config.model.equation == ModelEquation::Ham && config.model.dimension > 2 {
        errors.push("the hyperbolic model is restricted to d <= 2".into());
    }
    if !(config.model.t0 > 0.0) {
        errors.push(format!("horizon t0 must be positive, got {}", config.model.t0));
    }
    if config.model.truncation > crate::chaos::MAX_ORDER {
        errors.push(format!(
            "truncation {} exceeds the supported maximum {}",
            config.model.truncation,
            crate::chaos::MAX_ORDER
        ));
    }
    if config.grid.n_t < 2 || config.grid.n_x < 2 {
        errors.push(format!(
            "grid needs n_t, n_x >= 2, got ({}, {})",
            config.grid.n_t, config.grid.n_x
        ));
    }

    let dalang = dalang_check(&kernel);
    if !dalang.satisfied {
        errors.push(format!(
            "Dalang's condition fails: {}",
            dalang.divergence.clone().unwrap_or_default()
        ));
    }

    let x_needed = recommended_x_max(config.model.equation, config.max_radius(), config.model.t0);
    let x_max = config.resolved_x_max();
    if x_max + 1e-9 < config.max_radius() + config.model.t0 {
        errors.push(format!(
            "x_max = {x_max} below the hard padding floor R_max + t0 = {}",
            config.max_radius() + config.model.t0
        ));
    } else if x_max + 1e-9 < x_needed {
        warnings.push(format!(
            "x_max = {x_max} below the recommended padding {x_needed:.3}; \
             heat-tail leakage may bias the largest radii"
        ));
    }

    // Experiment-specific field checks.
    match &config.experiment {
        ExperimentConfig::Variance { radii, .. } => {
            if radii.len() < 3 {
                errors.push("variance experiment needs at least 3 radii".into());
            }
        }
        ExperimentConfig::Covariance { theta, ratios, .. } => {
            if *theta <= 1.0 {
                errors.push(format!("covariance experiment needs theta > 1, got {theta}"));
            }
            if ratios.iter().any(|&q| q < 1.0) {
                errors.push("covariance ratios must be >= 1".into());
            }
            if ratios.len() < 3 {
                errors.push("covariance experiment needs at least 3 ratios".into());
            }
        }
        ExperimentConfig::Clt { radii, replicas, .. } => {
            if radii.len() < 2 {
                errors.push("clt experiment needs at least 2 radii".into());
            }
            if *replicas < 1000 {
                errors.push(format!("clt experiment needs >= 1000 replicas, got {replicas}"));
            }
        }
        ExperimentConfig::Asclt { r_min, r_max, ratio, seeds, t_checkpoints, .. } => {
            if !(*r_min >= 1.0 && r_max > r_min) {
                errors.push("asclt experiment needs 1 <= r_min < r_max".into());
            }
            if !(*ratio > 1.0 && *ratio <= 1.2) {
                errors.push(format!(
                    "asclt grid ratio must lie in (1, 1.2] for the log average, got {ratio}"
                ));
            }
            if seeds.is_empty() {
                errors.push("asclt experiment needs at least one seed".into());
            }
            if t_checkpoints.len() < 2 {
                errors.push("asclt experiment needs at least two T checkpoints".into());
            }
        }
        ExperimentConfig::Criterion { r_min, r_max, ratio, n_paths, s_max, s_step, .. } => {
            if !(*r_min >= 1.0 && r_max > r_min) {
                errors.push("criterion experiment needs 1 <= r_min < r_max".into());
            }
            if !(*ratio > 1.0 && *ratio <= 1.2) {
                errors.push(format!("criterion grid ratio must lie in (1, 1.2], got {ratio}"));
            }
            if *n_paths < 50 {
                errors.push(format!("criterion experiment needs >= 50 paths, got {n_paths}"));
            }
            if !(*s_max > 0.0 && *s_step > 0.0 && s_step <= s_max) {
                errors.push("criterion experiment needs 0 < s_step <= s_max".into());
            }
        }
        ExperimentConfig::BoundCheck { beta1, beta2, beta3, .. } => {
            for (name, b) in [("beta1", beta1), ("beta2", beta2), ("beta3", beta3)] {
                if !(*b > 0.0) {
                    errors.push(format!("{name} must be strictly positive, got {b}"));
                }
            }
        }
        ExperimentConfig::Validate {} => {}
    }

    // Desk-scale budget heuristics.
    let n_cells = (config.grid.n_t
        * config.grid.n_x.pow(config.model.dimension as u32)) as f64;
    let tensor_bytes = n_cells.powi(config.model.truncation as i32) * 8.0;
    if tensor_bytes > 1.6e9 {
        errors.push(format!(
            "order-{} tensors over {} cells need {:.2e} bytes; reduce truncation or grid",
            config.model.truncation, n_cells, tensor_bytes
        ));
    } else if tensor_bytes > 4.0e8 {
        warnings.push(format!(
            "largest tensor is {:.2e} bytes; expect minutes-scale runs",
            tensor_bytes
        ));
    }

    ValidationReport { errors, warnings, dalang, tensor_bytes_estimate: tensor_bytes }
}
