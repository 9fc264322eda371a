//! Experiment configuration read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::covariance::{center, compute_covariances, CovarianceSet, Dataset};
use crate::error::{LaeError, Result};
use crate::io::idx::load_idx_images;
use crate::io::synthetic::{generate_synthetic, SyntheticSpec};
use crate::io::tabular::load_csv;
use crate::training::{Schedule, StoppingRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdxSource {
    pub images: PathBuf,
    pub labels: Option<PathBuf>,
    pub digit: Option<u8>,
    pub cap: Option<usize>,
}

/// Exactly one of the three sources must be set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub csv: Option<PathBuf>,
    pub idx: Option<IdxSource>,
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingOverrides {
    pub rel_error_tol: Option<f64>,
    pub param_change_tol: Option<f64>,
    pub max_iterations: Option<usize>,
}

/// Deliberate corruptions used to exercise the verification suite.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Faults {
    #[serde(default)]
    pub non_hermitian_sigma: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    /// Checked against the data when given.
    pub n: Option<usize>,
    pub p: usize,
    /// Layer sizes from input to output for a deep network, e.g. `[10, 5, 3, 5, 10]`.
    pub layers: Option<Vec<usize>>,
    #[serde(default = "default_algorithm")]
    pub algorithm: u8,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Extra seeds run in parallel by `train`.
    #[serde(default)]
    pub sweep: Vec<u64>,
    #[serde(default)]
    pub stopping: StoppingOverrides,
    #[serde(default)]
    pub center: bool,
    #[serde(default)]
    pub ridge: f64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub faults: Faults,
}

fn default_algorithm() -> u8 {
    1
}

fn default_seed() -> u64 {
    42
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ExperimentConfig {
    /// Auto-associative `Σ = diag(5, 4, 3, 2, 1)` with `p = 2`.
    fn default() -> Self {
        Self {
            dataset: DatasetConfig {
                synthetic: Some(SyntheticSpec::diagonal(&[5.0, 4.0, 3.0, 2.0, 1.0])),
                ..Default::default()
            },
            n: None,
            p: 2,
            layers: None,
            algorithm: default_algorithm(),
            seed: default_seed(),
            sweep: Vec::new(),
            stopping: StoppingOverrides::default(),
            center: false,
            ridge: 0.0,
            out: default_out(),
            faults: Faults::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LaeError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LaeError::Config(e.to_string()))
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        let sources = [d.csv.is_some(), d.idx.is_some(), d.synthetic.is_some()]
            .iter()
            .filter(|&&s| s)
            .count();
        if sources != 1 {
            return Err(LaeError::Config(format!(
                "exactly one dataset source is required, found {sources}"
            )));
        }
        if self.p == 0 {
            return Err(LaeError::Config("p must be positive".into()));
        }
        if let Some(n) = self.n {
            if self.p >= n {
                return Err(LaeError::Config(format!("need p < n, got p={}, n={n}", self.p)));
            }
        }
        if let Some(layers) = &self.layers {
            if layers.len() < 3 || layers.iter().any(|&l| l == 0) {
                return Err(LaeError::Config(format!(
                    "layers need at least three positive sizes: {layers:?}"
                )));
            }
            if layers.first() != layers.last() {
                return Err(LaeError::Config("input and output layer sizes must match".into()));
            }
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(LaeError::Config(format!("ridge must be a finite non-negative number, got {}", self.ridge)));
        }
        Schedule::algorithm(self.algorithm)?;
        self.stopping_rule().validate()
    }

    pub fn schedule(&self) -> Result<Schedule> {
        Schedule::algorithm(self.algorithm)
    }

    pub fn stopping_rule(&self) -> StoppingRule {
        let base = StoppingRule::default();
        StoppingRule {
            rel_error_tol: self.stopping.rel_error_tol.unwrap_or(base.rel_error_tol),
            param_change_tol: self.stopping.param_change_tol.unwrap_or(base.param_change_tol),
            max_iterations: self.stopping.max_iterations.unwrap_or(base.max_iterations),
        }
    }

    /// Load the configured dataset, centering it if requested, and check the
    /// shape against `n`, `p` and `layers`.
    pub fn load_dataset(&self) -> Result<Dataset> {
        self.validate()?;
        let d = &self.dataset;
        let data = if let Some(path) = &d.csv {
            load_csv(path)?
        } else if let Some(idx) = &d.idx {
            load_idx_images(&idx.images, idx.labels.as_deref(), idx.digit, idx.cap)?
        } else {
            generate_synthetic(d.synthetic.as_ref().expect("validated source"))?
        };
        let n = data.n();
        if self.n.is_some_and(|want| want != n) {
            return Err(LaeError::DimensionMismatch(format!(
                "config says n={} but the data has n={n}",
                self.n.unwrap_or_default()
            )));
        }
        if self.p >= n {
            return Err(LaeError::Config(format!("need p < n, got p={}, n={n}", self.p)));
        }
        if let Some(layers) = &self.layers {
            if layers[0] != n {
                return Err(LaeError::DimensionMismatch(format!(
                    "layers start at {} but the data has n={n}",
                    layers[0]
                )));
            }
        }
        Ok(if self.center { center(&data) } else { data })
    }

    pub fn covariances(&self, data: &Dataset) -> Result<CovarianceSet> {
        compute_covariances(data, self.ridge)
    }
}
