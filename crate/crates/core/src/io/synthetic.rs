//! Deterministic and seeded synthetic datasets.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::covariance::Dataset;
use crate::error::{LaeError, Result};
use crate::linalg::{complex_normal, real_normal, CMatrix};

pub const DEFAULT_COPIES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SyntheticSpec {
    /// Samples `√(λ_i/K)·ω^k e_i` for `k < K`, `ω = e^{2πi/K}`, so that the
    /// data is centered and `Σ_XX = diag(λ)` exactly.
    DiagonalSigma {
        eigenvalues: Vec<f64>,
        #[serde(default = "default_copies")]
        copies: usize,
        #[serde(default)]
        allow_duplicates: bool,
    },
    RandomComplex { n: usize, m: usize, seed: u64 },
    RandomReal { n: usize, m: usize, seed: u64 },
}

fn default_copies() -> usize {
    DEFAULT_COPIES
}

impl SyntheticSpec {
    pub fn diagonal(eigenvalues: &[f64]) -> Self {
        Self::DiagonalSigma {
            eigenvalues: eigenvalues.to_vec(),
            copies: DEFAULT_COPIES,
            allow_duplicates: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::DiagonalSigma {
                eigenvalues,
                copies,
                allow_duplicates,
            } => {
                if eigenvalues.is_empty() || *copies == 0 {
                    return Err(LaeError::Config("eigenvalue list and copies must be non-empty".into()));
                }
                if eigenvalues.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
                    return Err(LaeError::Config(format!(
                        "eigenvalues must be positive and finite: {eigenvalues:?}"
                    )));
                }
                let max = eigenvalues.iter().copied().fold(0.0, f64::max);
                let mut sorted = eigenvalues.clone();
                sorted.sort_by(f64::total_cmp);
                if !allow_duplicates && sorted.windows(2).any(|w| w[1] - w[0] < 1e-8 * max) {
                    return Err(LaeError::DuplicateEigenvalues(format!("{eigenvalues:?}")));
                }
            }
            Self::RandomComplex { n, m, .. } | Self::RandomReal { n, m, .. } => {
                if *n == 0 || *m == 0 {
                    return Err(LaeError::Config(format!("need n, m > 0, got n={n}, m={m}")));
                }
            }
        }
        Ok(())
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let x = match spec {
        SyntheticSpec::DiagonalSigma {
            eigenvalues, copies, ..
        } => {
            let (n, k) = (eigenvalues.len(), *copies);
            let mut x = CMatrix::zeros(n, n * k);
            for (i, &l) in eigenvalues.iter().enumerate() {
                let scale = (l / k as f64).sqrt();
                for j in 0..k {
                    let phase = num_complex::Complex64::from_polar(1.0, TAU * j as f64 / k as f64);
                    x[(i, i * k + j)] = phase * scale;
                }
            }
            x
        }
        SyntheticSpec::RandomComplex { n, m, seed } => {
            complex_normal(*n, *m, &mut ChaCha8Rng::seed_from_u64(*seed))
        }
        SyntheticSpec::RandomReal { n, m, seed } => {
            real_normal(*n, *m, &mut ChaCha8Rng::seed_from_u64(*seed))
        }
    };
    Dataset::from_columns(x, None)
}
