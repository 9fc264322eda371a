//! Data model, centering and covariance construction.
//!
//! Covariances are raw sums of outer products, `Σ_XY = Σ_t x_t y_t*`, with no
//! division by the sample count. [`CovarianceSet::normalized_sigma_xx`] gives the
//! per-sample view for reporting only.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{LaeError, Result};
use crate::landscape::{spectrum, Spectrum};
use crate::linalg::{
    self, fro, hermitian_residual, hermitize, identity, is_finite, rel_residual, CMatrix,
    SINGULAR_CONDITION,
};

/// Tolerance for the Hermitian checks on supplied covariance blocks.
const HERMITIAN_TOL: f64 = 1e-10;

/// Training vectors stored column-wise: `inputs` is `n × m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: CMatrix,
    targets: Option<CMatrix>,
    centered: bool,
}

impl Dataset {
    /// Build from column matrices. Targets identical to the inputs collapse to the
    /// auto-associative representation.
    pub fn from_columns(inputs: CMatrix, targets: Option<CMatrix>) -> Result<Self> {
        if inputs.ncols() == 0 || inputs.nrows() == 0 {
            return Err(LaeError::Empty("dataset needs at least one non-empty sample".into()));
        }
        if let Some((i, j)) = first_non_finite(&inputs) {
            return Err(LaeError::NonFinite(format!("input sample {j}, coordinate {i}")));
        }
        let targets = match targets {
            None => None,
            Some(y) => {
                if y.shape() != inputs.shape() {
                    return Err(LaeError::DimensionMismatch(format!(
                        "targets are {}x{} but inputs are {}x{}",
                        y.nrows(),
                        y.ncols(),
                        inputs.nrows(),
                        inputs.ncols()
                    )));
                }
                if let Some((i, j)) = first_non_finite(&y) {
                    return Err(LaeError::NonFinite(format!("target sample {j}, coordinate {i}")));
                }
                if y == inputs {
                    None
                } else {
                    Some(y)
                }
            }
        };
        Ok(Self {
            inputs,
            targets,
            centered: false,
        })
    }

    /// Input dimension.
    pub fn n(&self) -> usize {
        self.inputs.nrows()
    }

    /// Sample count.
    pub fn m(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> &CMatrix {
        &self.inputs
    }

    /// Targets; the inputs themselves in the auto-associative case.
    pub fn targets(&self) -> &CMatrix {
        self.targets.as_ref().unwrap_or(&self.inputs)
    }

    pub fn is_auto_associative(&self) -> bool {
        self.targets.is_none()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn is_real(&self) -> bool {
        self.inputs.iter().all(|z| z.im == 0.0) && self.targets().iter().all(|z| z.im == 0.0)
    }
}

fn first_non_finite(m: &CMatrix) -> Option<(usize, usize)> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Build a dataset from sample vectors; targets absent means auto-associative.
pub fn build_dataset(
    inputs: &[Vec<Complex64>],
    targets: Option<&[Vec<Complex64>]>,
) -> Result<Dataset> {
    let n = check_uniform(inputs, "inputs")?;
    let y = match targets {
        None => None,
        Some(t) => {
            let nt = check_uniform(t, "targets")?;
            if t.len() != inputs.len() || nt != n {
                return Err(LaeError::DimensionMismatch(format!(
                    "{} targets of length {nt} for {} inputs of length {n}",
                    t.len(),
                    inputs.len()
                )));
            }
            Some(linalg::columns_from_vectors(t))
        }
    };
    Dataset::from_columns(linalg::columns_from_vectors(inputs), y)
}

fn check_uniform(vectors: &[Vec<Complex64>], what: &str) -> Result<usize> {
    let first = vectors
        .first()
        .ok_or_else(|| LaeError::Empty(format!("no {what}")))?;
    let n = first.len();
    if n == 0 {
        return Err(LaeError::Empty(format!("{what} have length zero")));
    }
    if let Some((t, v)) = vectors.iter().enumerate().find(|(_, v)| v.len() != n) {
        return Err(LaeError::DimensionMismatch(format!(
            "{what}[{t}] has length {} but {what}[0] has length {n}",
            v.len()
        )));
    }
    Ok(n)
}

fn subtract_row_means(m: &CMatrix) -> CMatrix {
    let count = m.ncols() as f64;
    let mut out = m.clone();
    for i in 0..m.nrows() {
        let mean = m.row(i).iter().sum::<Complex64>() / count;
        for j in 0..m.ncols() {
            out[(i, j)] -= mean;
        }
    }
    out
}

/// Subtract the sample mean from inputs and, separately, from targets.
pub fn center(d: &Dataset) -> Dataset {
    Dataset {
        inputs: subtract_row_means(&d.inputs),
        targets: d.targets.as_ref().map(subtract_row_means),
        centered: true,
    }
}

/// `Σ_XX, Σ_XY, Σ_YX, Σ_YY` and the composite `Σ = Σ_YX Σ_XX⁻¹ Σ_XY`.
#[derive(Debug, Clone)]
pub struct CovarianceSet {
    pub sigma_xx: CMatrix,
    pub sigma_xy: CMatrix,
    pub sigma_yx: CMatrix,
    pub sigma_yy: CMatrix,
    pub sigma: CMatrix,
    pub xx_invertible: bool,
    pub condition_xx: f64,
    ridge: f64,
    auto_associative: bool,
    sample_count: Option<usize>,
    regression: OnceLock<CMatrix>,
    spectrum: OnceLock<Spectrum>,
}

impl CovarianceSet {
    /// Auto-associative covariance set with `Σ = Σ_XX`.
    pub fn auto_associative(sigma_xx: CMatrix) -> Result<Self> {
        Self::from_blocks(sigma_xx.clone(), sigma_xx.clone(), sigma_xx.clone(), sigma_xx, true, 0.0)
    }

    /// Hetero-associative set from explicit blocks. `Σ_XY` is taken as `Σ_YX*`.
    pub fn hetero_associative(
        sigma_xx: CMatrix,
        sigma_yx: CMatrix,
        sigma_yy: CMatrix,
        ridge: f64,
    ) -> Result<Self> {
        let sigma_xy = sigma_yx.adjoint();
        Self::from_blocks(sigma_xx, sigma_xy, sigma_yx, sigma_yy, false, ridge)
    }

    fn from_blocks(
        sigma_xx: CMatrix,
        sigma_xy: CMatrix,
        sigma_yx: CMatrix,
        sigma_yy: CMatrix,
        auto_associative: bool,
        ridge: f64,
    ) -> Result<Self> {
        let n = sigma_xx.nrows();
        for (name, m) in [
            ("Sigma_XX", &sigma_xx),
            ("Sigma_XY", &sigma_xy),
            ("Sigma_YX", &sigma_yx),
            ("Sigma_YY", &sigma_yy),
        ] {
            if m.shape() != (n, n) {
                return Err(LaeError::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if !is_finite(m) {
                return Err(LaeError::NonFinite(name.to_string()));
            }
        }
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return Err(LaeError::Config(format!("ridge must be a nonnegative real, got {ridge}")));
        }
        for (name, m) in [("Sigma_XX", &sigma_xx), ("Sigma_YY", &sigma_yy)] {
            let residual = hermitian_residual(m);
            if residual > HERMITIAN_TOL {
                return Err(LaeError::NotHermitian {
                    what: name.to_string(),
                    residual,
                });
            }
        }
        let cross = rel_residual(&sigma_xy, &sigma_yx.adjoint());
        if cross > HERMITIAN_TOL {
            return Err(LaeError::NotHermitian {
                what: "Sigma_XY vs Sigma_YX*".into(),
                residual: cross,
            });
        }
        let sigma_xx = hermitize(&sigma_xx);
        let sigma_yy = hermitize(&sigma_yy);

        let effective = regularized(&sigma_xx, ridge);
        let condition_xx = hermitian_condition(&effective);
        if !(condition_xx <= SINGULAR_CONDITION) {
            return Err(LaeError::SingularCovariance {
                condition: condition_xx,
            });
        }
        let sigma = if auto_associative {
            sigma_xx.clone()
        } else {
            let z = linalg::solve_hpd(&effective, &sigma_xy, "Sigma_XX")?;
            hermitize(&(&sigma_yx * z))
        };
        Ok(Self {
            sigma_xx,
            sigma_xy,
            sigma_yx,
            sigma_yy,
            sigma,
            xx_invertible: true,
            condition_xx,
            ridge,
            auto_associative,
            sample_count: None,
            regression: OnceLock::new(),
            spectrum: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.sigma_xx.nrows()
    }

    pub fn is_auto_associative(&self) -> bool {
        self.auto_associative
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn sample_count(&self) -> Option<usize> {
        self.sample_count
    }

    /// `Σ_XX + ridge·I`, the matrix every inversion actually uses.
    pub fn effective_sigma_xx(&self) -> CMatrix {
        regularized(&self.sigma_xx, self.ridge)
    }

    /// `Σ_XX / m`. Never used by the solvers.
    pub fn normalized_sigma_xx(&self) -> Option<CMatrix> {
        self.sample_count
            .map(|m| self.sigma_xx.unscale(m as f64))
    }

    /// The unconstrained least-squares map `Σ_YX Σ_XX⁻¹` (identity when auto-associative).
    pub fn regression_map(&self) -> Result<&CMatrix> {
        if let Some(r) = self.regression.get() {
            return Ok(r);
        }
        let r = if self.auto_associative {
            identity(self.n())
        } else {
            linalg::right_solve_hpd(&self.sigma_yx, &self.effective_sigma_xx(), "Sigma_XX")?
        };
        let _ = self.regression.set(r);
        Ok(self.regression.get().expect("just set"))
    }

    /// Cached eigendecomposition of `Σ`.
    pub fn spectrum(&self) -> Result<&Spectrum> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let s = spectrum(&self.sigma)?;
        let _ = self.spectrum.set(s);
        Ok(self.spectrum.get().expect("just set"))
    }

    /// `Tr Σ_YY` as a real number.
    pub fn trace_yy(&self) -> f64 {
        self.sigma_yy.trace().re
    }

    /// Replace `Σ` without any validation. Used to inject faults into the
    /// invariant suite.
    #[doc(hidden)]
    pub fn with_sigma_unchecked(&self, sigma: CMatrix) -> Self {
        let mut out = self.clone();
        out.sigma = sigma;
        out.spectrum = OnceLock::new();
        out
    }
}

fn regularized(sigma_xx: &CMatrix, ridge: f64) -> CMatrix {
    if ridge > 0.0 {
        sigma_xx + identity(sigma_xx.nrows()).scale(ridge)
    } else {
        sigma_xx.clone()
    }
}

/// Condition number of a Hermitian matrix; its singular values are the moduli of
/// its eigenvalues.
fn hermitian_condition(m: &CMatrix) -> f64 {
    let eig = m.clone().symmetric_eigenvalues();
    let mut max = 0.0f64;
    let mut min = f64::INFINITY;
    for v in eig.iter() {
        max = max.max(v.abs());
        min = min.min(v.abs());
    }
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Sum of outer products `Σ_t a_t b_t*` for column-sample matrices.
fn outer_sum(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b.adjoint()
}

/// Populate every covariance block from a dataset. `ridge` adds `ridge·I` to
/// `Σ_XX` wherever it is inverted.
pub fn compute_covariances(d: &Dataset, ridge: f64) -> Result<CovarianceSet> {
    let x = d.inputs();
    let sigma_xx = hermitize(&outer_sum(x, x));
    let mut set = if d.is_auto_associative() {
        CovarianceSet::from_blocks(
            sigma_xx.clone(),
            sigma_xx.clone(),
            sigma_xx.clone(),
            sigma_xx,
            true,
            ridge,
        )?
    } else {
        let y = d.targets();
        let sigma_yx = outer_sum(y, x);
        let sigma_xy = sigma_yx.adjoint();
        let sigma_yy = hermitize(&outer_sum(y, y));
        CovarianceSet::from_blocks(sigma_xx, sigma_xy, sigma_yx, sigma_yy, false, ridge)?
    };
    set.sample_count = Some(d.m());
    Ok(set)
}

/// Covariances for a denoising autoencoder: inputs `x_t + n_t`, targets `x_t`.
pub fn denoising_covariances(
    sigma_xx: &CMatrix,
    sigma_nn: &CMatrix,
    sigma_nx: &CMatrix,
    sigma_xn: &CMatrix,
) -> Result<CovarianceSet> {
    let n = sigma_xx.nrows();
    for (name, m) in [
        ("Sigma_XX", sigma_xx),
        ("Sigma_NN", sigma_nn),
        ("Sigma_NX", sigma_nx),
        ("Sigma_XN", sigma_xn),
    ] {
        if m.shape() != (n, n) {
            return Err(LaeError::DimensionMismatch(format!(
                "{name} is {}x{}, expected {n}x{n}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    let cross = rel_residual(sigma_nx, &sigma_xn.adjoint());
    if cross > HERMITIAN_TOL {
        return Err(LaeError::NotHermitian {
            what: "Sigma_NX vs Sigma_XN*".into(),
            residual: cross,
        });
    }
    let noiseless = [sigma_nn, sigma_nx, sigma_xn]
        .iter()
        .all(|m| m.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    if noiseless {
        return CovarianceSet::auto_associative(sigma_xx.clone());
    }
    let effective = sigma_xx + sigma_nn + sigma_nx + sigma_xn;
    let residual = hermitian_residual(&effective);
    if residual > HERMITIAN_TOL {
        return Err(LaeError::NotHermitian {
            what: "effective Sigma_XX".into(),
            residual,
        });
    }
    let sigma_xy = sigma_xx + sigma_nx;
    let sigma_yx = sigma_xx + sigma_xn;
    CovarianceSet::from_blocks(effective, sigma_xy, sigma_yx, sigma_xx.clone(), false, 0.0)
}

/// Largest deviation of any covariance block from its required symmetry.
pub fn symmetry_residual(cov: &CovarianceSet) -> f64 {
    [
        hermitian_residual(&cov.sigma_xx),
        hermitian_residual(&cov.sigma_yy),
        hermitian_residual(&cov.sigma),
        fro(&(&cov.sigma_xy - cov.sigma_yx.adjoint())) / fro(&cov.sigma_yx).max(linalg::TINY),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}
