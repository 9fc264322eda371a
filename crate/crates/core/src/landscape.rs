//! Eigenstructure of `Σ` and the critical points of `E(A, B)`.
//!
//! Full-rank critical points are indexed by a `p`-subset of eigenvectors of `Σ`:
//! `A = U_I C`, `B = C⁻¹U_I*Σ_YXΣ_XX⁻¹`. The top-`p` subset is the global
//! minimum and every other subset is a saddle.

use std::fmt;

use itertools::Itertools;

use crate::covariance::{CovarianceSet, Dataset};
use crate::error::{LaeError, Result};
use crate::linalg::{
    self, c, fro, hermitian_residual, hermitize, identity, CMatrix, RANK_TOL, TINY,
};
use crate::solvers::{self, error_of, projection, solve_b_given_a, AutoencoderParams};

/// Hermitian tolerance accepted by [`spectrum`].
const SPECTRUM_HERMITIAN_TOL: f64 = 1e-10;
/// Relative eigen-gap below which the spectrum is flagged as degenerate.
const GAP_WARNING: f64 = 1e-8;
/// Largest principal angle accepted when matching `span(A)` to eigenvectors.
const SUBSPACE_ANGLE_TOL: f64 = 1e-6;
/// Largest condition number accepted for a hidden-layer change of basis.
const MAX_HIDDEN_CONDITION: f64 = 1e10;
/// Default cap on the number of index sets enumerated.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// Descending eigenvalues and orthonormal eigenvectors (as columns).
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
    pub gap_warning: bool,
}

impl Spectrum {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `U_I`, the eigenvectors selected by `idx`, in index order.
    pub fn basis(&self, idx: &IndexSet) -> CMatrix {
        CMatrix::from_fn(self.n(), idx.len(), |i, j| {
            self.eigenvectors[(i, idx.indices()[j])]
        })
    }

    /// `Σ_{i ∈ idx} λ_i`.
    pub fn partial_sum(&self, idx: &IndexSet) -> f64 {
        idx.indices().iter().map(|&i| self.eigenvalues[i]).sum()
    }

    /// `Σ_{i > p} λ_i`, the auto-associative error floor for a width-`p` hidden layer.
    pub fn tail_sum(&self, p: usize) -> f64 {
        self.eigenvalues.iter().skip(p).sum()
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending, each
/// eigenvector's first nonzero coordinate made real and positive.
pub fn spectrum(sigma: &CMatrix) -> Result<Spectrum> {
    let n = sigma.nrows();
    if sigma.ncols() != n {
        return Err(LaeError::DimensionMismatch(format!(
            "spectrum needs a square matrix, got {}x{}",
            n,
            sigma.ncols()
        )));
    }
    let residual = hermitian_residual(sigma);
    if residual > SPECTRUM_HERMITIAN_TOL {
        return Err(LaeError::NotHermitian {
            what: "Sigma".into(),
            residual,
        });
    }
    let eig = hermitize(sigma).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let scale = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let pivot = col
            .iter()
            .find(|z| z.norm() > 1e-10 * scale)
            .copied()
            .unwrap_or(c(1.0, 0.0));
        let phase = pivot.conj() / pivot.norm();
        for i in 0..n {
            eigenvectors[(i, dst)] = col[i] * phase;
        }
    }
    let scale = eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max).max(TINY);
    let gap_warning = eigenvalues
        .windows(2)
        .any(|w| (w[0] - w[1]) / scale < GAP_WARNING);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
        gap_warning,
    })
}

/// A strictly increasing set of eigenvector indices, stored zero-based.
/// `Display` prints the one-based form, e.g. `{1,3}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexSet {
    indices: Vec<usize>,
}

impl IndexSet {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(LaeError::InvalidIndexSet("empty".into()));
        }
        if !indices.windows(2).all(|w| w[0] < w[1]) {
            return Err(LaeError::InvalidIndexSet(format!(
                "{indices:?} is not strictly increasing"
            )));
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(LaeError::InvalidIndexSet(format!(
                    "index {} exceeds dimension {n}",
                    last + 1
                )));
            }
        }
        Ok(Self { indices })
    }

    /// Build from one-based indices.
    pub fn from_one_based(indices: &[usize], n: usize) -> Result<Self> {
        if indices.contains(&0) {
            return Err(LaeError::InvalidIndexSet("one-based indices start at 1".into()));
        }
        Self::new(indices.iter().map(|i| i - 1).collect(), n)
    }

    /// `{1, …, p}`.
    pub fn top(p: usize, n: usize) -> Result<Self> {
        Self::new((0..p).collect(), n)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn is_top(&self) -> bool {
        self.indices.iter().enumerate().all(|(k, &i)| k == i)
    }

    pub fn complement(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|i| !self.indices.contains(i)).collect()
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.one_based().iter().join(","))
    }
}

/// Outcome of [`is_critical`].
#[derive(Debug, Clone)]
pub struct CriticalPointReport {
    pub is_critical: bool,
    /// Relative residual of `A*ABΣ_XX = A*Σ_YX`.
    pub residual_b_eq: f64,
    /// Relative residual of `ABΣ_XX B* = Σ_YX B*`.
    pub residual_a_eq: f64,
    /// `‖W − P_AΣ_YXΣ_XX⁻¹‖ / ‖P_AΣ_YXΣ_XX⁻¹‖`; NaN when `A` is rank deficient.
    pub w_projection_residual: f64,
    pub classified_index_set: Option<IndexSet>,
    pub error_value: f64,
}

fn check_hidden_basis(cmat: &CMatrix, p: usize) -> Result<()> {
    if cmat.shape() != (p, p) {
        return Err(LaeError::DimensionMismatch(format!(
            "C must be {p}x{p}, got {}x{}",
            cmat.nrows(),
            cmat.ncols()
        )));
    }
    let cond = linalg::condition_number(cmat);
    if !(cond <= MAX_HIDDEN_CONDITION) {
        return Err(LaeError::SingularGram(format!(
            "hidden-layer basis C (condition number {cond:.3e})"
        )));
    }
    Ok(())
}

/// `A = U_I C`, `B = C⁻¹U_I*Σ_YXΣ_XX⁻¹` (`C⁻¹U_I*` when auto-associative).
pub fn build_critical_point(
    spec: &Spectrum,
    idx: &IndexSet,
    cmat: &CMatrix,
    cov: &CovarianceSet,
) -> Result<AutoencoderParams> {
    if spec.n() != cov.n() {
        return Err(LaeError::DimensionMismatch("spectrum and covariances differ in n".into()));
    }
    check_hidden_basis(cmat, idx.len())?;
    let u = spec.basis(idx);
    let a = &u * cmat;
    let c_inv_ut = linalg::solve_general(cmat, &u.adjoint(), "C")?;
    let b = if cov.is_auto_associative() {
        c_inv_ut
    } else {
        c_inv_ut * solvers::regression_solve(cov)?
    };
    AutoencoderParams::new(a, b)
}

/// `E` at the critical point of `idx`: `Tr Σ_YY − Σ_{i∈I} λ_i`, which is the
/// complement sum `Σ_{i∉I} λ_i` in the auto-associative case.
pub fn critical_error(spec: &Spectrum, idx: &IndexSet, cov: &CovarianceSet) -> Result<f64> {
    if spec.n() != cov.n() {
        return Err(LaeError::DimensionMismatch("spectrum and covariances differ in n".into()));
    }
    if cov.is_auto_associative() {
        Ok(idx
            .complement(spec.n())
            .iter()
            .map(|&i| spec.eigenvalues[i])
            .sum())
    } else {
        Ok(cov.trace_yy() - spec.partial_sum(idx))
    }
}

/// Check both stationarity equations and, for critical points with full-rank
/// `A`, identify which eigenvectors span `A`.
pub fn is_critical(
    params: &AutoencoderParams,
    cov: &CovarianceSet,
    tol: f64,
) -> Result<CriticalPointReport> {
    if params.n() != cov.n() {
        return Err(LaeError::DimensionMismatch(format!(
            "parameters have n={} but covariances have n={}",
            params.n(),
            cov.n()
        )));
    }
    let (residual_b_eq, residual_a_eq) = solvers::stationarity_residuals(params, cov);
    let is_crit = residual_b_eq <= tol && residual_a_eq <= tol;
    let error_value = error_of(params, cov)?;

    let mut w_projection_residual = f64::NAN;
    let mut classified_index_set = None;
    if let Ok(pa) = projection(params.a(), RANK_TOL) {
        let target = pa * cov.regression_map()?;
        w_projection_residual = linalg::rel_residual(&params.w(), &target);
        if is_crit {
            classified_index_set = classify_span(params.a(), cov.spectrum()?);
        }
    }
    Ok(CriticalPointReport {
        is_critical: is_crit,
        residual_b_eq,
        residual_a_eq,
        w_projection_residual,
        classified_index_set,
        error_value,
    })
}

/// Match `span(a)` to a subset of eigenvectors by principal angles.
pub fn classify_span(a: &CMatrix, spec: &Spectrum) -> Option<IndexSet> {
    let q = linalg::orthonormal_columns(a);
    let overlaps = q.adjoint() * &spec.eigenvectors;
    let selected: Vec<usize> = (0..spec.n())
        .filter(|&i| overlaps.column(i).norm_squared() > 0.5)
        .collect();
    if selected.len() != a.ncols() {
        return None;
    }
    let idx = IndexSet::new(selected, spec.n()).ok()?;
    let u = spec.basis(&idx);
    let outside = &u - &q * (q.adjoint() * &u);
    (fro(&outside) < SUBSPACE_ANGLE_TOL).then_some(idx)
}

fn binomial(n: usize, p: usize) -> u128 {
    let p = p.min(n - p);
    let mut acc: u128 = 1;
    for k in 0..p {
        acc = acc * (n - k) as u128 / (k + 1) as u128;
    }
    acc
}

/// All `C(n, p)` index sets with their critical error, ascending by error.
pub fn enumerate_critical_values(
    spec: &Spectrum,
    p: usize,
    cov: &CovarianceSet,
) -> Result<Vec<(IndexSet, f64)>> {
    enumerate_critical_values_capped(spec, p, cov, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_critical_values_capped(
    spec: &Spectrum,
    p: usize,
    cov: &CovarianceSet,
    cap: u128,
) -> Result<Vec<(IndexSet, f64)>> {
    let n = spec.n();
    if p == 0 || p > n {
        return Err(LaeError::InvalidIndexSet(format!("p={p} must lie in 1..={n}")));
    }
    let count = binomial(n, p);
    if count > cap {
        return Err(LaeError::CapExceeded { n, p, count, cap });
    }
    let mut out = (0..n)
        .combinations(p)
        .map(|indices| {
            let idx = IndexSet::new(indices, n)?;
            let e = critical_error(spec, &idx, cov)?;
            Ok((idx, e))
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|x, y| x.1.total_cmp(&y.1).then_with(|| x.0.cmp(&y.0)));
    Ok(out)
}

/// Result of a saddle-escape probe.
#[derive(Debug, Clone)]
pub struct Escape {
    pub params: AutoencoderParams,
    pub delta_e: f64,
    /// Zero-based index of the used eigenvector being rotated away.
    pub from: usize,
    /// Zero-based index of the unused eigenvector being rotated toward.
    pub toward: usize,
}

/// Rotate the used eigenvector with the smallest eigenvalue toward the unused
/// eigenvector with the largest eigenvalue by angle `step`, re-solve `B`
/// optimally and report `ΔE = E_new − E_old`.
pub fn saddle_escape(
    params: &AutoencoderParams,
    spec: &Spectrum,
    cov: &CovarianceSet,
    step: f64,
) -> Result<Escape> {
    let report = is_critical(params, cov, 1e-8)?;
    if !report.is_critical {
        return Err(LaeError::NotCritical {
            residual_b: report.residual_b_eq,
            residual_a: report.residual_a_eq,
        });
    }
    let idx = classify_span(params.a(), spec).ok_or_else(|| {
        LaeError::InvalidIndexSet("span(A) does not match any set of eigenvectors".into())
    })?;
    let from = *idx.indices().last().expect("non-empty index set");
    let toward = *idx
        .complement(spec.n())
        .first()
        .ok_or(LaeError::NoEscape)?;
    if toward > from || spec.eigenvalues[toward] <= spec.eigenvalues[from] {
        return Err(LaeError::NoEscape);
    }
    let uf = spec.eigenvectors.column(from).into_owned();
    let ut = spec.eigenvectors.column(toward).into_owned();
    let (s, co) = step.sin_cos();
    let rotation = identity(spec.n())
        + (&uf * uf.adjoint() + &ut * ut.adjoint()).scale(co - 1.0)
        + (&ut * uf.adjoint() - &uf * ut.adjoint()).scale(s);
    let a_new = rotation * params.a();
    let b_new = solve_b_given_a(&a_new, cov)?;
    let moved = AutoencoderParams::new(a_new, b_new)?;
    let delta_e = error_of(&moved, cov)? - report.error_value;
    Ok(Escape {
        params: moved,
        delta_e,
        from,
        toward,
    })
}

/// Residuals of the conjugate-transposition identities for a pair whose `B`
/// is optimal for `A`.
#[derive(Debug, Clone)]
pub struct ConjugacyReport {
    /// `‖W − W*‖ / ‖W‖`.
    pub w_hermitian_residual: f64,
    /// `|E(A,B) − E(B*,A*)| / E(A,B)`.
    pub error_swap_residual: f64,
    /// `‖W' − W‖ / ‖W‖` for `A' = B*`, `B'` re-solved; NaN if `B` is rank deficient.
    pub resolved_swap_residual: f64,
}

impl ConjugacyReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.w_hermitian_residual <= tol
            && self.error_swap_residual <= tol
            && self.resolved_swap_residual <= tol
    }
}

pub fn conjugate_transpose_identity(
    params: &AutoencoderParams,
    cov: &CovarianceSet,
) -> Result<ConjugacyReport> {
    if !cov.is_auto_associative() {
        return Err(LaeError::NotAutoAssociative);
    }
    let w = params.w();
    let w_norm = fro(&w).max(TINY);
    let w_hermitian_residual = fro(&(&w - w.adjoint())) / w_norm;
    let e = error_of(params, cov)?;
    let swapped = params.conjugate_swapped()?;
    let e_swap = error_of(&swapped, cov)?;
    let error_swap_residual = (e - e_swap).abs() / e.max(TINY);
    let resolved_swap_residual = match solve_b_given_a(swapped.a(), cov) {
        Ok(b2) => fro(&(swapped.a() * b2 - &w)) / w_norm,
        Err(_) => f64::NAN,
    };
    Ok(ConjugacyReport {
        w_hermitian_residual,
        error_swap_residual,
        resolved_swap_residual,
    })
}

/// Bijection `(A, B) ↦ (DA, BC⁻¹)` between a problem and its transform with
/// inputs `Cx_t` and targets `Dy_t`.
#[derive(Debug, Clone)]
pub struct ParamMap {
    pub c_in: CMatrix,
    pub c_in_inv: CMatrix,
    pub d_out: CMatrix,
}

impl ParamMap {
    pub fn apply(&self, params: &AutoencoderParams) -> Result<AutoencoderParams> {
        AutoencoderParams::new(&self.d_out * params.a(), params.b() * &self.c_in_inv)
    }

    pub fn invert(&self, params: &AutoencoderParams) -> Result<AutoencoderParams> {
        AutoencoderParams::new(self.d_out.adjoint() * params.a(), params.b() * &self.c_in)
    }
}

/// Change of coordinates: inputs `x_t ↦ C x_t` (any invertible `C`), targets
/// `y_t ↦ D y_t` (unitary `D`).
pub fn transform_problem(
    d: &Dataset,
    c_in: &CMatrix,
    d_out: &CMatrix,
) -> Result<(Dataset, ParamMap)> {
    let n = d.n();
    for (name, m) in [("C", c_in), ("D", d_out)] {
        if m.shape() != (n, n) {
            return Err(LaeError::DimensionMismatch(format!(
                "{name} must be {n}x{n}, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    let unitary = linalg::unitary_residual(d_out);
    if unitary > 1e-10 {
        return Err(LaeError::NotUnitary(unitary));
    }
    let cond = linalg::condition_number(c_in);
    if !(cond <= linalg::SINGULAR_CONDITION) {
        return Err(LaeError::SingularGram(format!(
            "input change of basis C (condition number {cond:.3e})"
        )));
    }
    let c_in_inv = linalg::inverse(c_in, "C")?;
    let inputs = c_in * d.inputs();
    let targets = d_out * d.targets();
    let transformed = Dataset::from_columns(inputs, Some(targets))?;
    Ok((
        transformed,
        ParamMap {
            c_in: c_in.clone(),
            c_in_inv,
            d_out: d_out.clone(),
        },
    ))
}

/// Complex dimension of `{AB₁ + A₁B}` over all perturbations `(A₁, B₁)`,
/// i.e. the numerical rank of the differential of `(A, B) ↦ AB`.
pub fn tangent_span_dimension(params: &AutoencoderParams, tol: f64) -> usize {
    let (n, p) = (params.n(), params.p());
    let (a, b) = (params.a(), params.b());
    let mut span = CMatrix::zeros(n * n, 2 * n * p);
    let mut col = 0;
    let mut push = |m: CMatrix, span: &mut CMatrix| {
        for (k, z) in m.iter().enumerate() {
            span[(k, col)] = *z;
        }
        col += 1;
    };
    for i in 0..p {
        for j in 0..n {
            let mut b1 = CMatrix::zeros(p, n);
            b1[(i, j)] = c(1.0, 0.0);
            push(a * b1, &mut span);
        }
    }
    for i in 0..n {
        for j in 0..p {
            let mut a1 = CMatrix::zeros(n, p);
            a1[(i, j)] = c(1.0, 0.0);
            push(a1 * b, &mut span);
        }
    }
    linalg::numerical_rank(&span, tol)
}
