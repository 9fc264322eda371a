//! Closed-form solvers for one layer (or one deep stage) with the others held
//! fixed, the orthogonal projection primitive and the reconstruction error.
//!
//! Every inverse is a linear solve against a Hermitian positive-definite Gram
//! matrix. In the auto-associative case the optimal decoder-side solve
//! `B = (A*A)⁻¹A*` never touches the data.

use crate::covariance::{CovarianceSet, Dataset};
use crate::error::{LaeError, Result};
use crate::linalg::{
    self, ensure_full_rank, factor_condition, hermitize, right_solve_hpd, TINY, solve_hpd,
    CMatrix, RANK_TOL,
};

/// The pair `(A: n×p, B: p×n)` with global map `W = AB`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderParams {
    a: CMatrix,
    b: CMatrix,
    rank_tol: f64,
    a_full_rank: bool,
    b_full_rank: bool,
}

impl AutoencoderParams {
    pub fn new(a: CMatrix, b: CMatrix) -> Result<Self> {
        Self::with_tolerance(a, b, RANK_TOL)
    }

    pub fn with_tolerance(a: CMatrix, b: CMatrix, rank_tol: f64) -> Result<Self> {
        let (n, p) = a.shape();
        if b.shape() != (p, n) {
            return Err(LaeError::DimensionMismatch(format!(
                "A is {n}x{p} so B must be {p}x{n}, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if p == 0 || n == 0 {
            return Err(LaeError::Empty("hidden layer or input dimension is zero".into()));
        }
        if !linalg::is_finite(&a) || !linalg::is_finite(&b) {
            return Err(LaeError::NonFinite("autoencoder parameters".into()));
        }
        let a_full_rank = factor_condition(&a) * rank_tol < 1.0;
        let b_full_rank = factor_condition(&b) * rank_tol < 1.0;
        Ok(Self {
            a,
            b,
            rank_tol,
            a_full_rank,
            b_full_rank,
        })
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn b(&self) -> &CMatrix {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn p(&self) -> usize {
        self.a.ncols()
    }

    /// Global map `W = AB`.
    pub fn w(&self) -> CMatrix {
        &self.a * &self.b
    }

    pub fn a_full_rank(&self) -> bool {
        self.a_full_rank
    }

    pub fn b_full_rank(&self) -> bool {
        self.b_full_rank
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// `(B*, A*)`, the conjugate-transposed pair.
    pub fn conjugate_swapped(&self) -> Result<Self> {
        Self::with_tolerance(self.b.adjoint(), self.a.adjoint(), self.rank_tol)
    }

    pub fn into_parts(self) -> (CMatrix, CMatrix) {
        (self.a, self.b)
    }
}

fn check_square(n: usize, cov: &CovarianceSet, what: &str) -> Result<()> {
    if n != cov.n() {
        return Err(LaeError::DimensionMismatch(format!(
            "{what} has dimension {n} but the covariances are {}x{}",
            cov.n(),
            cov.n()
        )));
    }
    Ok(())
}

/// Unconstrained least squares `B = Σ_YX Σ_XX⁻¹` (an `n × n` matrix).
pub fn regression_solve(cov: &CovarianceSet) -> Result<CMatrix> {
    if !cov.xx_invertible {
        return Err(LaeError::SingularCovariance {
            condition: cov.condition_xx,
        });
    }
    cov.regression_map().cloned()
}

/// Orthogonal projection `P_A = A(A*A)⁻¹A*` onto the column span of `a`.
pub fn projection(a: &CMatrix, tol: f64) -> Result<CMatrix> {
    ensure_full_rank(a, tol, "projection basis A")?;
    let gram = a.adjoint() * a;
    let coef = solve_hpd(&gram, &a.adjoint(), "A*A")?;
    Ok(hermitize(&(a * coef)))
}

/// Optimal `B` for fixed full-rank `A`: `(A*A)⁻¹A*Σ_YXΣ_XX⁻¹`, or the data-free
/// `(A*A)⁻¹A*` when auto-associative.
pub fn solve_b_given_a(a: &CMatrix, cov: &CovarianceSet) -> Result<CMatrix> {
    check_square(a.nrows(), cov, "A")?;
    ensure_full_rank(a, RANK_TOL, "A")?;
    let gram = a.adjoint() * a;
    let pinv = solve_hpd(&gram, &a.adjoint(), "A*A")?;
    if cov.is_auto_associative() {
        Ok(pinv)
    } else {
        Ok(pinv * regression_solve(cov)?)
    }
}

/// Optimal `A` for fixed full-rank `B`: `Σ_YX B*(BΣ_XX B*)⁻¹`.
pub fn solve_a_given_b(b: &CMatrix, cov: &CovarianceSet) -> Result<CMatrix> {
    check_square(b.ncols(), cov, "B")?;
    ensure_full_rank(b, RANK_TOL, "B")?;
    let sxx_bt = &cov.sigma_xx * b.adjoint();
    let gram = b * &sxx_bt;
    let rhs = if cov.is_auto_associative() {
        sxx_bt
    } else {
        &cov.sigma_yx * b.adjoint()
    };
    right_solve_hpd(&rhs, &gram, "B Sigma_XX B*")
}

/// Product of a stage list; `None` for an empty list (identity).
fn chain(stages: &[CMatrix]) -> Result<Option<CMatrix>> {
    let mut it = stages.iter();
    let Some(first) = it.next() else { return Ok(None) };
    let mut acc = first.clone();
    for s in it {
        if acc.ncols() != s.nrows() {
            return Err(LaeError::DimensionMismatch(format!(
                "cannot chain a {}x{} stage after a {}x{} product",
                s.nrows(),
                s.ncols(),
                acc.nrows(),
                acc.ncols()
            )));
        }
        acc *= s;
    }
    Ok(Some(acc))
}

/// Optimal middle stage `C` of `W = L·C·R`, where `L` is the product of `left`
/// (output side) and `R` the product of `right` (input side):
/// `C = (L*L)⁻¹L*Σ_YX R*(RΣ_XX R*)⁻¹`. Empty lists act as identities.
pub fn deep_solve_middle(
    left: &[CMatrix],
    right: &[CMatrix],
    cov: &CovarianceSet,
) -> Result<CMatrix> {
    let n = cov.n();
    let l = chain(left)?;
    let r = chain(right)?;
    if let Some(l) = &l {
        check_square(l.nrows(), cov, "left product")?;
        ensure_full_rank(l, RANK_TOL, "left product L")?;
    }
    if let Some(r) = &r {
        check_square(r.ncols(), cov, "right product")?;
        ensure_full_rank(r, RANK_TOL, "right product R")?;
    }

    // Σ_YX R*(RΣ_XX R*)⁻¹, or Σ_YX Σ_XX⁻¹ when there is no right stage.
    let target_map = match &r {
        None => regression_solve(cov)?,
        Some(r) => {
            let sxx_rt = &cov.sigma_xx * r.adjoint();
            let gram = r * &sxx_rt;
            let rhs = if cov.is_auto_associative() {
                sxx_rt
            } else {
                &cov.sigma_yx * r.adjoint()
            };
            right_solve_hpd(&rhs, &gram, "R Sigma_XX R*")?
        }
    };
    let c = match &l {
        None => target_map,
        Some(l) => {
            let gram = l.adjoint() * l;
            solve_hpd(&gram, &(l.adjoint() * target_map), "L*L")?
        }
    };
    debug_assert_eq!(c.nrows(), l.as_ref().map_or(n, |l| l.ncols()));
    Ok(c)
}

/// Minimum-norm minimizer of `E` over the middle stage when `L` or `R` is
/// rank deficient, as happens for stages adjacent to a narrower bottleneck:
/// `C = (L*L)⁺L*Σ_YX R*(RΣ_XX R*)⁺`.
pub fn deep_solve_middle_lstsq(
    left: &[CMatrix],
    right: &[CMatrix],
    cov: &CovarianceSet,
) -> Result<CMatrix> {
    let l = chain(left)?;
    let r = chain(right)?;
    if let Some(l) = &l {
        check_square(l.nrows(), cov, "left product")?;
    }
    if let Some(r) = &r {
        check_square(r.ncols(), cov, "right product")?;
    }
    let pinv = |g: CMatrix, what: &str| {
        let g = hermitize(&g);
        let scale = g.norm().max(TINY);
        g.pseudo_inverse(RANK_TOL * scale)
            .map_err(|_| LaeError::SingularGram(what.to_string()))
    };
    let target_map = match &r {
        None => regression_solve(cov)?,
        Some(r) => {
            let rhs = &cov.sigma_yx * r.adjoint();
            rhs * pinv(r * &cov.sigma_xx * r.adjoint(), "R Sigma_XX R*")?
        }
    };
    Ok(match &l {
        None => target_map,
        Some(l) => pinv(l.adjoint() * l, "L*L")? * l.adjoint() * target_map,
    })
}

fn check_map(w: &CMatrix, n: usize) -> Result<()> {
    if w.shape() != (n, n) {
        return Err(LaeError::DimensionMismatch(format!(
            "W is {}x{}, expected {n}x{n}",
            w.nrows(),
            w.ncols()
        )));
    }
    Ok(())
}

/// `E(W) = Tr Σ_YY − 2 Re Tr(WΣ_XY) + Tr(WΣ_XX W*)`.
pub fn error_of_map(w: &CMatrix, cov: &CovarianceSet) -> Result<f64> {
    check_map(w, cov.n())?;
    let cross = (w * &cov.sigma_xy).trace().re;
    let quad = (w * &cov.sigma_xx * w.adjoint()).trace().re;
    Ok((cov.trace_yy() - 2.0 * cross + quad).max(0.0))
}

/// `E(A, B)` from the factored trace identity, `O(n²p)`:
/// `Tr Σ_YY − 2 Re Tr(BΣ_XY A) + Tr((A*A)(BΣ_XX B*))`.
pub fn error_of(params: &AutoencoderParams, cov: &CovarianceSet) -> Result<f64> {
    check_square(params.n(), cov, "parameters")?;
    let (a, b) = (params.a(), params.b());
    let cross = (b * &cov.sigma_xy * a).trace().re;
    let quad = ((a.adjoint() * a) * (b * &cov.sigma_xx * b.adjoint())).trace().re;
    Ok((cov.trace_yy() - 2.0 * cross + quad).max(0.0))
}

/// `Σ_t ‖y_t − W x_t‖²` through the trace identity on raw second moments.
/// No inversion is involved, so singular data is fine.
pub fn reconstruction_error(w: &CMatrix, d: &Dataset) -> Result<f64> {
    check_map(w, d.n())?;
    let x = d.inputs();
    let y = d.targets();
    let wx = w * x;
    let tr_yy: f64 = y.iter().map(|z| z.norm_sqr()).sum();
    let cross = (y.adjoint() * &wx).trace().re;
    let quad: f64 = wx.iter().map(|z| z.norm_sqr()).sum();
    Ok((tr_yy - 2.0 * cross + quad).max(0.0))
}

/// Per-sample loop `Σ_t ‖y_t − W x_t‖²`; the reference path.
pub fn reconstruction_error_loop(w: &CMatrix, d: &Dataset) -> Result<f64> {
    check_map(w, d.n())?;
    let (x, y) = (d.inputs(), d.targets());
    let mut total = 0.0;
    for t in 0..d.m() {
        let out = w * x.column(t);
        total += (y.column(t) - out).norm_squared();
    }
    Ok(total)
}

/// Relative residuals of the two stationarity equations
/// `A*ABΣ_XX = A*Σ_YX` and `ABΣ_XX B* = Σ_YX B*`.
pub fn stationarity_residuals(params: &AutoencoderParams, cov: &CovarianceSet) -> (f64, f64) {
    let (a, b) = (params.a(), params.b());
    let b_sxx = b * &cov.sigma_xx;
    let a_syx = a.adjoint() * &cov.sigma_yx;
    let lhs_b = (a.adjoint() * a) * &b_sxx;
    let syx_bt = &cov.sigma_yx * b.adjoint();
    let lhs_a = a * (&b_sxx * b.adjoint());
    (
        linalg::rel_residual(&lhs_b, &a_syx),
        linalg::rel_residual(&lhs_a, &syx_bt),
    )
}
