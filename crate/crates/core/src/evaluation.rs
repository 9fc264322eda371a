//! Evaluators applied to trained or hand-built parameters.

use crate::error::{LaeError, Result};
use crate::linalg::{self, fro, identity, CMatrix, CVector, RANK_TOL, TINY};
use crate::solvers::{projection, AutoencoderParams};

/// `‖x − P_A x‖²`, the error on a single input once `B` is optimal for `A`.
pub fn generalization_error(a: &CMatrix, x: &CVector) -> Result<f64> {
    if x.len() != a.nrows() {
        return Err(LaeError::DimensionMismatch(format!(
            "A has {} rows but x has length {}",
            a.nrows(),
            x.len()
        )));
    }
    let pa = projection(a, RANK_TOL)?;
    Ok((x - pa * x).norm_squared())
}

/// `Wᵐx` by repeated multiplication.
pub fn recycle(w: &CMatrix, x: &CVector, m: usize) -> Result<CVector> {
    if !w.is_square() || w.ncols() != x.len() {
        return Err(LaeError::DimensionMismatch(format!(
            "W is {}x{} but x has length {}",
            w.nrows(),
            w.ncols(),
            x.len()
        )));
    }
    if m == 0 {
        return Err(LaeError::Config("recycle count must be at least 1".into()));
    }
    let mut out = x.clone();
    for _ in 0..m {
        out = w * out;
    }
    Ok(out)
}

/// `‖W² − W‖ / ‖W‖`.
pub fn idempotence_residual(w: &CMatrix) -> f64 {
    fro(&(w * w - w)) / fro(w).max(TINY)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverseReport {
    /// `‖(AB)² − AB‖ / ‖AB‖`.
    pub idempotence: f64,
    /// `‖BA − I_p‖`.
    pub left_inverse: f64,
    /// `‖B − (A*A)⁻¹A*‖ / ‖B‖`.
    pub pseudo_inverse: f64,
    pub is_projection: bool,
    /// Converse conclusions hold; `None` when `AB` is not a projection.
    pub converse_holds: Option<bool>,
}

/// If `AB` is idempotent with full-rank factors then `BA = I` and `B` is the
/// pseudo-inverse of `A`.
pub fn projection_converse_check(params: &AutoencoderParams) -> Result<ConverseReport> {
    if !(params.a_full_rank() && params.b_full_rank()) {
        return Err(LaeError::RankDeficient {
            what: "projection converse parameters".into(),
            ratio: linalg::singular_ratio(params.a()).min(linalg::singular_ratio(params.b())),
        });
    }
    let (a, b) = (params.a(), params.b());
    let idempotence = idempotence_residual(&params.w());
    let left_inverse = fro(&(b * a - identity(params.p())));
    let a_star = a.adjoint();
    let pinv = linalg::solve_hpd(&(&a_star * a), &a_star, "A*A")?;
    let pseudo_inverse = fro(&(b - pinv)) / fro(b).max(TINY);
    let is_projection = idempotence <= 1e-9;
    let converse_holds = is_projection.then(|| left_inverse <= 1e-8 && pseudo_inverse <= 1e-8);
    Ok(ConverseReport {
        idempotence,
        left_inverse,
        pseudo_inverse,
        is_projection,
        converse_holds,
    })
}

/// Factor a map of rank at most `p` as `W = AB` with `A = U_p Λ_p`, `B = V_p*`.
pub fn rank_p_factorize(w: &CMatrix, p: usize) -> Result<AutoencoderParams> {
    let (rows, cols) = w.shape();
    if p == 0 || p > rows.min(cols) {
        return Err(LaeError::Config(format!(
            "rank p={p} must lie in 1..={}",
            rows.min(cols)
        )));
    }
    let svd = w.clone().svd(true, true);
    let (u, vt) = (svd.u.expect("requested U"), svd.v_t.expect("requested V*"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s = |k: usize| svd.singular_values[order[k]];
    let max = s(0);
    if order.len() > p && max > TINY && s(p) > RANK_TOL * max {
        return Err(LaeError::RankExceeded {
            p,
            ratio: s(p) / max,
        });
    }
    let a = CMatrix::from_fn(rows, p, |i, k| u[(i, order[k])] * s(k));
    let b = CMatrix::from_fn(p, cols, |k, j| vt[(order[k], j)]);
    AutoencoderParams::new(a, b)
}

/// Orthonormal basis of `Ker B`, from right singular vectors whose singular
/// values fall below the rank tolerance (or beyond the row count).
pub fn null_space(b: &CMatrix) -> CMatrix {
    let (rows, cols) = b.shape();
    // Pad to square so the thin SVD returns a full set of right singular vectors.
    let mut padded = CMatrix::zeros(cols.max(rows), cols);
    padded.view_mut((0, 0), (rows, cols)).copy_from(b);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V*");
    let max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let kernel: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= RANK_TOL * max.max(TINY))
        .collect();
    CMatrix::from_fn(cols, kernel.len(), |i, k| vt[(kernel[k], i)].conj())
}
