//! Dense complex matrix helpers shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{LaeError, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Default relative singular-value threshold for full-rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Condition number above which a matrix is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

pub const TINY: f64 = 1e-300;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Build a matrix from real row-major values.
pub fn real_matrix(rows: usize, cols: usize, values: &[f64]) -> CMatrix {
    assert_eq!(values.len(), rows * cols);
    CMatrix::from_fn(rows, cols, |i, j| c(values[i * cols + j], 0.0))
}

pub fn real_diag(values: &[f64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { c(values[i], 0.0) } else { c(0.0, 0.0) })
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// First `p` columns of the `n × n` identity.
pub fn leading_columns(n: usize, p: usize) -> CMatrix {
    CMatrix::from_fn(n, p, |i, j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) })
}

/// Frobenius (Hilbert-Schmidt) norm.
pub fn fro(m: &CMatrix) -> f64 {
    m.norm()
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.trace()
}

/// `‖lhs − rhs‖ / ‖rhs‖`, falling back to the absolute residual when `rhs` vanishes.
pub fn rel_residual(lhs: &CMatrix, rhs: &CMatrix) -> f64 {
    let diff = fro(&(lhs - rhs));
    let scale = fro(rhs).max(fro(lhs));
    if scale < TINY {
        diff
    } else {
        diff / scale
    }
}

pub fn hermitian_residual(m: &CMatrix) -> f64 {
    let norm = fro(m);
    if norm < TINY {
        return 0.0;
    }
    fro(&(m - m.adjoint())) / norm
}

/// `(M + M*) / 2`, Hermitian to the last bit.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Singular values sorted in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Ratio of smallest to largest singular value (0 for a zero matrix).
pub fn singular_ratio(m: &CMatrix) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&max), Some(&min)) if max > TINY => min / max,
        _ => 0.0,
    }
}

pub fn condition_number(m: &CMatrix) -> f64 {
    let r = singular_ratio(m);
    if r > 0.0 {
        1.0 / r
    } else {
        f64::INFINITY
    }
}

/// Numerical rank: singular values above `tol × σ_max`.
pub fn numerical_rank(m: &CMatrix, tol: f64) -> usize {
    let s = singular_values(m);
    let Some(&max) = s.first() else { return 0 };
    if max < TINY {
        return 0;
    }
    s.iter().filter(|&&v| v > tol * max).count()
}

/// Full column rank (tall) or full row rank (wide) at relative tolerance `tol`.
pub fn ensure_full_rank(m: &CMatrix, tol: f64, what: &str) -> Result<()> {
    let ratio = singular_ratio(m);
    if ratio > tol {
        Ok(())
    } else {
        Err(LaeError::RankDeficient {
            what: what.to_string(),
            ratio,
        })
    }
}

/// Condition number of a tall/wide factor from the eigenvalues of its small Gram matrix.
pub fn factor_condition(m: &CMatrix) -> f64 {
    let gram = if m.nrows() >= m.ncols() {
        m.adjoint() * m
    } else {
        m * m.adjoint()
    };
    let eig = hermitize(&gram).symmetric_eigenvalues();
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        (max / min).sqrt()
    }
}

/// Solve `G X = R` for Hermitian positive-definite `G`.
pub fn solve_hpd(gram: &CMatrix, rhs: &CMatrix, what: &str) -> Result<CMatrix> {
    let chol = hermitize(gram)
        .cholesky()
        .ok_or_else(|| LaeError::SingularGram(what.to_string()))?;
    let x = chol.solve(rhs);
    if is_finite(&x) {
        Ok(x)
    } else {
        Err(LaeError::SingularGram(what.to_string()))
    }
}

/// Solve `X G = R` for Hermitian positive-definite `G` (right division).
pub fn right_solve_hpd(rhs: &CMatrix, gram: &CMatrix, what: &str) -> Result<CMatrix> {
    // X G = R  <=>  G X* = R*  since G is Hermitian.
    Ok(solve_hpd(gram, &rhs.adjoint(), what)?.adjoint())
}

/// General square solve through LU.
pub fn solve_general(m: &CMatrix, rhs: &CMatrix, what: &str) -> Result<CMatrix> {
    let x = m
        .clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| LaeError::SingularGram(what.to_string()))?;
    if is_finite(&x) {
        Ok(x)
    } else {
        Err(LaeError::SingularGram(what.to_string()))
    }
}

pub fn inverse(m: &CMatrix, what: &str) -> Result<CMatrix> {
    solve_general(m, &identity(m.nrows()), what)
}

/// Orthonormal basis of the column span of a full-column-rank matrix.
pub fn orthonormal_columns(m: &CMatrix) -> CMatrix {
    m.clone().qr().q()
}

/// Independent complex standard normal entries (real and imaginary parts each N(0, 1)).
pub fn complex_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    // Column-major draw order; re then im for each entry.
    let mut m = CMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            m[(i, j)] = c(re, im);
        }
    }
    m
}

/// Real standard normal entries stored as complex numbers.
pub fn real_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            let re: f64 = rng.sample(StandardNormal);
            m[(i, j)] = c(re, 0.0);
        }
    }
    m
}

/// Random unitary matrix from the QR factorization of a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = complex_normal(n, n, rng);
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    // Fix column phases so the distribution does not depend on QR sign conventions.
    let mut q = q;
    for j in 0..n {
        let d = r[(j, j)];
        let mag = d.norm();
        if mag > TINY {
            let phase = d / mag;
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

pub fn unitary_residual(m: &CMatrix) -> f64 {
    fro(&(m.adjoint() * m - identity(m.ncols())))
}

/// Stack vectors as the columns of an `n × m` matrix.
pub fn columns_from_vectors(vectors: &[Vec<Complex64>]) -> CMatrix {
    let n = vectors.first().map_or(0, Vec::len);
    CMatrix::from_fn(n, vectors.len(), |i, j| vectors[j][i])
}
