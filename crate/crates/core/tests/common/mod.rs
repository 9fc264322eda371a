//! Test-side oracles that share no code with the library's numerics.
#![allow(dead_code)]

use lae_core::linalg::{c, CMatrix};
use lae_core::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cyclic Jacobi on a dense real symmetric matrix stored row-major.
/// Returns eigenvalues and the eigenvector matrix (columns), unsorted.
pub fn jacobi_symmetric(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        let total: f64 = a.iter().map(|x| x * x).sum();
        if off <= 1e-30 * total.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = cs * akp - sn * akq;
                    a[k * n + q] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = cs * apk - sn * aqk;
                    a[q * n + k] = sn * apk + cs * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = cs * vkp - sn * vkq;
                    v[k * n + q] = sn * vkp + cs * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// Real embedding `[[Re H, −Im H], [Im H, Re H]]` of a Hermitian matrix.
fn real_embedding(h: &CMatrix) -> Vec<f64> {
    let n = h.nrows();
    let m = 2 * n;
    let mut out = vec![0.0; m * m];
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            out[i * m + j] = z.re;
            out[i * m + n + j] = -z.im;
            out[(n + i) * m + j] = z.im;
            out[(n + i) * m + n + j] = z.re;
        }
    }
    out
}

/// Eigenvalues of a Hermitian matrix, descending. Each eigenvalue appears
/// twice in the real embedding; one of each pair is kept.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let n = h.nrows();
    let (mut vals, _) = jacobi_symmetric(real_embedding(h), 2 * n);
    vals.sort_by(|a, b| b.total_cmp(a));
    vals.into_iter().step_by(2).collect()
}

/// Orthogonal projector onto the top-`p` eigenspace of a Hermitian matrix.
pub fn top_projection(h: &CMatrix, p: usize) -> CMatrix {
    let n = h.nrows();
    let m = 2 * n;
    let (vals, vecs) = jacobi_symmetric(real_embedding(h), m);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    let top = &order[..2 * p];
    // Real projector Q Qᵀ onto the doubled eigenspace; its blocks give P.
    let real_proj = |r: usize, s: usize| -> f64 { top.iter().map(|&k| vecs[r * m + k] * vecs[s * m + k]).sum() };
    CMatrix::from_fn(n, n, |i, j| c(real_proj(i, j), real_proj(n + i, j)))
}

/// Frobenius norm computed entrywise.
pub fn frob(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Naive `Σ_t u_t v_t*`.
pub fn outer_sum(u: &CMatrix, v: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(u.nrows(), v.nrows());
    for t in 0..u.ncols() {
        for i in 0..u.nrows() {
            for j in 0..v.nrows() {
                out[(i, j)] += u[(i, t)] * v[(j, t)].conj();
            }
        }
    }
    out
}

pub fn random_matrix(rows: usize, cols: usize, real: bool, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.random_range(-1.0..1.0);
        let im: f64 = if real { 0.0 } else { rng.random_range(-1.0..1.0) };
        c(re, im)
    })
}

pub fn random_dataset(n: usize, m: usize, real: bool, hetero: bool, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_matrix(n, m, real, &mut rng);
    let y = hetero.then(|| random_matrix(n, m, real, &mut rng));
    Dataset::from_columns(x, y).unwrap()
}

/// Column-major matrix product written out by hand.
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.nrows());
    CMatrix::from_fn(a.nrows(), b.ncols(), |i, j| (0..a.ncols()).map(|k| a[(i, k)] * b[(k, j)]).sum())
}

pub fn rel_err(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.abs().max(y.abs()).max(1e-300)
}
