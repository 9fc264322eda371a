//! Alternating learning schedules and their convergence monitoring.
//!
//! A schedule is a repeating pattern of exact coordinate steps: optimize one
//! layer with the other fixed, or replace a layer by the conjugate transpose of
//! the other. One iteration closes each time both `A` and `B` have been updated
//! since the previous iteration closed.

use std::fmt;
use std::time::{Duration, Instant};

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceSet;
use crate::error::{LaeError, Result};
use crate::linalg::{self, factor_condition, fro, solve_hpd, CMatrix, SINGULAR_CONDITION, TINY};
use crate::solvers::{
    deep_solve_middle, deep_solve_middle_lstsq, error_of, error_of_map, projection, solve_a_given_b, solve_b_given_a,
    stationarity_residuals, AutoencoderParams,
};

/// Iterations examined by the oscillation detector.
pub const OSCILLATION_WINDOW: usize = 50;
/// Largest `C(n, p)` for which distinct partial sums are verified up front.
const PARTIAL_SUM_CHECK_LIMIT: u128 = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepKind {
    /// `A ← Σ_YX B*(BΣ_XX B*)⁻¹`
    OptimizeAFromB,
    /// `B ← (A*A)⁻¹A*Σ_YXΣ_XX⁻¹`
    OptimizeBFromA,
    /// `A ← B*`
    TransposeAFromB,
    /// `B ← A*`
    TransposeBFromA,
    /// `(A, B) ← (B*, A*)`
    SwapBoth,
}

impl StepKind {
    pub fn is_optimization(self) -> bool {
        matches!(self, Self::OptimizeAFromB | Self::OptimizeBFromA)
    }

    fn updates_a(self) -> bool {
        matches!(self, Self::OptimizeAFromB | Self::TransposeAFromB | Self::SwapBoth)
    }

    fn updates_b(self) -> bool {
        matches!(self, Self::OptimizeBFromA | Self::TransposeBFromA | Self::SwapBoth)
    }

    fn symbol(self) -> &'static str {
        match self {
            Self::OptimizeAFromB => "B->A",
            Self::OptimizeBFromA => "A->B",
            Self::TransposeAFromB => "B=>A",
            Self::TransposeBFromA => "A=>B",
            Self::SwapBoth => "A<=>B",
        }
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A named repeating step pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub name: String,
    pub steps: Vec<StepKind>,
}

impl Schedule {
    pub fn new(name: impl Into<String>, steps: Vec<StepKind>) -> Result<Self> {
        if steps.is_empty() {
            return Err(LaeError::Config("schedule pattern is empty".into()));
        }
        Ok(Self {
            name: name.into(),
            steps,
        })
    }

    /// The seven published schedules, numbered 1 to 7.
    pub fn algorithm(k: u8) -> Result<Self> {
        use StepKind::*;
        let steps = match k {
            // B → A → B → A …
            1 => vec![OptimizeAFromB, OptimizeBFromA],
            // A → B → A → B …
            2 => vec![OptimizeBFromA, OptimizeAFromB],
            // B → A → B ⟹ A → B → A → B ⟹ A …
            3 => vec![OptimizeAFromB, OptimizeBFromA, TransposeAFromB, OptimizeBFromA],
            // A → B → A ⟹ B → A → B → A ⟹ B …
            4 => vec![OptimizeBFromA, OptimizeAFromB, TransposeBFromA, OptimizeAFromB],
            // B → A → B ⟺ B → A → B …
            5 => vec![OptimizeAFromB, OptimizeBFromA, SwapBoth],
            // A → B → A ⟺ A → B → A ⟺ …
            6 => vec![OptimizeBFromA, OptimizeAFromB, SwapBoth],
            // A ⟵ B ⟺ A ⟵ B ⟺ … (only B is ever optimized)
            7 => vec![OptimizeBFromA, SwapBoth],
            _ => {
                return Err(LaeError::Config(format!(
                    "algorithm must be between 1 and 7, got {k}"
                )))
            }
        };
        Self::new(format!("algorithm-{k}"), steps)
    }

    pub fn pattern(&self) -> String {
        self.steps.iter().join(" ")
    }
}

/// When to stop a run. Convergence needs both thresholds met on two
/// consecutive iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    /// Relative change of `E` between iterations.
    pub rel_error_tol: f64,
    /// Relative change of `A` and of `B` between iterations.
    pub param_change_tol: f64,
    pub max_iterations: usize,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            rel_error_tol: 1e-12,
            param_change_tol: 1e-10,
            max_iterations: 10_000,
        }
    }
}

impl StoppingRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_error_tol > 0.0 && self.param_change_tol > 0.0 && self.max_iterations > 0) {
            return Err(LaeError::Config(format!(
                "stopping thresholds must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminalStatus {
    Converged,
    MaxIterations,
    Diverged,
}

impl fmt::Display for TerminalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Converged => "Converged",
            Self::MaxIterations => "MaxIterations",
            Self::Diverged => "Diverged",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub kind: StepKind,
    pub error_before: f64,
    pub error_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// One-based iteration index.
    pub iteration: usize,
    pub error: f64,
    pub steps: Vec<StepKind>,
    pub residual_b: f64,
    pub residual_a: f64,
    /// `‖A − B*‖ / ‖A‖`.
    pub conjugacy_gap: f64,
    pub param_change: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingTrace {
    pub schedule: String,
    pub initial_error: f64,
    pub steps: Vec<StepRecord>,
    pub iterations: Vec<IterationRecord>,
    pub status: TerminalStatus,
    pub final_params: AutoencoderParams,
    /// First iteration at which `E` was seen oscillating over a full window.
    pub oscillation_detected_at: Option<usize>,
    /// Whether all `p`-subset eigenvalue sums are pairwise distinct; `None` when
    /// the check was skipped.
    pub partial_sums_distinct: Option<bool>,
    pub wall_time: Duration,
}

impl TrainingTrace {
    pub fn final_error(&self) -> f64 {
        self.iterations
            .last()
            .map_or(self.initial_error, |r| r.error)
    }

    /// First iteration whose error is within `rel` of `target`.
    pub fn iterations_to_reach(&self, target: f64, rel: f64) -> Option<usize> {
        self.iterations
            .iter()
            .find(|r| r.error <= target + rel * target.abs())
            .map(|r| r.iteration)
    }
}

pub(crate) fn conjugacy_gap(a: &CMatrix, b: &CMatrix) -> f64 {
    fro(&(a - b.adjoint())) / fro(a).max(TINY)
}

/// Random complex Gaussian `(A, B)` from a seeded ChaCha generator; `A` is drawn first.
pub fn init_random(n: usize, p: usize, seed: u64) -> Result<AutoencoderParams> {
    init_with(n, p, seed, linalg::complex_normal)
}

/// Like [`init_random`] with real Gaussian entries.
pub fn init_random_real(n: usize, p: usize, seed: u64) -> Result<AutoencoderParams> {
    init_with(n, p, seed, linalg::real_normal)
}

fn init_with(
    n: usize,
    p: usize,
    seed: u64,
    draw: fn(usize, usize, &mut ChaCha8Rng) -> CMatrix,
) -> Result<AutoencoderParams> {
    if !(0 < p && p < n) {
        return Err(LaeError::Config(format!("need 0 < p < n, got n={n}, p={p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = draw(n, p, &mut rng);
    let b = draw(p, n, &mut rng);
    let params = AutoencoderParams::new(a, b)?;
    if !(params.a_full_rank() && params.b_full_rank()) {
        return Err(LaeError::RankDeficient {
            what: format!("random initialization (seed {seed})"),
            ratio: 0.0,
        });
    }
    Ok(params)
}

fn check_partial_sums(cov: &CovarianceSet, p: usize) -> Result<Option<bool>> {
    if !cov.is_auto_associative() {
        return Ok(None);
    }
    let n = cov.n();
    let count = (0..p).fold(1u128, |acc, k| acc * (n - k) as u128 / (k + 1) as u128);
    if count > PARTIAL_SUM_CHECK_LIMIT {
        log::warn!("skipping distinct partial-sum check: C({n},{p}) = {count}");
        return Ok(None);
    }
    let spec = cov.spectrum()?;
    let scale = spec.eigenvalues.iter().map(|v| v.abs()).sum::<f64>().max(TINY);
    let mut sums: Vec<f64> = (0..n)
        .combinations(p)
        .map(|idx| idx.iter().map(|&i| spec.eigenvalues[i]).sum())
        .collect();
    sums.sort_by(f64::total_cmp);
    let distinct = sums.windows(2).all(|w| w[1] - w[0] > 1e-10 * scale);
    if !distinct {
        log::warn!("eigenvalue partial sums are not pairwise distinct; convergence to a single critical point is not guaranteed");
    }
    Ok(Some(distinct))
}

fn rank_collapse(iteration: usize, which: &'static str, m: &CMatrix) -> Option<LaeError> {
    let condition = factor_condition(m);
    (!(condition <= SINGULAR_CONDITION)).then_some(LaeError::RankCollapse {
        iteration,
        which,
        condition,
    })
}

fn relative_change(new: &CMatrix, old: &CMatrix) -> f64 {
    fro(&(new - old)) / fro(old).max(TINY)
}

/// Detects sustained oscillation of `E` across the last window of iterations.
fn oscillating(errors: &[f64]) -> bool {
    if errors.len() < OSCILLATION_WINDOW {
        return false;
    }
    let window = &errors[errors.len() - OSCILLATION_WINDOW..];
    let max = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = window.iter().copied().fold(f64::INFINITY, f64::min);
    let diffs: Vec<f64> = window.windows(2).map(|w| w[1] - w[0]).collect();
    let sign_changes = diffs
        .windows(2)
        .filter(|d| d[0] * d[1] < 0.0)
        .count();
    max - min > 1e-9 * max.abs().max(TINY) && sign_changes >= OSCILLATION_WINDOW / 5
}

/// Execute a schedule from `init` until the stopping rule fires.
pub fn run_schedule(
    init: &AutoencoderParams,
    sched: &Schedule,
    cov: &CovarianceSet,
    stop: &StoppingRule,
) -> Result<TrainingTrace> {
    stop.validate()?;
    if !cov.xx_invertible {
        return Err(LaeError::SingularCovariance {
            condition: cov.condition_xx,
        });
    }
    if init.n() != cov.n() {
        return Err(LaeError::DimensionMismatch(format!(
            "initial parameters have n={} but covariances have n={}",
            init.n(),
            cov.n()
        )));
    }
    if !(init.a_full_rank() && init.b_full_rank()) {
        return Err(LaeError::RankDeficient {
            what: "initial parameters".into(),
            ratio: 0.0,
        });
    }
    let partial_sums_distinct = check_partial_sums(cov, init.p())?;
    let started = Instant::now();

    let mut a = init.a().clone();
    let mut b = init.b().clone();
    let initial_error = error_of(init, cov)?;
    let mut error = initial_error;
    let mut steps = Vec::new();
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut errors_by_iteration = Vec::new();
    let mut oscillation_detected_at = None;

    let (mut last_a, mut last_b, mut last_error) = (a.clone(), b.clone(), error);
    let (mut a_dirty, mut b_dirty) = (false, false);
    let mut pending: Vec<StepKind> = Vec::new();
    let mut streak = 0;
    let mut status = TerminalStatus::MaxIterations;

    'run: for &kind in sched.steps.iter().cycle() {
        let iteration = iterations.len() + 1;
        let collapse = |e: LaeError| match e {
            LaeError::RankDeficient { .. } | LaeError::SingularGram(_) => LaeError::RankCollapse {
                iteration,
                which: if kind.updates_a() { "B" } else { "A" },
                condition: f64::INFINITY,
            },
            other => other,
        };
        match kind {
            StepKind::OptimizeAFromB => a = solve_a_given_b(&b, cov).map_err(collapse)?,
            StepKind::OptimizeBFromA => b = solve_b_given_a(&a, cov).map_err(collapse)?,
            StepKind::TransposeAFromB => a = b.adjoint(),
            StepKind::TransposeBFromA => b = a.adjoint(),
            StepKind::SwapBoth => {
                let new_a = b.adjoint();
                b = a.adjoint();
                a = new_a;
            }
        }
        if kind.updates_a() {
            if let Some(e) = rank_collapse(iteration, "A", &a) {
                return Err(e);
            }
        }
        if kind.updates_b() {
            if let Some(e) = rank_collapse(iteration, "B", &b) {
                return Err(e);
            }
        }
        let params = AutoencoderParams::new(a.clone(), b.clone())?;
        let error_after = error_of(&params, cov)?;
        steps.push(StepRecord {
            kind,
            error_before: error,
            error_after,
        });
        error = error_after;
        pending.push(kind);
        a_dirty |= kind.updates_a();
        b_dirty |= kind.updates_b();
        if !error.is_finite() {
            status = TerminalStatus::Diverged;
            break;
        }
        if !(a_dirty && b_dirty) {
            continue;
        }

        let (residual_b, residual_a) = stationarity_residuals(&params, cov);
        let param_change = relative_change(&a, &last_a).max(relative_change(&b, &last_b));
        let rel_de = (error - last_error).abs() / last_error.abs().max(TINY);
        iterations.push(IterationRecord {
            iteration,
            error,
            steps: std::mem::take(&mut pending),
            residual_b,
            residual_a,
            conjugacy_gap: conjugacy_gap(&a, &b),
            param_change,
        });
        errors_by_iteration.push(error);
        if oscillation_detected_at.is_none() && oscillating(&errors_by_iteration) {
            log::warn!("{}: error oscillates at iteration {iteration}", sched.name);
            oscillation_detected_at = Some(iteration);
        }
        let settled = (rel_de <= stop.rel_error_tol || error == 0.0) && param_change <= stop.param_change_tol;
        streak = if settled { streak + 1 } else { 0 };
        if streak >= 2 {
            status = TerminalStatus::Converged;
            break 'run;
        }
        if iteration >= stop.max_iterations {
            break 'run;
        }
        last_a = a.clone();
        last_b = b.clone();
        last_error = error;
        a_dirty = false;
        b_dirty = false;
    }

    Ok(TrainingTrace {
        schedule: sched.name.clone(),
        initial_error,
        steps,
        iterations,
        status,
        final_params: AutoencoderParams::new(a, b)?,
        oscillation_detected_at,
        partial_sums_distinct,
        wall_time: started.elapsed(),
    })
}

/// True iff no optimization step increased `E` by more than `1e-12·E`.
pub fn em_descent_check(trace: &TrainingTrace) -> bool {
    trace
        .steps
        .iter()
        .filter(|s| s.kind.is_optimization())
        .all(|s| s.error_after <= s.error_before + 1e-12 * s.error_before.abs())
}

/// One composed auto-associative update on `B`:
/// `B⁺ = (BΣB*)(BΣ²B*)⁻¹BΣ`.
pub fn power_step_b(b: &CMatrix, sigma: &CMatrix) -> Result<CMatrix> {
    if b.ncols() != sigma.nrows() || !sigma.is_square() {
        return Err(LaeError::DimensionMismatch(format!(
            "B is {}x{} but Sigma is {}x{}",
            b.nrows(),
            b.ncols(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let bs = b * sigma;
    let g1 = &bs * b.adjoint();
    let g2 = &bs * bs.adjoint();
    Ok(g1 * solve_hpd(&g2, &bs, "B Sigma^2 B*")?)
}

/// `‖power_step_b(B) − B·P_V‖ / ‖B‖` with `V` the row space of `BΣ`.
pub fn power_step_projection_residual(b: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    let next = power_step_b(b, sigma)?;
    let pv = projection(&(b * sigma).adjoint(), linalg::RANK_TOL)?;
    Ok(fro(&(next - b * pv)) / fro(b).max(TINY))
}

/// Residual between the two-step update `solve_b_given_a(solve_a_given_b(B))`
/// and [`power_step_b`].
pub fn composed_update_check(params: &AutoencoderParams, cov: &CovarianceSet) -> Result<f64> {
    if !cov.is_auto_associative() {
        return Err(LaeError::NotAutoAssociative);
    }
    let b = params.b();
    let a1 = solve_a_given_b(b, cov)?;
    let b1 = solve_b_given_a(&a1, cov)?;
    let direct = power_step_b(b, &cov.sigma)?;
    Ok(fro(&(b1 - direct)) / fro(b).max(TINY))
}

/// A deep linear network `W = M_1 M_2 … M_k`, stored output side first.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepParams {
    pub stages: Vec<CMatrix>,
}

impl DeepParams {
    /// Random complex Gaussian stages for layer sizes listed input to output,
    /// e.g. `[10, 5, 3, 5, 10]`.
    pub fn random(layers: &[usize], seed: u64) -> Result<Self> {
        if layers.len() < 2 || layers.iter().any(|&l| l == 0) {
            return Err(LaeError::Config(format!(
                "layer sizes must be positive with at least two layers: {layers:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut stages: Vec<CMatrix> = layers
            .windows(2)
            .map(|w| linalg::complex_normal(w[1], w[0], &mut rng))
            .collect();
        stages.reverse();
        Ok(Self { stages })
    }

    pub fn w(&self) -> CMatrix {
        let mut it = self.stages.iter();
        let first = it.next().expect("at least one stage").clone();
        it.fold(first, |acc, s| acc * s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepIterationRecord {
    pub iteration: usize,
    pub error: f64,
    pub param_change: f64,
}

#[derive(Debug, Clone)]
pub struct DeepTrace {
    pub initial_error: f64,
    /// `E` after every single stage solve, for descent checks.
    pub stage_errors: Vec<f64>,
    pub iterations: Vec<DeepIterationRecord>,
    pub status: TerminalStatus,
    pub final_params: DeepParams,
}

impl DeepTrace {
    pub fn final_error(&self) -> f64 {
        self.iterations
            .last()
            .map_or(self.initial_error, |r| r.error)
    }
}

/// Cyclic stage descent: each iteration re-solves every stage in turn, output
/// side first, with all others fixed.
pub fn run_deep(init: &DeepParams, cov: &CovarianceSet, stop: &StoppingRule) -> Result<DeepTrace> {
    stop.validate()?;
    let mut stages = init.stages.clone();
    let initial_error = error_of_map(&init.w(), cov)?;
    let mut last_error = initial_error;
    let mut stage_errors = Vec::new();
    let mut iterations = Vec::new();
    let mut streak = 0;
    let mut status = TerminalStatus::MaxIterations;
    for iteration in 1..=stop.max_iterations {
        let before = stages.clone();
        for i in 0..stages.len() {
            let (left, right) = (&stages[..i], &stages[i + 1..]);
            let solved = match deep_solve_middle(left, right, cov) {
                // Stages next to a narrower layer see a rank-deficient neighbor product.
                Err(LaeError::RankDeficient { .. }) => deep_solve_middle_lstsq(left, right, cov),
                other => other,
            }
            .map_err(|e| match e {
                LaeError::SingularGram(_) => LaeError::RankCollapse {
                    iteration,
                    which: "deep stage",
                    condition: f64::INFINITY,
                },
                other => other,
            })?;
            stages[i] = solved;
            let current = DeepParams { stages: stages.clone() };
            stage_errors.push(error_of_map(&current.w(), cov)?);
        }
        let error = *stage_errors.last().expect("at least one stage");
        if !error.is_finite() {
            status = TerminalStatus::Diverged;
            break;
        }
        let param_change = stages
            .iter()
            .zip(&before)
            .map(|(s, o)| relative_change(s, o))
            .fold(0.0, f64::max);
        iterations.push(DeepIterationRecord {
            iteration,
            error,
            param_change,
        });
        let rel_de = (error - last_error).abs() / last_error.abs().max(TINY);
        let settled = rel_de <= stop.rel_error_tol && param_change <= stop.param_change_tol;
        streak = if settled { streak + 1 } else { 0 };
        last_error = error;
        if streak >= 2 {
            status = TerminalStatus::Converged;
            break;
        }
    }
    Ok(DeepTrace {
        initial_error,
        stage_errors,
        iterations,
        status,
        final_params: DeepParams { stages },
    })
}
