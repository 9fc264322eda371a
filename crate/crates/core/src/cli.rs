//! The `lae` command line: `train`, `landscape`, `verify` and `factorize`.

use std::fmt::Write as _;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::covariance::{CovarianceSet, Dataset};
use crate::error::{LaeError, Result};
use crate::evaluation::{idempotence_residual, projection_converse_check, rank_p_factorize, recycle};
use crate::io::config::ExperimentConfig;
use crate::io::tabular::{fmt_f64, load_matrix_csv, save_matrix_csv};
use crate::io::write_atomic;
use crate::landscape::{
    build_critical_point, conjugate_transpose_identity, enumerate_critical_values, is_critical,
    saddle_escape, transform_problem,
};
use crate::linalg::{self, fro, hermitian_residual, identity, CMatrix};
use crate::solvers::{error_of, solve_b_given_a, AutoencoderParams};
use crate::training::{
    em_descent_check, init_random, run_deep, run_schedule, DeepParams, DeepTrace, TerminalStatus,
    TrainingTrace,
};
use crate::covariance::compute_covariances;

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_MAX_ITERATIONS: u8 = 2;
pub const EXIT_VERIFY_FAILED: u8 = 3;

pub const CURVES_HEADER: &str = "iteration,error,conjugacy_gap,residual_b,residual_a";

#[derive(Debug, Parser)]
#[command(name = "lae", version, about = "Linear autoencoders: training, landscape and checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a training schedule and write curves.csv and summary.txt.
    Train {
        #[command(flatten)]
        opts: Overrides,
        /// Additional seeds, run in parallel into out/seed-<s>/.
        #[arg(long, value_delimiter = ',')]
        sweep: Vec<u64>,
    },
    /// Enumerate critical values with saddle escapes into landscape.txt.
    Landscape {
        #[command(flatten)]
        opts: Overrides,
        /// Rotation angle of the escape probe.
        #[arg(long, default_value_t = 1e-2)]
        step: f64,
    },
    /// Run the invariant suite on the configured instance.
    Verify {
        #[command(flatten)]
        opts: Overrides,
    },
    /// Factor a matrix of rank at most p as A·B.
    Factorize {
        #[command(flatten)]
        opts: Overrides,
        /// Matrix CSV with a `c<k>_re,c<k>_im` header, one row per line.
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML experiment config; defaults to diag(5,4,3,2,1) with p = 2.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=7))]
    pub algorithm: Option<u8>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub center: bool,
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long)]
    pub digit: Option<u8>,
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(a) = self.algorithm {
            cfg.algorithm = a;
        }
        if let Some(p) = self.p {
            cfg.p = p;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = self.max_iter {
            cfg.stopping.max_iterations = Some(m);
        }
        cfg.center |= self.center;
        if let Some(r) = self.ridge {
            cfg.ridge = r;
        }
        if self.digit.is_some() || self.cap.is_some() {
            let idx = cfg.dataset.idx.as_mut().ok_or_else(|| {
                LaeError::Config("--digit and --cap apply only to an idx dataset".into())
            })?;
            idx.digit = self.digit.or(idx.digit);
            idx.cap = self.cap.or(idx.cap);
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Execute a parsed command and return the process exit code.
pub fn run(cli: Cli) -> u8 {
    let outcome = match cli.command {
        Command::Train { opts, sweep } => opts.resolve().and_then(|cfg| cmd_train(&cfg, &sweep)),
        Command::Landscape { opts, step } => opts.resolve().and_then(|cfg| cmd_landscape(&cfg, step)),
        Command::Verify { opts } => opts.resolve().and_then(|cfg| cmd_verify(&cfg)),
        Command::Factorize { opts, input } => opts.resolve().and_then(|cfg| cmd_factorize(&cfg, &input)),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_ERROR
    })
}

fn color_enabled() -> bool {
    std::env::var_os("NO_COLOR").is_none() && std::io::stdout().is_terminal()
}

fn paint(text: &str, code: &str) -> String {
    if color_enabled() {
        format!("\x1b[{code}m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

fn status_code(status: TerminalStatus) -> u8 {
    match status {
        TerminalStatus::Converged => EXIT_OK,
        TerminalStatus::MaxIterations => EXIT_MAX_ITERATIONS,
        TerminalStatus::Diverged => EXIT_ERROR,
    }
}

/// `Tr Σ_YY − Σ` of the top `p` eigenvalues of `Σ`.
pub fn error_floor(cov: &CovarianceSet, p: usize) -> Result<f64> {
    let spec = cov.spectrum()?;
    Ok(cov.trace_yy() - spec.eigenvalues.iter().take(p).sum::<f64>())
}

pub fn curves_csv(trace: &TrainingTrace) -> String {
    let mut out = format!("{CURVES_HEADER}\n");
    for r in &trace.iterations {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.iteration,
            fmt_f64(r.error),
            fmt_f64(r.conjugacy_gap),
            fmt_f64(r.residual_b),
            fmt_f64(r.residual_a)
        );
    }
    out
}

fn deep_curves_csv(trace: &DeepTrace) -> String {
    let mut out = String::from("iteration,error,param_change\n");
    for r in &trace.iterations {
        let _ = writeln!(out, "{},{},{}", r.iteration, fmt_f64(r.error), fmt_f64(r.param_change));
    }
    out
}

fn summary_line(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key} = {value}");
}

fn train_one(cfg: &ExperimentConfig, data: &Dataset, cov: &CovarianceSet, seed: u64, dir: &Path) -> Result<TerminalStatus> {
    let sched = cfg.schedule()?;
    let init = init_random(cov.n(), cfg.p, seed)?;
    let trace = run_schedule(&init, &sched, cov, &cfg.stopping_rule())?;
    let floor = error_floor(cov, cfg.p)?;
    let report = is_critical(&trace.final_params, cov, 1e-8)?;
    let last = trace.iterations.last();

    let mut s = String::new();
    summary_line(&mut s, "schedule", &sched.name);
    summary_line(&mut s, "pattern", sched.pattern());
    summary_line(&mut s, "seed", seed);
    summary_line(&mut s, "n", cov.n());
    summary_line(&mut s, "p", cfg.p);
    summary_line(&mut s, "m", data.m());
    summary_line(&mut s, "status", trace.status);
    summary_line(&mut s, "iterations", trace.iterations.len());
    summary_line(&mut s, "final_error", fmt_f64(trace.final_error()));
    summary_line(&mut s, "floor", fmt_f64(floor));
    summary_line(&mut s, "excess", fmt_f64(trace.final_error() - floor));
    summary_line(
        &mut s,
        "index_set",
        report.classified_index_set.map_or("none".to_string(), |i| i.to_string()),
    );
    summary_line(&mut s, "conjugacy_gap", fmt_f64(last.map_or(f64::NAN, |r| r.conjugacy_gap)));
    summary_line(&mut s, "em_descent", em_descent_check(&trace));
    summary_line(
        &mut s,
        "oscillation_detected_at",
        trace.oscillation_detected_at.map_or("none".to_string(), |i| i.to_string()),
    );
    summary_line(
        &mut s,
        "partial_sums_distinct",
        trace.partial_sums_distinct.map_or("unchecked".to_string(), |b| b.to_string()),
    );
    summary_line(&mut s, "wall_time_s", format!("{:.3}", trace.wall_time.as_secs_f64()));

    write_atomic(&dir.join("curves.csv"), curves_csv(&trace).as_bytes())?;
    write_atomic(&dir.join("summary.txt"), s.as_bytes())?;
    print!("{s}");
    Ok(trace.status)
}

fn train_deep(cfg: &ExperimentConfig, layers: &[usize], cov: &CovarianceSet) -> Result<u8> {
    let init = DeepParams::random(layers, cfg.seed)?;
    let trace = run_deep(&init, cov, &cfg.stopping_rule())?;
    let width = *layers.iter().min().expect("validated layers");
    let floor = error_floor(cov, width)?;
    let mut s = String::new();
    summary_line(&mut s, "layers", layers.iter().map(usize::to_string).collect::<Vec<_>>().join("-"));
    summary_line(&mut s, "seed", cfg.seed);
    summary_line(&mut s, "status", trace.status);
    summary_line(&mut s, "iterations", trace.iterations.len());
    summary_line(&mut s, "final_error", fmt_f64(trace.final_error()));
    summary_line(&mut s, "floor", fmt_f64(floor));
    summary_line(&mut s, "excess", fmt_f64(trace.final_error() - floor));
    write_atomic(&cfg.out.join("curves.csv"), deep_curves_csv(&trace).as_bytes())?;
    write_atomic(&cfg.out.join("summary.txt"), s.as_bytes())?;
    print!("{s}");
    Ok(status_code(trace.status))
}

pub fn cmd_train(cfg: &ExperimentConfig, sweep: &[u64]) -> Result<u8> {
    let data = cfg.load_dataset()?;
    let cov = cfg.covariances(&data)?;
    if let Some(layers) = &cfg.layers {
        return train_deep(cfg, layers, &cov);
    }
    let mut seeds = cfg.sweep.clone();
    seeds.extend_from_slice(sweep);
    if seeds.is_empty() {
        return Ok(status_code(train_one(cfg, &data, &cov, cfg.seed, &cfg.out)?));
    }
    seeds.insert(0, cfg.seed);
    seeds.dedup();
    let statuses = seeds
        .par_iter()
        .map(|&seed| train_one(cfg, &data, &cov, seed, &cfg.out.join(format!("seed-{seed}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(statuses.into_iter().map(status_code).max().unwrap_or(EXIT_OK))
}

/// One line per index set in ascending `E`, fields in a fixed order.
pub fn landscape_report(cov: &CovarianceSet, p: usize, step: f64) -> Result<String> {
    let spec = cov.spectrum()?;
    let mut out = String::new();
    for (idx, e) in enumerate_critical_values(spec, p, cov)? {
        let _ = write!(out, "index_set={idx} error={}", fmt_f64(e));
        if idx.is_top() {
            out.push_str(" kind=minimum\n");
            continue;
        }
        out.push_str(" kind=saddle");
        let escape = build_critical_point(spec, &idx, &identity(p), cov)
            .and_then(|params| saddle_escape(&params, spec, cov, step));
        match escape {
            Ok(esc) => {
                let _ = writeln!(
                    out,
                    " escape_delta={} escape_from={} escape_toward={}",
                    fmt_f64(esc.delta_e),
                    esc.from + 1,
                    esc.toward + 1
                );
            }
            Err(e) => {
                log::warn!("no escape from {idx}: {e}");
                out.push_str(" escape_delta=nan\n");
            }
        }
    }
    Ok(out)
}

pub fn cmd_landscape(cfg: &ExperimentConfig, step: f64) -> Result<u8> {
    let data = cfg.load_dataset()?;
    let cov = cfg.covariances(&data)?;
    let report = landscape_report(&cov, cfg.p, step)?;
    write_atomic(&cfg.out.join("landscape.txt"), report.as_bytes())?;
    print!("{report}");
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckOutcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

impl CheckOutcome {
    fn from_bool(ok: bool, detail: String) -> Self {
        if ok {
            Self::Pass(detail)
        } else {
            Self::Fail(detail)
        }
    }

    pub fn passed(&self) -> bool {
        !matches!(self, Self::Fail(_))
    }
}

fn rel_diff(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.abs().max(y.abs()).max(linalg::TINY)
}

fn check_group_invariance(cfg: &ExperimentConfig, data: &Dataset, cov: &CovarianceSet) -> Result<CheckOutcome> {
    let n = cov.n();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let params = init_random(n, cfg.p, cfg.seed.wrapping_add(1))?;
    let e = error_of(&params, cov)?;
    let cmat = linalg::complex_normal(cfg.p, cfg.p, &mut rng);
    let cinv = linalg::inverse(&cmat, "C")?;
    let hidden = AutoencoderParams::new(params.a() * &cmat, cinv * params.b())?;
    let hidden_res = rel_diff(e, error_of(&hidden, cov)?);

    let c_in = linalg::complex_normal(n, n, &mut rng);
    let d_out = linalg::random_unitary(n, &mut rng);
    let (moved, map) = transform_problem(data, &c_in, &d_out)?;
    let moved_cov = compute_covariances(&moved, cfg.ridge)?;
    let moved_res = rel_diff(e, error_of(&map.apply(&params)?, &moved_cov)?);
    Ok(CheckOutcome::from_bool(
        hidden_res <= 1e-10 && moved_res <= 1e-10,
        format!("hidden={hidden_res:.2e} data={moved_res:.2e}"),
    ))
}

fn check_conjugacy(cfg: &ExperimentConfig, cov: &CovarianceSet) -> Result<CheckOutcome> {
    if !cov.is_auto_associative() {
        return Ok(CheckOutcome::Skip("hetero-associative data".into()));
    }
    let a = init_random(cov.n(), cfg.p, cfg.seed.wrapping_add(2))?.a().clone();
    let b = solve_b_given_a(&a, cov)?;
    let report = conjugate_transpose_identity(&AutoencoderParams::new(a, b)?, cov)?;
    Ok(CheckOutcome::from_bool(
        report.passes(1e-9),
        format!(
            "hermitian={:.2e} swap={:.2e}",
            report.w_hermitian_residual, report.error_swap_residual
        ),
    ))
}

/// Recycling and converse checks on the point training reached.
fn check_projection(trained: &AutoencoderParams, cov: &CovarianceSet, x: &CMatrix) -> Result<(CheckOutcome, CheckOutcome)> {
    if !cov.is_auto_associative() {
        let skip = CheckOutcome::Skip("hetero-associative data".into());
        return Ok((skip.clone(), skip));
    }
    let w = trained.w();
    let idem = idempotence_residual(&w);
    let mut worst: f64 = 0.0;
    for t in 0..x.ncols().min(8) {
        let v = x.column(t).into_owned();
        let once = recycle(&w, &v, 1)?;
        for m in [2, 3, 5, 10] {
            let diff = (recycle(&w, &v, m)? - &once).norm() / once.norm().max(linalg::TINY);
            worst = worst.max(diff);
        }
    }
    let recycling = CheckOutcome::from_bool(
        idem <= 1e-8 && worst <= 1e-8,
        format!("idempotence={idem:.2e} recycle={worst:.2e}"),
    );
    let report = projection_converse_check(trained)?;
    let converse = match report.converse_holds {
        Some(ok) => CheckOutcome::from_bool(
            ok,
            format!("BA-I={:.2e} pinv={:.2e}", report.left_inverse, report.pseudo_inverse),
        ),
        None => CheckOutcome::Fail(format!("W is not a projection ({:.2e})", report.idempotence)),
    };
    Ok((recycling, converse))
}

fn check_deep(cfg: &ExperimentConfig, layers: &[usize], cov: &CovarianceSet) -> Result<CheckOutcome> {
    let trace = run_deep(&DeepParams::random(layers, cfg.seed)?, cov, &cfg.stopping_rule())?;
    let width = *layers.iter().min().expect("validated layers");
    let floor = error_floor(cov, width)?;
    let gap = (trace.final_error() - floor).abs();
    Ok(CheckOutcome::from_bool(
        gap <= 1e-6 * floor.abs().max(1.0),
        format!("final={} floor={}", fmt_f64(trace.final_error()), fmt_f64(floor)),
    ))
}

/// All checks, in display order.
pub fn verify_checks(cfg: &ExperimentConfig) -> Result<Vec<(&'static str, CheckOutcome)>> {
    let data = cfg.load_dataset()?;
    let mut cov = cfg.covariances(&data)?;
    if cfg.faults.non_hermitian_sigma {
        let mut sigma = cov.sigma.clone();
        let n = sigma.nrows();
        let bump = 1e-3 * fro(&sigma).max(1.0);
        sigma[(0, n - 1)] += linalg::c(bump, bump);
        cov = cov.with_sigma_unchecked(sigma);
    }
    let guard = |r: Result<CheckOutcome>| r.unwrap_or_else(|e| CheckOutcome::Fail(e.to_string()));

    let mut checks = Vec::new();
    let herm = hermitian_residual(&cov.sigma);
    checks.push(("hermitian", CheckOutcome::from_bool(herm <= 1e-10, format!("residual={herm:.2e}"))));
    checks.push(("group-invariance", guard(check_group_invariance(cfg, &data, &cov))));
    checks.push(("conjugate-transposition", guard(check_conjugacy(cfg, &cov))));

    let trained = cfg.schedule().and_then(|sched| {
        run_schedule(&init_random(cov.n(), cfg.p, cfg.seed)?, &sched, &cov, &cfg.stopping_rule())
    });
    match trained {
        Ok(trace) => {
            checks.push((
                "em-descent",
                CheckOutcome::from_bool(em_descent_check(&trace), format!("steps={}", trace.steps.len())),
            ));
            let a = trace.final_params.a().clone();
            let point = solve_b_given_a(&a, &cov).and_then(|b| AutoencoderParams::new(a, b));
            match point.and_then(|p| check_projection(&p, &cov, data.inputs())) {
                Ok((recycling, converse)) => {
                    checks.push(("recycling", recycling));
                    checks.push(("converse", converse));
                }
                Err(e) => {
                    checks.push(("recycling", CheckOutcome::Fail(e.to_string())));
                    checks.push(("converse", CheckOutcome::Fail(e.to_string())));
                }
            }
        }
        Err(e) => {
            for name in ["em-descent", "recycling", "converse"] {
                checks.push((name, CheckOutcome::Fail(e.to_string())));
            }
        }
    }
    if let Some(layers) = &cfg.layers {
        checks.push(("deep-equivalence", guard(check_deep(cfg, layers, &cov))));
    }
    Ok(checks)
}

pub fn cmd_verify(cfg: &ExperimentConfig) -> Result<u8> {
    let checks = verify_checks(cfg)?;
    let mut failed = Vec::new();
    for (name, outcome) in &checks {
        let (label, detail) = match outcome {
            CheckOutcome::Pass(d) => (paint("PASS", "32"), d),
            CheckOutcome::Fail(d) => {
                failed.push(*name);
                (paint("FAIL", "31"), d)
            }
            CheckOutcome::Skip(d) => (paint("SKIP", "33"), d),
        };
        println!("{name:<24} {label} {detail}");
    }
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("failed checks: {}", failed.join(", "));
        Ok(EXIT_VERIFY_FAILED)
    }
}

pub fn cmd_factorize(cfg: &ExperimentConfig, input: &Path) -> Result<u8> {
    let w = load_matrix_csv(input)?;
    let params = rank_p_factorize(&w, cfg.p)?;
    let residual = fro(&(params.w() - &w)) / fro(&w).max(1.0);
    save_matrix_csv(&cfg.out.join("A.csv"), params.a())?;
    save_matrix_csv(&cfg.out.join("B.csv"), params.b())?;
    println!("p = {}", cfg.p);
    println!("residual = {}", fmt_f64(residual));
    Ok(EXIT_OK)
}
