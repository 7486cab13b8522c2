//! Command-line interface: `run`, `verify` and `single`.
//!
//! Exit codes: 0 all enabled checks pass, 2 a check failed, 3 configuration
//! error, 4 runtime or numerical failure, 5 output could not be written.

pub mod config;
pub mod plot;

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::bounds::{Premises, FORGETTING_PREMISE_TEXT, MAIN_PREMISE_TEXT, PROJECTION_PREMISE_TEXT};
use crate::checks::{self, CheckOutcome, Status, Tolerances};
use crate::experiments::{run_sweep, run_trial, Execution, ModelVariant, SweepResult, SweepSpec, TrialOptions};
use crate::linalg::RngStream;
use crate::model::{ModelConfig, RotationKind, WMode};
use crate::report;
use crate::risk::TestSampler;
use config::{ConfigError, RunConfigFile, Verbosity};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;
pub const EXIT_IO: i32 = 5;

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "FORGETTING_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "forgetting-lab", version, about = "Sequential minimum-norm regression experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a sweep and write records.csv, aggregate.csv, summary.json and sweep.svg.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `[output] dir`, then the current directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the root seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 0 or unset uses every core.
        #[arg(long, env = THREADS_ENV)]
        threads: Option<usize>,
        /// Overrides trials per grid point.
        #[arg(long)]
        trials: Option<u32>,
    },
    /// Check the closed-form identities and oracle agreements on a configuration.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = THREADS_ENV)]
        threads: Option<usize>,
        /// Replace every tolerance with one no result can meet (negative control).
        #[arg(long)]
        corrupt_tolerance: bool,
    },
    /// Draw one instance and print every risk, bound and premise.
    Single {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        theta_norm_sq: f64,
        #[arg(long, value_enum, default_value_t = CliWMode::AxisAligned)]
        w_mode: CliWMode,
        /// Monte-Carlo test draws; 0 skips the empirical risks.
        #[arg(long, default_value_t = 20_000)]
        n_test: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CliWMode {
    AxisAligned,
    RandomRotation,
}

impl From<CliWMode> for WMode {
    fn from(m: CliWMode) -> Self {
        match m {
            CliWMode::AxisAligned => WMode::AxisAligned,
            CliWMode::RandomRotation => WMode::RandomRotation,
        }
    }
}

/// A failed command: exit code plus message for standard error.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self { code: EXIT_IO, message: format!("cannot write {}: {e}", path.display()) }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::config(e.to_string())
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn dispatch(command: Command) -> Result<i32, Failure> {
    match command {
        Command::Run { config, out, seed, threads, trials } => {
            let mut cfg = RunConfigFile::load(&config)?;
            if let Some(seed) = seed {
                cfg.sweep.root_seed = seed;
            }
            if let Some(trials) = trials {
                cfg.sweep.trials_per_point = trials;
            }
            let out = out.or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
            cmd_run(&cfg, &out, execution(threads))
        }
        Command::Verify { config, seed, threads, corrupt_tolerance } => {
            let mut cfg = RunConfigFile::load(&config)?;
            if let Some(seed) = seed {
                cfg.sweep.root_seed = seed;
            }
            let tol = if corrupt_tolerance { Tolerances::corrupted() } else { Tolerances::default() };
            cmd_verify(&cfg, execution(threads), &tol)
        }
        Command::Single { d, n, p, gamma, seed, theta_norm_sq, w_mode, n_test } => {
            let text = cmd_single(d, n, p, gamma, seed, theta_norm_sq, w_mode.into(), n_test)?;
            print!("{text}");
            Ok(EXIT_OK)
        }
    }
}

fn execution(threads: Option<usize>) -> Execution {
    match threads {
        None | Some(0) => Execution::Parallel,
        Some(t) => Execution::ParallelWith(t),
    }
}

/// Bound premises that fail at some grid point, one line per point.
pub fn premise_warnings(spec: &SweepSpec) -> Vec<String> {
    spec.grid
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            let v = Premises::evaluate(c.d, c.n, c.p, c.gamma).violations();
            (!v.is_empty()).then(|| {
                format!("grid point {i} (d={}, n={}, p={}, γ={}): {}", c.d, c.n, c.p, c.gamma, v.join("; "))
            })
        })
        .collect()
}

fn validated_spec(cfg: &RunConfigFile) -> Result<SweepSpec, Failure> {
    let spec = cfg.sweep.spec();
    spec.validate().map_err(|e| Failure::config(e.to_string()))?;
    Ok(spec)
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    all_passed: bool,
    root_seed: u64,
    grid_points: usize,
    trials: usize,
    failed_trials: usize,
    flagged_points: Vec<usize>,
    premise_warnings: &'a [String],
    checks: &'a [CheckOutcome],
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| Failure::io(&path, e))
}

/// Evaluates every check named in [`checks::ALL`], skipping the disabled ones.
pub fn run_checks(
    cfg: &RunConfigFile,
    spec: &SweepSpec,
    sweep: &SweepResult,
    records_csv: &[u8],
    execution: Execution,
    tol: &Tolerances,
) -> Vec<CheckOutcome> {
    let seed = spec.root_seed;
    checks::ALL
        .iter()
        .map(|&name| {
            if !cfg.checks.enabled(name) {
                return CheckOutcome::skipped(name, "disabled in configuration");
            }
            match name {
                checks::LEMMA_IDENTITIES => {
                    checks::lemma_identities(&checks::random_lemma_configs(cfg.verify.lemma_configs, seed), tol)
                }
                checks::GD_ORACLE => checks::gd_oracle(
                    &checks::GdFamily { instances: cfg.verify.gd_instances, seed, ..Default::default() },
                    tol,
                ),
                checks::DUAL_PATH => checks::dual_path(sweep, tol),
                checks::MC_CONSISTENCY => checks::mc_consistency(sweep, tol),
                checks::BOUND_SATISFACTION => checks::bound_satisfaction(sweep, tol),
                checks::TRENDS => checks::trends(sweep, tol),
                checks::MODEL_EQUIVALENCE => checks::model_equivalence(
                    &checks::EquivalenceSetup { seed, ..Default::default() },
                    execution,
                    tol,
                ),
                checks::SINGULAR_VALUES => checks::singular_value_concentration(
                    &checks::ConcentrationSetup { seed, ..Default::default() },
                    execution,
                    tol,
                ),
                checks::DETERMINISM => {
                    checks::determinism(spec, records_csv, checks::alternate_execution(execution))
                }
                _ => CheckOutcome::skipped(name, "unknown check"),
            }
        })
        .collect()
}

fn status_word(s: Status) -> &'static str {
    match s {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::Skipped => "SKIP",
    }
}

fn print_checks(outcomes: &[CheckOutcome]) {
    let mut stdout = std::io::stdout().lock();
    for c in outcomes {
        let _ = writeln!(stdout, "{:4}  {:<30} {}", status_word(c.status), c.name, c.detail);
    }
}

pub fn cmd_run(cfg: &RunConfigFile, out_dir: &Path, execution: Execution) -> Result<i32, Failure> {
    let spec = validated_spec(cfg)?;
    let verbosity = cfg.output.verbosity;
    let warnings = premise_warnings(&spec);
    for w in &warnings {
        eprintln!("warning: bounds not asserted at {w}");
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Failure::io(out_dir, e))?;

    let sweep = run_sweep(&spec, execution).map_err(|e| Failure { code: EXIT_RUNTIME, message: e.to_string() })?;
    let records = report::records_csv(&sweep.records);
    write_file(out_dir, "records.csv", &records)?;
    write_file(out_dir, "aggregate.csv", &report::aggregate_csv(&sweep.aggregates))?;
    write_file(out_dir, "sweep.svg", plot::sweep_svg(&sweep.aggregates).as_bytes())?;

    let outcomes = run_checks(cfg, &spec, &sweep, &records, execution, &Tolerances::default());
    let flagged: Vec<usize> = sweep.aggregates.iter().filter(|a| a.flagged).map(|a| a.point).collect();
    let all_passed = outcomes.iter().all(CheckOutcome::passed);
    let summary = Summary {
        all_passed,
        root_seed: spec.root_seed,
        grid_points: spec.grid.len(),
        trials: sweep.records.len(),
        failed_trials: sweep.records.iter().filter(|r| r.outcome.is_err()).count(),
        flagged_points: flagged.clone(),
        premise_warnings: &warnings,
        checks: &outcomes,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(out_dir, "summary.json", json.as_bytes())?;

    if verbosity != Verbosity::Quiet {
        if verbosity == Verbosity::Verbose {
            for a in &sweep.aggregates {
                let med = |s: Option<crate::stats::Summary>| s.map_or("NA".to_string(), |s| format!("{:.4e}", s.median));
                println!(
                    "point {} [{}] d={} n={} p={} γ={}: median r_a {} r_ba {} ratio {} ({} failed)",
                    a.point,
                    a.variant.label(),
                    a.d,
                    a.n,
                    a.p,
                    a.gamma,
                    med(a.r_a),
                    med(a.r_ba),
                    med(a.ratio),
                    a.failed
                );
            }
        }
        print_checks(&outcomes);
        println!("outputs written to {}", out_dir.display());
    }
    if !flagged.is_empty() {
        return Err(Failure {
            code: EXIT_RUNTIME,
            message: format!("more than 1% of trials failed at grid points {flagged:?}; see records.csv"),
        });
    }
    Ok(if all_passed { EXIT_OK } else { EXIT_CHECK_FAILED })
}

/// Identity and oracle checks only: closed-form identities on random
/// configurations and on every grid point (both `W` modes), gradient descent
/// against the closed forms, and Monte-Carlo and dual-path agreement on a
/// short sweep of the grid.
pub fn verify_outcomes(cfg: &RunConfigFile, execution: Execution, tol: &Tolerances) -> Result<Vec<CheckOutcome>, Failure> {
    let mut spec = validated_spec(cfg)?;
    let seed = spec.root_seed;
    let mut lemma_cfgs = checks::random_lemma_configs(cfg.verify.lemma_configs, seed);
    for c in &spec.grid {
        lemma_cfgs.push(c.clone().with_w_mode(WMode::AxisAligned));
        lemma_cfgs.push(c.clone().with_w_mode(WMode::RandomRotation));
    }
    let mut lemma_tol = *tol;
    lemma_tol.lemma_time = None;
    let family = checks::GdFamily {
        instances: cfg.verify.gd_instances,
        theta_norm_sq: cfg.sweep.theta_norm_sq,
        seed,
        ..Default::default()
    };
    spec.trials_per_point = cfg.verify.trials_per_point;
    if spec.n_test == 0 {
        spec.n_test = 10_000;
    }
    let sweep = run_sweep(&spec, execution).map_err(|e| Failure { code: EXIT_RUNTIME, message: e.to_string() })?;
    Ok(vec![
        checks::lemma_identities(&lemma_cfgs, &lemma_tol),
        checks::gd_oracle(&family, tol),
        checks::dual_path(&sweep, tol),
        checks::mc_consistency(&sweep, tol),
    ])
}

pub fn cmd_verify(cfg: &RunConfigFile, execution: Execution, tol: &Tolerances) -> Result<i32, Failure> {
    let outcomes = verify_outcomes(cfg, execution, tol)?;
    print_checks(&outcomes);
    Ok(if outcomes.iter().all(|c| c.status == Status::Pass) { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// One trial at `(d, n, p, γ)` rendered as a two-column table.
#[allow(clippy::too_many_arguments)]
pub fn cmd_single(
    d: usize,
    n: usize,
    p: usize,
    gamma: f64,
    seed: u64,
    theta_norm_sq: f64,
    w_mode: WMode,
    n_test: usize,
) -> Result<String, Failure> {
    let cfg = ModelConfig::new(d, n, p, gamma)
        .with_theta_norm_sq(theta_norm_sq)
        .with_w_mode(w_mode)
        .with_rotation(RotationKind::Haar)
        .with_seed(seed);
    cfg.validate().map_err(|e| Failure::config(e.to_string()))?;
    if !(theta_norm_sq >= 0.0 && theta_norm_sq.is_finite()) {
        return Err(Failure::config("theta_norm_sq must be finite and non-negative"));
    }
    if n_test != 0 && n_test < crate::risk::MIN_TEST_SAMPLES {
        return Err(Failure::config(format!("n_test must be 0 or at least {}", crate::risk::MIN_TEST_SAMPLES)));
    }
    let opts = TrialOptions { n_test, sampler: TestSampler::Projected };
    let rec = run_trial(&cfg, ModelVariant::Latent, RngStream::for_trial(seed, 0, 0), 0, opts);
    let m = rec.outcome.map_err(|e| Failure { code: EXIT_RUNTIME, message: e })?;
    let sheet = crate::bounds::BoundSheet::evaluate(d, n, p, gamma, cfg.theta_norm_sq());
    let pr = sheet.premises;

    let mut rows: Vec<(String, String)> = Vec::new();
    let mut push = |k: &str, v: String| rows.push((k.to_string(), v));
    let f = |v: f64| format!("{v:.10e}");
    let fo = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:.10e}"));
    push("d, n, p, γ", format!("{d}, {n}, {p}, {gamma}"));
    push("seed", seed.to_string());
    push("‖θ‖²", f(cfg.theta_norm_sq()));
    push("σ²", f(m.sigma2));
    push("r_a", f(m.r_a));
    push("r_ba", f(m.r_ba));
    push("r_b_on_b", f(m.r_b_on_b));
    push("r_null", f(m.r_null));
    push("forgetting", f(m.forgetting));
    push("ratio", fo(m.ratio));
    push("proj_energy", f(m.proj_energy));
    push("dual_path_diff", f(m.dual_path_difference));
    for (label, e) in [("emp r_a", m.emp_a), ("emp r_ba", m.emp_ba), ("emp r_b_on_b", m.emp_b_on_b)] {
        if let Some(e) = e {
            push(label, format!("{:.6e} ± {:.1e}", e.mean, e.se));
        }
    }
    push("bound r_a", f(sheet.b_single));
    push("bound r_ba", f(sheet.b_terminal));
    push("bound forgetting", f(sheet.b_forgetting));
    push("bound ratio", fo(sheet.b_ratio));
    push("bound proj_energy", f(sheet.b_proj));
    push(&format!("premise {MAIN_PREMISE_TEXT}"), yes_no(pr.main()).into());
    push(&format!("premise {FORGETTING_PREMISE_TEXT}"), yes_no(pr.forgetting()).into());
    push(&format!("premise {PROJECTION_PREMISE_TEXT}"), yes_no(pr.projection()).into());
    for (name, flag) in m.flags.iter() {
        let v = match flag {
            Some(true) => "satisfied",
            Some(false) => "violated",
            None => "not asserted",
        };
        push(&format!("bound {name}"), v.into());
    }

    let width = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in rows {
        let pad = width - k.chars().count();
        out.push_str(&format!("{k}{}  {v}\n", " ".repeat(pad)));
    }
    Ok(out)
}
