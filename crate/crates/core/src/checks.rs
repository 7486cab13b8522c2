//! Named pass/fail checks over the library: algebraic identities, oracle
//! agreement, Monte-Carlo consistency, bound frequencies, trends, model
//! equivalence, singular-value concentration and determinism.
//!
//! Check names are stable identifiers and appear verbatim in `summary.json`.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::estimators::{fit_all, fit_gd, GdOptions};
use crate::experiments::{
    run_sweep, trend_check, Axis, Direction, Execution, ExperimentError, Metric, ModelVariant,
    PointAggregate, SweepResult, SweepSpec, VariantSelection,
};
use crate::linalg::{self, relative_error, relative_gap, Mat, RngStream};
use crate::model::{
    build_feature_map, derive_induced, sample_surrogate, sample_task_pair, ModelConfig, WMode,
};
use crate::report::records_csv;
use crate::risk::{self, TestSampler};

pub const LEMMA_IDENTITIES: &str = "lemma_identities";
pub const GD_ORACLE: &str = "gd_oracle_agreement";
pub const DUAL_PATH: &str = "dual_path";
pub const MC_CONSISTENCY: &str = "mc_analytic_consistency";
pub const BOUND_SATISFACTION: &str = "bound_satisfaction";
pub const TRENDS: &str = "trend_amelioration";
pub const MODEL_EQUIVALENCE: &str = "model_equivalence";
pub const SINGULAR_VALUES: &str = "singular_value_concentration";
pub const DETERMINISM: &str = "determinism";

/// Every check, in reporting order.
pub const ALL: [&str; 9] = [
    LEMMA_IDENTITIES,
    GD_ORACLE,
    DUAL_PATH,
    MC_CONSISTENCY,
    BOUND_SATISFACTION,
    TRENDS,
    MODEL_EQUIVALENCE,
    SINGULAR_VALUES,
    DETERMINISM,
];

/// Stream experiment ids for the standalone families, kept clear of the
/// `2·point + variant` ids used by sweeps.
const GD_EXPERIMENT: u32 = u32::MAX - 1;
const SV_EXPERIMENT: u32 = u32::MAX - 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
    /// Headline numbers behind the verdict.
    pub values: BTreeMap<String, f64>,
    pub seconds: f64,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            status: if passed { Status::Pass } else { Status::Fail },
            detail,
            values: BTreeMap::new(),
            seconds: 0.0,
        }
    }

    pub fn skipped(name: &'static str, detail: impl Into<String>) -> Self {
        Self { status: Status::Skipped, ..Self::new(name, true, detail.into()) }
    }

    fn value(mut self, key: &str, v: f64) -> Self {
        self.values.insert(key.to_string(), v);
        self
    }

    fn timed(mut self, start: Instant, limit: Option<Duration>) -> Self {
        let elapsed = start.elapsed();
        self.seconds = elapsed.as_secs_f64();
        if let Some(limit) = limit {
            if elapsed > limit && self.status == Status::Pass {
                self.status = Status::Fail;
                self.detail = format!("{} but took {:.1} s (limit {} s)", self.detail, self.seconds, limit.as_secs());
            }
        }
        self
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

/// Thresholds used by the checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub lemma_relative: f64,
    /// `‖WWᵀ − pγP_W‖_F ≤ s_approx·pγ`.
    pub s_approx: f64,
    pub gd_relative: f64,
    pub dual_path: f64,
    pub mc_sigma: f64,
    /// Minimum fraction for frequency-based checks.
    pub min_frequency: f64,
    pub min_spearman: f64,
    /// Largest allowed ratio of the last to the first median forgetting ratio.
    pub ratio_shrink: f64,
    pub equivalence_sigma: f64,
    pub lemma_time: Option<Duration>,
    pub gd_time: Option<Duration>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            lemma_relative: 1e-10,
            s_approx: 1e-8,
            gd_relative: 1e-6,
            dual_path: linalg::INTERPOLATION_TOL,
            mc_sigma: 3.0,
            min_frequency: 0.99,
            min_spearman: 0.9,
            ratio_shrink: 0.5,
            equivalence_sigma: 3.0,
            lemma_time: Some(Duration::from_secs(10)),
            gd_time: Some(Duration::from_secs(30)),
        }
    }
}

impl Tolerances {
    /// Negative control: thresholds nothing can meet.
    pub fn corrupted() -> Self {
        Self {
            lemma_relative: -1.0,
            s_approx: -1.0,
            gd_relative: -1.0,
            dual_path: -1.0,
            mc_sigma: -1.0,
            min_frequency: 1.5,
            min_spearman: 1.5,
            ratio_shrink: -1.0,
            equivalence_sigma: -1.0,
            ..Self::default()
        }
    }
}

/// Random configurations with `d ≤ 20`, `p ≤ 500`, alternating `W` modes.
pub fn random_lemma_configs(count: usize, seed: u64) -> Vec<ModelConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let d = rng.random_range(1..=20);
            let n = rng.random_range(d..=250);
            let p = rng.random_range(n..=500);
            let gamma = 10f64.powf(rng.random_range(-1.5..1.0));
            let norm_sq = 10f64.powf(rng.random_range(-2.0..2.0));
            let w_mode = if i % 2 == 0 { WMode::AxisAligned } else { WMode::RandomRotation };
            ModelConfig::new(d, n, p, gamma)
                .with_w_mode(w_mode)
                .with_random_theta(norm_sq, &mut rng)
                .with_seed(rng.random())
        })
        .collect()
}

/// Residuals of the three closed-form identities for one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaResiduals {
    /// Relative gap of `‖β‖²` from `pγ/(pγ+1)²‖θ‖²`.
    pub beta_norm: f64,
    /// `‖WWᵀ − pγP_W‖_F / (pγ)`, with `P_W` from an independent QR of `W`.
    pub s_approx: f64,
    /// Relative gap of `R(0)` from `‖θ‖²`.
    pub null_risk: f64,
}

pub fn lemma_residuals(cfg: &ModelConfig) -> Result<LemmaResiduals, crate::model::ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fm = build_feature_map(cfg, &mut rng)?;
    let induced = derive_induced(cfg, &fm);
    let pg = cfg.signal_scale();
    let theta_sq = cfg.theta_norm_sq();

    let beta_norm = relative_gap(induced.beta_star.norm_squared(), pg / (pg + 1.0).powi(2) * theta_sq);

    let q = fm.w.clone().qr().q();
    let p_w = &q * q.transpose();
    let s_approx = (&fm.w * fm.w.transpose() - p_w * pg).norm() / pg;

    let null = crate::estimators::EstimatorParams::null(cfg.p);
    let null_risk = relative_gap(risk::analytic_risk(&null, &fm, &induced), theta_sq);
    Ok(LemmaResiduals { beta_norm, s_approx, null_risk })
}

/// The three identities on every configuration, each within tolerance.
pub fn lemma_identities(configs: &[ModelConfig], tol: &Tolerances) -> CheckOutcome {
    let start = Instant::now();
    let mut worst = [0.0f64; 3];
    let mut modes = [false; 2];
    let mut bad = Vec::new();
    for (i, cfg) in configs.iter().enumerate() {
        modes[usize::from(cfg.w_mode == WMode::RandomRotation)] = true;
        match lemma_residuals(cfg) {
            Ok(r) => {
                worst[0] = worst[0].max(r.beta_norm);
                worst[1] = worst[1].max(r.s_approx);
                worst[2] = worst[2].max(r.null_risk);
                if !(r.beta_norm <= tol.lemma_relative
                    && r.s_approx <= tol.s_approx
                    && r.null_risk <= tol.lemma_relative)
                {
                    bad.push(i);
                }
            }
            Err(e) => {
                bad.push(i);
                log_failure(LEMMA_IDENTITIES, i, &e.to_string());
            }
        }
    }
    let detail = format!(
        "{} configs ({} W modes), {} outside tolerance; worst ‖β‖² {:.2e}, s-approx {:.2e}·pγ, R(0) {:.2e}",
        configs.len(),
        modes.iter().filter(|&&m| m).count(),
        bad.len(),
        worst[0],
        worst[1],
        worst[2]
    );
    CheckOutcome::new(LEMMA_IDENTITIES, bad.is_empty() && !configs.is_empty(), detail)
        .value("configs", configs.len() as f64)
        .value("worst_beta_norm", worst[0])
        .value("worst_s_approx", worst[1])
        .value("worst_null_risk", worst[2])
        .timed(start, tol.lemma_time)
}

fn log_failure(check: &str, index: usize, msg: &str) {
    eprintln!("{check}: instance {index}: {msg}");
}

/// Instances for the gradient-descent oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdFamily {
    pub d: usize,
    pub n: usize,
    pub p: usize,
    pub gamma: f64,
    pub theta_norm_sq: f64,
    pub instances: u32,
    pub seed: u64,
}

impl Default for GdFamily {
    fn default() -> Self {
        Self { d: 3, n: 20, p: 60, gamma: 1.0, theta_norm_sq: 1.0, instances: 50, seed: 0 }
    }
}

/// Gradient descent from zero on task A, then from its output on task B,
/// against the closed-form `β̂_A` and `β̂_BA`.
pub fn gd_oracle(family: &GdFamily, tol: &Tolerances) -> CheckOutcome {
    let start = Instant::now();
    let cfg = ModelConfig::new(family.d, family.n, family.p, family.gamma)
        .with_theta_norm_sq(family.theta_norm_sq);
    let mut worst = 0.0f64;
    let mut bad = 0usize;
    for i in 0..family.instances {
        let result = (|| -> Result<(f64, f64), String> {
            let mut rng = RngStream::for_trial(family.seed, GD_EXPERIMENT, i).rng();
            let fm = build_feature_map(&cfg, &mut rng).map_err(|e| e.to_string())?;
            let tp = sample_task_pair(&cfg, &fm, &mut rng).map_err(|e| e.to_string())?;
            let fits = fit_all(&tp).map_err(|e| e.to_string())?;
            let zero = linalg::Vector::zeros(cfg.p);
            let gd_a = fit_gd(&tp.x_a, &tp.y, &zero, GdOptions::default()).map_err(|e| e.to_string())?;
            let gd_ba = fit_gd(&tp.x_b, &tp.y, &gd_a.params.beta_hat, GdOptions::default())
                .map_err(|e| e.to_string())?;
            Ok((
                relative_error(&gd_a.params.beta_hat, &fits.task_a.beta_hat),
                relative_error(&gd_ba.params.beta_hat, &fits.sequential.beta_hat),
            ))
        })();
        match result {
            Ok((ea, eba)) => {
                worst = worst.max(ea).max(eba);
                if !(ea <= tol.gd_relative && eba <= tol.gd_relative) {
                    bad += 1;
                }
            }
            Err(e) => {
                bad += 1;
                log_failure(GD_ORACLE, i as usize, &e);
            }
        }
    }
    let detail = format!(
        "{} instances (d={}, n={}, p={}), {} outside tolerance; worst relative error {:.2e}",
        family.instances, family.d, family.n, family.p, bad, worst
    );
    CheckOutcome::new(GD_ORACLE, bad == 0 && family.instances > 0, detail)
        .value("instances", f64::from(family.instances))
        .value("worst_relative_error", worst)
        .timed(start, tol.gd_time)
}

/// Every sweep trial succeeded and its two sequential-fit paths agree.
pub fn dual_path(sweep: &SweepResult, tol: &Tolerances) -> CheckOutcome {
    let failed = sweep.records.iter().filter(|r| r.outcome.is_err()).count();
    let diffs: Vec<f64> = sweep
        .records
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|m| m.dual_path_difference))
        .collect();
    let worst = diffs.iter().copied().fold(0.0, f64::max);
    let over = diffs.iter().filter(|&&d| d.is_nan() || d > tol.dual_path).count();
    let detail = format!(
        "{} trials, {} failed, {} above tolerance; worst relative difference {:.2e}",
        sweep.records.len(),
        failed,
        over,
        worst
    );
    CheckOutcome::new(DUAL_PATH, failed == 0 && over == 0 && !sweep.records.is_empty(), detail)
        .value("trials", sweep.records.len() as f64)
        .value("failed", failed as f64)
        .value("worst_difference", worst)
}

/// Fraction of `(trial, estimator)` pairs whose Monte-Carlo estimate lies
/// within `mc_sigma` standard errors of the analytic risk.
pub fn mc_consistency(sweep: &SweepResult, tol: &Tolerances) -> CheckOutcome {
    let mut agree = 0usize;
    let mut total = 0usize;
    for m in sweep.records.iter().filter_map(|r| r.outcome.as_ref().ok()) {
        for (emp, analytic) in m.mc_pairs() {
            total += 1;
            agree += usize::from(emp.within(analytic, tol.mc_sigma));
        }
    }
    if total == 0 {
        return CheckOutcome::skipped(MC_CONSISTENCY, "no Monte-Carlo estimates (n_test = 0)");
    }
    let rate = agree as f64 / total as f64;
    let detail = format!(
        "{agree}/{total} pairs within {}·SE ({:.2}%, need {:.0}%)",
        tol.mc_sigma,
        100.0 * rate,
        100.0 * tol.min_frequency
    );
    CheckOutcome::new(MC_CONSISTENCY, rate >= tol.min_frequency, detail)
        .value("pairs", total as f64)
        .value("agreement_rate", rate)
}

/// Each bound holds in at least `min_frequency` of the applicable trials at
/// every grid point.
pub fn bound_satisfaction(sweep: &SweepResult, tol: &Tolerances) -> CheckOutcome {
    let mut worst: BTreeMap<&'static str, f64> = BTreeMap::new();
    let mut undefined: Vec<&'static str> = Vec::new();
    let mut passed = true;
    for (name, _) in crate::experiments::BoundFrequencies::default().iter() {
        let rates: Vec<f64> = sweep
            .aggregates
            .iter()
            .filter_map(|a| a.bounds.iter().find(|(b, _)| *b == name).and_then(|(_, f)| f.rate()))
            .collect();
        if rates.is_empty() {
            undefined.push(name);
            continue;
        }
        let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
        passed &= min >= tol.min_frequency;
        worst.insert(name, min);
    }
    if worst.is_empty() {
        return CheckOutcome::skipped(
            BOUND_SATISFACTION,
            "no grid point satisfies the premises, so no bound applies",
        );
    }
    let mut detail = worst
        .iter()
        .map(|(b, r)| format!("{b} {:.2}%", 100.0 * r))
        .collect::<Vec<_>>()
        .join(", ");
    detail = format!("lowest per-point rate: {detail}");
    if !undefined.is_empty() {
        detail.push_str(&format!("; not applicable anywhere: {}", undefined.join(", ")));
    }
    let mut out = CheckOutcome::new(BOUND_SATISFACTION, passed, detail);
    for (b, r) in worst {
        out = out.value(&format!("min_rate_{b}"), r);
    }
    out
}

fn same_slice(a: &PointAggregate, b: &PointAggregate) -> bool {
    a.variant == b.variant
        && a.d == b.d
        && a.n == b.n
        && a.gamma.to_bits() == b.gamma.to_bits()
        && a.theta_sq.to_bits() == b.theta_sq.to_bits()
}

/// Groups aggregates that differ only in `p`.
pub fn p_slices(aggregates: &[PointAggregate]) -> Vec<Vec<&PointAggregate>> {
    let mut slices: Vec<Vec<&PointAggregate>> = Vec::new();
    for a in aggregates {
        match slices.iter_mut().find(|s| same_slice(s[0], a)) {
            Some(s) => s.push(a),
            None => slices.push(vec![a]),
        }
    }
    slices
}

/// Medians of `r_a`, `r_ba` and the forgetting ratio fall with `p`, and the
/// median ratio at the largest `p` is at most `ratio_shrink` times its value
/// at the smallest `p`. Applied to every slice with at least four values of `p`.
pub fn trends(sweep: &SweepResult, tol: &Tolerances) -> CheckOutcome {
    let mut lines = Vec::new();
    let mut passed = true;
    let mut checked = 0;
    let mut out_values = BTreeMap::new();
    for slice in p_slices(&sweep.aggregates) {
        let mut slice_ok = true;
        let mut parts = Vec::new();
        let mut covered = true;
        for metric in [Metric::RiskA, Metric::RiskBa, Metric::Ratio] {
            match trend_check(&slice, metric, Axis::P, Direction::Decreasing, tol.min_spearman) {
                Ok(t) => {
                    slice_ok &= t.passed;
                    parts.push(format!("{} ρ={:.3}", metric.label(), t.spearman));
                    if checked == 0 {
                        out_values.insert(format!("spearman_{}", metric.label()), t.spearman);
                    }
                }
                Err(ExperimentError::InsufficientCoverage { .. }) => covered = false,
                Err(e) => {
                    covered = false;
                    parts.push(e.to_string());
                }
            }
        }
        if !covered {
            continue;
        }
        let mut by_p: Vec<(usize, f64)> =
            slice.iter().filter_map(|a| a.ratio.map(|s| (a.p, s.median))).collect();
        by_p.sort_by_key(|x| x.0);
        let (first, last) = (by_p[0], by_p[by_p.len() - 1]);
        let shrink = last.1 / first.1;
        let shrink_ok = first.1 > 0.0 && shrink < tol.ratio_shrink;
        slice_ok &= shrink_ok;
        parts.push(format!("ratio(p={})/ratio(p={}) = {:.3}", last.0, first.0, shrink));
        if checked == 0 {
            out_values.insert("ratio_shrink".into(), shrink);
        }
        let a = slice[0];
        lines.push(format!(
            "[{} d={} n={} γ={}] {}",
            a.variant.label(),
            a.d,
            a.n,
            a.gamma,
            parts.join(", ")
        ));
        passed &= slice_ok;
        checked += 1;
    }
    if checked == 0 {
        return CheckOutcome::skipped(TRENDS, "no slice of the grid has four or more values of p");
    }
    let mut out = CheckOutcome::new(TRENDS, passed, lines.join("; "));
    out.values = out_values;
    out.value("slices", checked as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceSetup {
    pub d: usize,
    pub n: usize,
    pub p: usize,
    pub gamma: f64,
    pub trials: u32,
    pub seed: u64,
}

impl Default for EquivalenceSetup {
    fn default() -> Self {
        Self { d: 5, n: 50, p: 1000, gamma: 1.0, trials: 500, seed: 0 }
    }
}

/// Mean `R(β̂_A)` under latent and surrogate sampling agree within
/// `equivalence_sigma` combined standard errors.
pub fn model_equivalence(setup: &EquivalenceSetup, execution: Execution, tol: &Tolerances) -> CheckOutcome {
    let spec = SweepSpec {
        grid: vec![ModelConfig::new(setup.d, setup.n, setup.p, setup.gamma)],
        trials_per_point: setup.trials,
        n_test: 0,
        root_seed: setup.seed,
        model_variant: VariantSelection::Both,
        sampler: TestSampler::Projected,
    };
    let sweep = match run_sweep(&spec, execution) {
        Ok(s) => s,
        Err(e) => return CheckOutcome::new(MODEL_EQUIVALENCE, false, e.to_string()),
    };
    let pick = |v: ModelVariant| sweep.aggregates.iter().find(|a| a.variant == v).and_then(|a| a.r_a);
    let (Some(lat), Some(sur)) = (pick(ModelVariant::Latent), pick(ModelVariant::Surrogate)) else {
        return CheckOutcome::new(MODEL_EQUIVALENCE, false, "a variant produced no successful trials".into());
    };
    let diff = (lat.mean - sur.mean).abs();
    let se = (lat.se.powi(2) + sur.se.powi(2)).sqrt();
    let detail = format!(
        "mean r_a latent {:.6e} ± {:.1e}, surrogate {:.6e} ± {:.1e}; |Δ| = {:.2} combined SE (limit {})",
        lat.mean,
        lat.se,
        sur.mean,
        sur.se,
        diff / se,
        tol.equivalence_sigma
    );
    CheckOutcome::new(MODEL_EQUIVALENCE, diff <= tol.equivalence_sigma * se, detail)
        .value("latent_mean", lat.mean)
        .value("surrogate_mean", sur.mean)
        .value("z", diff / se)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationSetup {
    pub d: usize,
    pub n: usize,
    /// Any `p ≥ n` works: the normalized block is standard Gaussian for every `p` and `γ`.
    pub p: usize,
    pub gamma: f64,
    pub trials: u32,
    pub seed: u64,
}

impl Default for ConcentrationSetup {
    fn default() -> Self {
        Self { d: 20, n: 400, p: 800, gamma: 1.0, trials: 500, seed: 0 }
    }
}

/// Extreme singular values of the first `d` columns of the surrogate design
/// (axis-aligned `W`), divided by `√(pγ+1)`, for each trial.
pub fn block_singular_values(setup: &ConcentrationSetup, trial: u32) -> Result<(f64, f64), String> {
    let cfg = ModelConfig::new(setup.d, setup.n, setup.p, setup.gamma);
    let mut rng = RngStream::for_trial(setup.seed, SV_EXPERIMENT, trial).rng();
    let fm = build_feature_map(&cfg, &mut rng).map_err(|e| e.to_string())?;
    let task = sample_surrogate(&cfg, &fm, &mut rng).map_err(|e| e.to_string())?;
    let block: Mat = task.a.columns(0, setup.d) / (cfg.signal_scale() + 1.0).sqrt();
    let s = linalg::svd(&block).map_err(|e| e.to_string())?;
    let sv = &s.singular_values;
    Ok((sv[sv.len() - 1], sv[0]))
}

pub fn singular_value_concentration(
    setup: &ConcentrationSetup,
    execution: Execution,
    tol: &Tolerances,
) -> CheckOutcome {
    let (lo, hi) = crate::bounds::singular_value_window(setup.d, setup.n);
    let trials: Vec<u32> = (0..setup.trials).collect();
    let results = par_map(&trials, execution, |&t| block_singular_values(setup, t));
    let inside = results
        .iter()
        .filter(|r| matches!(r, Ok((min, max)) if *min >= lo && *max <= hi))
        .count();
    let errors = results.iter().filter(|r| r.is_err()).count();
    let rate = inside as f64 / setup.trials.max(1) as f64;
    let extreme_min = results.iter().flatten().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let extreme_max = results.iter().flatten().map(|r| r.1).fold(0.0, f64::max);
    let detail = format!(
        "{inside}/{} trials inside [{lo:.3}, {hi:.3}] ({errors} errors); observed range [{extreme_min:.3}, {extreme_max:.3}]",
        setup.trials
    );
    CheckOutcome::new(SINGULAR_VALUES, setup.trials > 0 && rate >= tol.min_frequency, detail)
        .value("inside_rate", rate)
        .value("observed_min", extreme_min)
        .value("observed_max", extreme_max)
}

fn par_map<T: Sync, U: Send, F: Fn(&T) -> U + Sync + Send>(items: &[T], execution: Execution, f: F) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        match execution {
            Execution::Sequential => items.iter().map(f).collect(),
            Execution::Parallel => items.par_iter().map(f).collect(),
            Execution::ParallelWith(threads) => match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                Ok(pool) => pool.install(|| items.par_iter().map(f).collect()),
                Err(_) => items.iter().map(f).collect(),
            },
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = execution;
        items.iter().map(f).collect()
    }
}

/// Re-runs `spec` under `other` and compares `records.csv` bytes with `reference`.
pub fn determinism(spec: &SweepSpec, reference: &[u8], other: Execution) -> CheckOutcome {
    let start = Instant::now();
    let out = match run_sweep(spec, other) {
        Ok(rerun) => {
            let bytes = records_csv(&rerun.records);
            let same = bytes == reference;
            CheckOutcome::new(
                DETERMINISM,
                same,
                format!(
                    "re-run under {other:?}: records.csv {} ({} bytes)",
                    if same { "byte-identical" } else { "differs" },
                    reference.len()
                ),
            )
        }
        Err(e) => CheckOutcome::new(DETERMINISM, false, e.to_string()),
    };
    out.timed(start, None)
}

/// A thread count different from the one `execution` uses.
pub fn alternate_execution(execution: Execution) -> Execution {
    match execution {
        Execution::ParallelWith(1) | Execution::Sequential => Execution::ParallelWith(4),
        _ => Execution::ParallelWith(1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lemma_family_covers_both_modes_within_limits() {
        let cfgs = random_lemma_configs(20, 1);
        assert!(cfgs.iter().all(|c| c.d <= 20 && c.p <= 500 && c.validate().is_ok()));
        assert!(cfgs.iter().any(|c| c.w_mode == WMode::AxisAligned));
        assert!(cfgs.iter().any(|c| c.w_mode == WMode::RandomRotation));
        let out = lemma_identities(&cfgs, &Tolerances::default());
        assert_eq!(out.status, Status::Pass, "{}", out.detail);
        let out = lemma_identities(&cfgs[..2], &Tolerances::corrupted());
        assert_eq!(out.status, Status::Fail);
    }

    #[test]
    fn gd_family_passes_and_corruption_fails() {
        let fam = GdFamily { instances: 3, ..GdFamily::default() };
        assert_eq!(gd_oracle(&fam, &Tolerances::default()).status, Status::Pass);
        assert_eq!(gd_oracle(&fam, &Tolerances::corrupted()).status, Status::Fail);
        let zero = GdFamily { instances: 2, theta_norm_sq: 0.0, ..GdFamily::default() };
        assert_eq!(gd_oracle(&zero, &Tolerances::default()).status, Status::Pass);
    }

    #[test]
    fn sweep_checks_on_a_small_grid() {
        let grid = [400, 800, 1600, 3200].map(|p| ModelConfig::new(2, 20, p, 1.0)).to_vec();
        let spec = SweepSpec {
            grid,
            trials_per_point: 20,
            n_test: 2000,
            root_seed: 11,
            model_variant: VariantSelection::Latent,
            sampler: TestSampler::Projected,
        };
        let sweep = run_sweep(&spec, Execution::Parallel).unwrap();
        let tol = Tolerances::default();
        assert_eq!(dual_path(&sweep, &tol).status, Status::Pass);
        let mc = mc_consistency(&sweep, &tol);
        assert!(mc.values["agreement_rate"] > 0.9, "{}", mc.detail);
        assert_eq!(trends(&sweep, &tol).status, Status::Pass, "{}", trends(&sweep, &tol).detail);
        let b = bound_satisfaction(&sweep, &tol);
        assert_ne!(b.status, Status::Fail, "{}", b.detail);

        let bytes = records_csv(&sweep.records);
        assert_eq!(determinism(&spec, &bytes, Execution::ParallelWith(1)).status, Status::Pass);
        let mut tampered = bytes.clone();
        tampered[bytes.len() / 2] ^= 1;
        assert_eq!(determinism(&spec, &tampered, Execution::Sequential).status, Status::Fail);
    }

    #[test]
    fn trends_skip_without_coverage() {
        let spec = SweepSpec {
            grid: vec![ModelConfig::new(2, 10, 200, 1.0)],
            trials_per_point: 2,
            n_test: 0,
            root_seed: 1,
            model_variant: VariantSelection::Latent,
            sampler: TestSampler::Projected,
        };
        let sweep = run_sweep(&spec, Execution::Sequential).unwrap();
        assert_eq!(trends(&sweep, &Tolerances::default()).status, Status::Skipped);
        assert_eq!(mc_consistency(&sweep, &Tolerances::default()).status, Status::Skipped);
    }

    #[test]
    fn singular_values_of_small_blocks() {
        let setup = ConcentrationSetup { d: 4, n: 100, p: 100, trials: 30, ..ConcentrationSetup::default() };
        let out = singular_value_concentration(&setup, Execution::Sequential, &Tolerances::default());
        assert!(out.values["inside_rate"] > 0.9, "{}", out.detail);
        let (lo, hi) = block_singular_values(&setup, 0).unwrap();
        assert!(lo <= hi && lo > 0.0);
    }

    #[test]
    fn equivalence_on_a_small_instance() {
        let setup = EquivalenceSetup { d: 2, n: 10, p: 100, trials: 60, ..EquivalenceSetup::default() };
        let out = model_equivalence(&setup, Execution::Parallel, &Tolerances::default());
        assert!(out.values["z"].is_finite(), "{}", out.detail);
        assert_eq!(model_equivalence(&setup, Execution::Parallel, &Tolerances::corrupted()).status, Status::Fail);
    }

    #[test]
    fn alternate_execution_changes_thread_count() {
        assert_eq!(alternate_execution(Execution::Parallel), Execution::ParallelWith(1));
        assert_eq!(alternate_execution(Execution::Sequential), Execution::ParallelWith(4));
    }
}
