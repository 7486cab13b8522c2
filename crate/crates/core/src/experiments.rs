//! Seeded multi-trial runs, parameter sweeps and their aggregation.
//!
//! Every trial draws from its own [`RngStream`], derived from the sweep's
//! root seed, the grid point, the model variant and the trial index. Records
//! are therefore identical whether trials run on one thread or many.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{check_trial, BoundFlags, BoundSheet, Realized};
use crate::estimators::{fit_all_with, EstimatorError};
use crate::linalg::{self, LinalgError, RngStream, RowSpace, Vector};
use crate::model::{
    build_feature_map, derive_induced, sample_surrogate, sample_task_pair, ModelConfig, ModelError,
};
use crate::risk::{self, empirical_risk, forgetting, forgetting_ratio, McEstimate, Task, TestSampler};
use crate::stats::{spearman, Summary};

/// Monte-Carlo agreement is judged at this many standard errors.
pub const MC_SIGMA: f64 = 3.0;

/// A grid point is flagged when more than this fraction of its trials fail.
pub const MAX_FAILED_FRACTION: f64 = 0.01;

/// Tolerance of the per-trial `R(0) = ‖θ‖²` self-check.
pub const NULL_RISK_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("trend check needs at least {needed} distinct {axis} values, found {found}")]
    InsufficientCoverage { axis: &'static str, needed: usize, found: usize },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Error)]
enum TrialError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("null risk {got} differs from ‖θ‖² = {expected}")]
    NullRisk { got: f64, expected: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelVariant {
    /// Noiseless responses from the latent model.
    Latent,
    /// Noise-on-responses surrogate.
    Surrogate,
}

impl ModelVariant {
    pub fn label(self) -> &'static str {
        match self {
            ModelVariant::Latent => "latent",
            ModelVariant::Surrogate => "surrogate",
        }
    }

    fn stream_offset(self) -> u32 {
        match self {
            ModelVariant::Latent => 0,
            ModelVariant::Surrogate => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantSelection {
    #[default]
    Latent,
    Surrogate,
    Both,
}

impl VariantSelection {
    pub fn variants(self) -> &'static [ModelVariant] {
        match self {
            VariantSelection::Latent => &[ModelVariant::Latent],
            VariantSelection::Surrogate => &[ModelVariant::Surrogate],
            VariantSelection::Both => &[ModelVariant::Latent, ModelVariant::Surrogate],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub grid: Vec<ModelConfig>,
    pub trials_per_point: u32,
    /// Monte-Carlo test draws per estimator; `0` skips empirical risk.
    pub n_test: usize,
    pub root_seed: u64,
    pub model_variant: VariantSelection,
    pub sampler: TestSampler,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.grid.is_empty() {
            return Err(ExperimentError::InvalidSpec("grid is empty".into()));
        }
        if self.trials_per_point < 1 {
            return Err(ExperimentError::InvalidSpec("trials_per_point must be at least 1".into()));
        }
        if self.n_test != 0 && self.n_test < risk::MIN_TEST_SAMPLES {
            return Err(ExperimentError::InvalidSpec(format!(
                "n_test must be 0 or at least {}",
                risk::MIN_TEST_SAMPLES
            )));
        }
        if u32::try_from(self.grid.len() * 2).is_err() {
            return Err(ExperimentError::InvalidSpec("grid too large".into()));
        }
        for (i, cfg) in self.grid.iter().enumerate() {
            cfg.validate()
                .map_err(|e| ExperimentError::InvalidSpec(format!("grid point {i}: {e}")))?;
        }
        Ok(())
    }

    /// Stream of trial `trial` at grid point `point` under `variant`.
    pub fn stream(&self, point: usize, variant: ModelVariant, trial: u32) -> RngStream {
        let experiment = point as u32 * 2 + variant.stream_offset();
        RngStream::for_trial(self.root_seed, experiment, trial)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub r_a: f64,
    pub r_ba: f64,
    pub r_b_on_b: f64,
    pub r_null: f64,
    pub sigma2: f64,
    pub forgetting: f64,
    pub ratio: Option<f64>,
    /// `‖P_{X_Aᵀ⊥} u‖²` for the unit direction `u` of `β` (`e₁` for axis-aligned `W`).
    pub proj_energy: f64,
    pub dual_path_difference: f64,
    pub flags: BoundFlags,
    pub emp_a: Option<McEstimate>,
    pub emp_ba: Option<McEstimate>,
    pub emp_b_on_b: Option<McEstimate>,
}

impl TrialMetrics {
    /// `(empirical, analytic)` pairs for every estimator with a Monte-Carlo estimate.
    pub fn mc_pairs(&self) -> impl Iterator<Item = (McEstimate, f64)> + '_ {
        [
            (self.emp_a, self.r_a),
            (self.emp_ba, self.r_ba),
            (self.emp_b_on_b, self.r_b_on_b),
        ]
        .into_iter()
        .filter_map(|(e, a)| e.map(|e| (e, a)))
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        [
            self.r_a,
            self.r_ba,
            self.r_b_on_b,
            self.r_null,
            self.sigma2,
            self.forgetting,
            self.proj_energy,
            self.dual_path_difference,
        ]
        .into_iter()
        .chain(self.ratio)
        .chain(self.mc_pairs().flat_map(|(e, _)| [e.mean, e.se]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub point: usize,
    pub variant: ModelVariant,
    pub d: usize,
    pub n: usize,
    pub p: usize,
    pub gamma: f64,
    pub theta_sq: f64,
    pub trial: u32,
    pub outcome: Result<TrialMetrics, String>,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOptions {
    pub n_test: usize,
    pub sampler: TestSampler,
}

impl Default for TrialOptions {
    fn default() -> Self {
        Self { n_test: 0, sampler: TestSampler::Projected }
    }
}

/// Unit vector whose projection residual is reported as `proj_energy`.
fn probe_direction(beta_star: &Vector, fm: &crate::model::FeatureMap) -> Vector {
    let norm = beta_star.norm();
    if norm > 0.0 {
        beta_star / norm
    } else {
        fm.basis().column(0).into_owned()
    }
}

fn trial_metrics(
    cfg: &ModelConfig,
    variant: ModelVariant,
    stream: RngStream,
    opts: TrialOptions,
) -> Result<TrialMetrics, TrialError> {
    let mut rng = stream.rng();
    let fm = build_feature_map(cfg, &mut rng)?;
    let induced = derive_induced(cfg, &fm);
    let tp = match variant {
        ModelVariant::Latent => sample_task_pair(cfg, &fm, &mut rng)?,
        ModelVariant::Surrogate => {
            sample_surrogate(cfg, &fm, &mut rng)?.into_task_pair(cfg.rotation, &mut rng)?
        }
    };
    let rows_a = RowSpace::new(&tp.x_a)?;
    let rows_b = RowSpace::new(&tp.x_b)?;
    let fits = fit_all_with(&rows_a, &rows_b, &tp.y)?;

    let r_a = risk::risk_of(&fits.task_a.beta_hat, &fm, &induced);
    let r_ba = risk::risk_of(&fits.sequential.beta_hat, &fm, &induced);
    let r_b_on_b = risk::risk_of_task_b(&fits.task_b.beta_hat, &fm, &tp.rotation, &induced)?;
    let r_null = risk::risk_of(&Vector::zeros(cfg.p), &fm, &induced);
    let theta_sq = cfg.theta_norm_sq();
    if linalg::relative_gap(r_null, theta_sq) > NULL_RISK_TOL {
        return Err(TrialError::NullRisk { got: r_null, expected: theta_sq });
    }

    let probe = probe_direction(&induced.beta_star, &fm);
    let proj_energy = (1.0 - rows_a.projected_energy(&probe)).max(0.0);

    let realized = Realized {
        r_a,
        r_ba,
        r_null,
        forgetting: forgetting(r_ba, r_a),
        ratio: forgetting_ratio(r_ba, r_a, r_null),
        proj_energy,
    };
    let sheet = BoundSheet::evaluate(cfg.d, cfg.n, cfg.p, cfg.gamma, theta_sq);
    let flags = check_trial(&sheet, &realized);

    let (emp_a, emp_ba, emp_b_on_b) = if opts.n_test > 0 {
        let mut mc = |beta: &Vector, task: Task| {
            empirical_risk(beta, &cfg.theta, &fm, task, &tp.rotation, opts.n_test, opts.sampler, &mut rng)
        };
        (
            Some(mc(&fits.task_a.beta_hat, Task::A)?),
            Some(mc(&fits.sequential.beta_hat, Task::A)?),
            Some(mc(&fits.task_b.beta_hat, Task::B)?),
        )
    } else {
        (None, None, None)
    };

    Ok(TrialMetrics {
        r_a,
        r_ba,
        r_b_on_b,
        r_null,
        sigma2: induced.sigma2,
        forgetting: realized.forgetting,
        ratio: realized.ratio,
        proj_energy,
        dual_path_difference: fits.dual_path_difference,
        flags,
        emp_a,
        emp_ba,
        emp_b_on_b,
    })
}

/// Samples one two-task instance, fits all estimators and evaluates every
/// risk, bound and Monte-Carlo quantity. Failures are recorded, not raised.
pub fn run_trial(
    cfg: &ModelConfig,
    variant: ModelVariant,
    stream: RngStream,
    trial: u32,
    opts: TrialOptions,
) -> TrialRecord {
    let start = Instant::now();
    let outcome = trial_metrics(cfg, variant, stream, opts)
        .map_err(|e| e.to_string())
        .and_then(|m| {
            if m.values().all(f64::is_finite) {
                Ok(m)
            } else {
                Err("non-finite metric".to_string())
            }
        });
    TrialRecord {
        point: 0,
        variant,
        d: cfg.d,
        n: cfg.n,
        p: cfg.p,
        gamma: cfg.gamma,
        theta_sq: cfg.theta_norm_sq(),
        trial,
        outcome,
        wall_time: start.elapsed(),
    }
}

/// How trials are scheduled. Results do not depend on the choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon pool; `None` uses the global pool.
    #[default]
    Parallel,
    ParallelWith(usize),
}

fn map_jobs<T, F>(jobs: &[T], execution: Execution, f: F) -> Result<Vec<TrialRecord>, ExperimentError>
where
    T: Sync,
    F: Fn(&T) -> TrialRecord + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        match execution {
            Execution::Sequential => Ok(jobs.iter().map(f).collect()),
            Execution::Parallel => Ok(jobs.par_iter().map(f).collect()),
            Execution::ParallelWith(threads) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| ExperimentError::ThreadPool(e.to_string()))?;
                Ok(pool.install(|| jobs.par_iter().map(f).collect()))
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = execution;
        Ok(jobs.iter().map(f).collect())
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub records: Vec<TrialRecord>,
    pub aggregates: Vec<PointAggregate>,
}

/// Runs every grid point × variant × trial, then aggregates.
pub fn run_sweep(spec: &SweepSpec, execution: Execution) -> Result<SweepResult, ExperimentError> {
    spec.validate()?;
    let opts = TrialOptions { n_test: spec.n_test, sampler: spec.sampler };
    let jobs: Vec<(usize, ModelVariant, u32)> = spec
        .grid
        .iter()
        .enumerate()
        .flat_map(|(point, _)| {
            spec.model_variant.variants().iter().flat_map(move |&variant| {
                (0..spec.trials_per_point).map(move |trial| (point, variant, trial))
            })
        })
        .collect();
    let records = map_jobs(&jobs, execution, |&(point, variant, trial)| {
        let mut rec = run_trial(&spec.grid[point], variant, spec.stream(point, variant, trial), trial, opts);
        rec.point = point;
        rec
    })?;
    let aggregates = aggregate(&records);
    Ok(SweepResult { records, aggregates })
}

/// `satisfied` out of `applicable` trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Frequency {
    pub satisfied: usize,
    pub applicable: usize,
}

impl Frequency {
    fn add(&mut self, flag: Option<bool>) {
        if let Some(ok) = flag {
            self.applicable += 1;
            self.satisfied += usize::from(ok);
        }
    }

    /// `None` when nothing was applicable.
    pub fn rate(&self) -> Option<f64> {
        (self.applicable > 0).then(|| self.satisfied as f64 / self.applicable as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundFrequencies {
    pub single: Frequency,
    pub terminal: Frequency,
    pub forgetting: Frequency,
    pub ratio: Frequency,
    pub projection: Frequency,
}

impl BoundFrequencies {
    pub fn iter(&self) -> impl Iterator<Item = (&'static str, Frequency)> {
        [
            ("single", self.single),
            ("terminal", self.terminal),
            ("forgetting", self.forgetting),
            ("ratio", self.ratio),
            ("projection", self.projection),
        ]
        .into_iter()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointAggregate {
    pub point: usize,
    pub variant: ModelVariant,
    pub d: usize,
    pub n: usize,
    pub p: usize,
    pub gamma: f64,
    pub theta_sq: f64,
    pub trials: usize,
    pub failed: usize,
    /// More than [`MAX_FAILED_FRACTION`] of trials failed.
    pub flagged: bool,
    pub r_a: Option<Summary>,
    pub r_ba: Option<Summary>,
    pub r_b_on_b: Option<Summary>,
    pub r_null: Option<Summary>,
    pub forgetting: Option<Summary>,
    pub ratio: Option<Summary>,
    pub ratio_undefined: usize,
    pub proj_energy: Option<Summary>,
    pub bounds: BoundFrequencies,
    /// `(trial, estimator)` pairs with `|empirical − analytic| ≤ 3·SE`.
    pub mc_agreement: Frequency,
    pub max_dual_path_difference: f64,
    pub sheet: BoundSheet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    RiskA,
    RiskBa,
    RiskBOnB,
    Forgetting,
    Ratio,
    ProjEnergy,
}

impl Metric {
    pub fn label(self) -> &'static str {
        match self {
            Metric::RiskA => "r_a",
            Metric::RiskBa => "r_ba",
            Metric::RiskBOnB => "r_b_on_b",
            Metric::Forgetting => "forgetting",
            Metric::Ratio => "ratio",
            Metric::ProjEnergy => "proj_energy",
        }
    }
}

impl PointAggregate {
    pub fn summary(&self, metric: Metric) -> Option<&Summary> {
        match metric {
            Metric::RiskA => self.r_a.as_ref(),
            Metric::RiskBa => self.r_ba.as_ref(),
            Metric::RiskBOnB => self.r_b_on_b.as_ref(),
            Metric::Forgetting => self.forgetting.as_ref(),
            Metric::Ratio => self.ratio.as_ref(),
            Metric::ProjEnergy => self.proj_energy.as_ref(),
        }
    }
}

/// Groups records by `(point, variant)` in first-appearance order and
/// summarizes each group. Pure function of the records.
pub fn aggregate(records: &[TrialRecord]) -> Vec<PointAggregate> {
    let mut keys: Vec<(usize, ModelVariant)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.point, r.variant)) {
            keys.push((r.point, r.variant));
        }
    }
    keys.into_iter()
        .map(|(point, variant)| {
            let group: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.point == point && r.variant == variant)
                .collect();
            aggregate_group(point, variant, &group)
        })
        .collect()
}

fn aggregate_group(point: usize, variant: ModelVariant, group: &[&TrialRecord]) -> PointAggregate {
    let first = group[0];
    let ok: Vec<&TrialMetrics> = group.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    let failed = group.len() - ok.len();
    let collect = |f: &dyn Fn(&TrialMetrics) -> f64| Summary::of(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
    let ratios: Vec<f64> = ok.iter().filter_map(|m| m.ratio).collect();

    let mut bounds = BoundFrequencies::default();
    let mut mc_agreement = Frequency::default();
    for m in &ok {
        bounds.single.add(m.flags.single);
        bounds.terminal.add(m.flags.terminal);
        bounds.forgetting.add(m.flags.forgetting);
        bounds.ratio.add(m.flags.ratio);
        bounds.projection.add(m.flags.projection);
        for (emp, analytic) in m.mc_pairs() {
            mc_agreement.add(Some(emp.within(analytic, MC_SIGMA)));
        }
    }

    PointAggregate {
        point,
        variant,
        d: first.d,
        n: first.n,
        p: first.p,
        gamma: first.gamma,
        theta_sq: first.theta_sq,
        trials: group.len(),
        failed,
        flagged: failed as f64 > MAX_FAILED_FRACTION * group.len() as f64,
        r_a: collect(&|m| m.r_a),
        r_ba: collect(&|m| m.r_ba),
        r_b_on_b: collect(&|m| m.r_b_on_b),
        r_null: collect(&|m| m.r_null),
        forgetting: collect(&|m| m.forgetting),
        ratio: Summary::of(&ratios),
        ratio_undefined: ok.len() - ratios.len(),
        proj_energy: collect(&|m| m.proj_energy),
        bounds,
        mc_agreement,
        max_dual_path_difference: ok.iter().map(|m| m.dual_path_difference).fold(0.0, f64::max),
        sheet: BoundSheet::evaluate(first.d, first.n, first.p, first.gamma, first.theta_sq),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    D,
    N,
    P,
    Gamma,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::D => "d",
            Axis::N => "n",
            Axis::P => "p",
            Axis::Gamma => "gamma",
        }
    }

    pub fn value(self, agg: &PointAggregate) -> f64 {
        match self {
            Axis::D => agg.d as f64,
            Axis::N => agg.n as f64,
            Axis::P => agg.p as f64,
            Axis::Gamma => agg.gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Decreasing,
    Increasing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendOutcome {
    pub axis_values: Vec<f64>,
    pub medians: Vec<f64>,
    pub spearman: f64,
    pub passed: bool,
}

/// Spearman correlation of a metric's median against an axis, compared with
/// `min_spearman` in the requested direction. Points without the metric are
/// skipped; at least four distinct axis values must remain.
pub fn trend_check(
    aggregates: &[&PointAggregate],
    metric: Metric,
    axis: Axis,
    direction: Direction,
    min_spearman: f64,
) -> Result<TrendOutcome, ExperimentError> {
    let mut pairs: Vec<(f64, f64)> = aggregates
        .iter()
        .filter_map(|a| a.summary(metric).map(|s| (axis.value(a), s.median)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut distinct: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(ExperimentError::InsufficientCoverage {
            axis: axis.label(),
            needed: 4,
            found: distinct.len(),
        });
    }
    let (axis_values, medians): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let rho = spearman(&axis_values, &medians);
    let passed = match direction {
        Direction::Decreasing => rho <= -min_spearman,
        Direction::Increasing => rho >= min_spearman,
    };
    Ok(TrendOutcome { axis_values, medians, spearman: rho, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RotationKind;

    fn spec(grid: Vec<ModelConfig>, trials: u32, n_test: usize) -> SweepSpec {
        SweepSpec {
            grid,
            trials_per_point: trials,
            n_test,
            root_seed: 99,
            model_variant: VariantSelection::Latent,
            sampler: TestSampler::Projected,
        }
    }

    #[test]
    fn identity_rotation_means_no_forgetting() {
        let cfg = ModelConfig::new(3, 20, 400, 1.0).with_rotation(RotationKind::Identity);
        let rec = run_trial(&cfg, ModelVariant::Latent, RngStream::new(1, 2), 0, TrialOptions::default());
        let m = rec.outcome.unwrap();
        assert!(m.forgetting.abs() <= 1e-8);
        assert!(m.ratio.unwrap().abs() <= 1e-8);
    }

    #[test]
    fn trials_are_deterministic() {
        let cfg = ModelConfig::new(3, 20, 400, 1.0);
        let opts = TrialOptions { n_test: 2000, sampler: TestSampler::Projected };
        let a = run_trial(&cfg, ModelVariant::Latent, RngStream::new(5, 7), 7, opts);
        let b = run_trial(&cfg, ModelVariant::Latent, RngStream::new(5, 7), 7, opts);
        assert_eq!(a.outcome, b.outcome);
        let s = run_trial(&cfg, ModelVariant::Surrogate, RngStream::new(5, 7), 7, opts);
        assert!(s.outcome.is_ok());
    }

    #[test]
    fn invalid_configs_fail_the_trial() {
        let cfg = ModelConfig::new(3, 20, 10, 1.0);
        let rec = run_trial(&cfg, ModelVariant::Latent, RngStream::new(1, 1), 0, TrialOptions::default());
        assert!(rec.outcome.unwrap_err().contains("p ≥ n"));
    }

    #[test]
    fn single_trial_aggregate_equals_trial() {
        let s = spec(vec![ModelConfig::new(2, 10, 200, 1.0)], 1, 0);
        let res = run_sweep(&s, Execution::Sequential).unwrap();
        assert_eq!(res.records.len(), 1);
        let m = res.records[0].outcome.as_ref().unwrap();
        let agg = &res.aggregates[0];
        assert_eq!(agg.r_a.unwrap().median, m.r_a);
        assert_eq!(agg.r_ba.unwrap().mean, m.r_ba);
        assert_eq!(agg.trials, 1);
        assert_eq!(agg.failed, 0);
    }

    #[test]
    fn schedule_does_not_change_records() {
        let grid = vec![ModelConfig::new(2, 10, 100, 1.0), ModelConfig::new(2, 10, 300, 1.0)];
        let mut s = spec(grid, 6, 1000);
        s.model_variant = VariantSelection::Both;
        let seq = run_sweep(&s, Execution::Sequential).unwrap();
        let par = run_sweep(&s, Execution::ParallelWith(3)).unwrap();
        let strip = |r: &[TrialRecord]| {
            r.iter().map(|t| (t.point, t.variant, t.trial, t.outcome.clone())).collect::<Vec<_>>()
        };
        assert_eq!(strip(&seq.records), strip(&par.records));
        assert_eq!(seq.aggregates, par.aggregates);
        assert_eq!(seq.aggregates, aggregate(&par.records));
        assert_eq!(seq.aggregates.len(), 4);
    }

    #[test]
    fn spec_validation() {
        assert!(spec(vec![], 1, 0).validate().is_err());
        assert!(spec(vec![ModelConfig::new(2, 10, 100, 1.0)], 0, 0).validate().is_err());
        assert!(spec(vec![ModelConfig::new(2, 10, 100, 1.0)], 1, 10).validate().is_err());
        assert!(spec(vec![ModelConfig::new(2, 10, 5, 1.0)], 1, 0).validate().is_err());
    }

    fn fake_aggregate(p: usize, median: f64) -> PointAggregate {
        let s = Summary::of(&[median]).unwrap();
        PointAggregate {
            point: 0,
            variant: ModelVariant::Latent,
            d: 1,
            n: 1,
            p,
            gamma: 1.0,
            theta_sq: 1.0,
            trials: 1,
            failed: 0,
            flagged: false,
            r_a: Some(s),
            r_ba: None,
            r_b_on_b: None,
            r_null: None,
            forgetting: None,
            ratio: None,
            ratio_undefined: 0,
            proj_energy: None,
            bounds: BoundFrequencies::default(),
            mc_agreement: Frequency::default(),
            max_dual_path_difference: 0.0,
            sheet: BoundSheet::evaluate(1, 1, p, 1.0, 1.0),
        }
    }

    #[test]
    fn trend_check_cases() {
        let mono: Vec<PointAggregate> =
            [(10, 4.0), (20, 3.0), (40, 2.0), (80, 1.0)].iter().map(|&(p, m)| fake_aggregate(p, m)).collect();
        let refs: Vec<&PointAggregate> = mono.iter().collect();
        let t = trend_check(&refs, Metric::RiskA, Axis::P, Direction::Decreasing, 0.9).unwrap();
        assert_eq!(t.spearman, -1.0);
        assert!(t.passed);
        assert!(!trend_check(&refs, Metric::RiskA, Axis::P, Direction::Increasing, 0.9).unwrap().passed);

        let flat: Vec<PointAggregate> = [10, 20, 40, 80].iter().map(|&p| fake_aggregate(p, 1.0)).collect();
        let refs: Vec<&PointAggregate> = flat.iter().collect();
        let t = trend_check(&refs, Metric::RiskA, Axis::P, Direction::Decreasing, 0.1).unwrap();
        assert_eq!(t.spearman, 0.0);
        assert!(!t.passed);

        let err = trend_check(&refs[..3], Metric::RiskA, Axis::P, Direction::Decreasing, 0.9);
        assert!(matches!(err, Err(ExperimentError::InsufficientCoverage { found: 3, .. })));
        let err = trend_check(&refs, Metric::Ratio, Axis::P, Direction::Decreasing, 0.9);
        assert!(matches!(err, Err(ExperimentError::InsufficientCoverage { found: 0, .. })));
    }
}
