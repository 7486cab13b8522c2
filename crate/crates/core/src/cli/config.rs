//! The TOML run configuration.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::experiments::{SweepSpec, VariantSelection};
use crate::model::{ModelConfig, RotationKind, WMode};
use crate::risk::TestSampler;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub checks: ChecksSection,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaDirection {
    /// `θ = ‖θ‖·e₁`.
    #[default]
    Basis,
    /// A uniformly random direction drawn from the root seed.
    Random,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub d: Vec<usize>,
    pub n: Vec<usize>,
    /// Absolute feature dimensions. Exactly one of `p` and `p_multipliers` is set.
    #[serde(default)]
    pub p: Option<Vec<usize>>,
    /// Feature dimensions as multiples of `n`.
    #[serde(default)]
    pub p_multipliers: Option<Vec<usize>>,
    pub gamma: Vec<f64>,
    #[serde(default = "one")]
    pub theta_norm_sq: f64,
    #[serde(default)]
    pub theta_direction: ThetaDirection,
    #[serde(default = "axis_aligned")]
    pub w_mode: WMode,
    #[serde(default = "haar")]
    pub rotation: RotationKind,
    pub trials_per_point: u32,
    #[serde(default)]
    pub n_test: usize,
    #[serde(default)]
    pub sampler: TestSampler,
    pub root_seed: u64,
    #[serde(default)]
    pub model_variant: VariantSelection,
}

fn one() -> f64 {
    1.0
}

fn axis_aligned() -> WMode {
    WMode::AxisAligned
}

fn haar() -> RotationKind {
    RotationKind::Haar
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verbosity {
    Quiet,
    #[default]
    Normal,
    Verbose,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory, used when `--out` is not given.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub verbosity: Verbosity,
}

/// Which checks `run` evaluates. Disabled checks are reported as skipped.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSection {
    #[serde(default = "yes")]
    pub lemma_identities: bool,
    #[serde(default = "yes")]
    pub gd_oracle_agreement: bool,
    #[serde(default = "yes")]
    pub dual_path: bool,
    #[serde(default = "yes")]
    pub mc_analytic_consistency: bool,
    #[serde(default = "yes")]
    pub bound_satisfaction: bool,
    #[serde(default = "yes")]
    pub trend_amelioration: bool,
    #[serde(default = "yes")]
    pub model_equivalence: bool,
    #[serde(default = "yes")]
    pub singular_value_concentration: bool,
    /// Re-runs the whole sweep under a different thread count.
    #[serde(default = "yes")]
    pub determinism: bool,
}

impl Default for ChecksSection {
    fn default() -> Self {
        toml::from_str("").expect("all check flags have defaults")
    }
}

impl ChecksSection {
    pub fn enabled(&self, name: &str) -> bool {
        match name {
            "lemma_identities" => self.lemma_identities,
            "gd_oracle_agreement" => self.gd_oracle_agreement,
            "dual_path" => self.dual_path,
            "mc_analytic_consistency" => self.mc_analytic_consistency,
            "bound_satisfaction" => self.bound_satisfaction,
            "trend_amelioration" => self.trend_amelioration,
            "model_equivalence" => self.model_equivalence,
            "singular_value_concentration" => self.singular_value_concentration,
            "determinism" => self.determinism,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Random configurations for the closed-form identities.
    #[serde(default = "hundred")]
    pub lemma_configs: usize,
    /// Gradient-descent oracle instances.
    #[serde(default = "fifty")]
    pub gd_instances: u32,
    /// Trials per grid point for the Monte-Carlo and dual-path checks.
    #[serde(default = "twenty")]
    pub trials_per_point: u32,
}

fn hundred() -> usize {
    100
}

fn fifty() -> u32 {
    50
}

fn twenty() -> u32 {
    20
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { lemma_configs: 100, gd_instances: 50, trials_per_point: 20 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse { path: path.to_path_buf(), message },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)
            .map_err(|e| ConfigError::Parse { path: PathBuf::new(), message: e.to_string() })?;
        cfg.sweep.validate()?;
        Ok(cfg)
    }
}

impl SweepSection {
    fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.d.is_empty() || self.n.is_empty() || self.gamma.is_empty() {
            return invalid("grid is empty: d, n and gamma each need at least one value");
        }
        match (&self.p, &self.p_multipliers) {
            (Some(_), Some(_)) => return invalid("set either p or p_multipliers, not both"),
            (None, None) => return invalid("grid is empty: set p or p_multipliers"),
            (Some(v), None) | (None, Some(v)) if v.is_empty() => return invalid("grid is empty: no values of p"),
            _ => {}
        }
        if !(self.theta_norm_sq >= 0.0 && self.theta_norm_sq.is_finite()) {
            return invalid("theta_norm_sq must be finite and non-negative");
        }
        Ok(())
    }

    /// Grid points in `d`, `n`, `p`, `γ` nesting order.
    pub fn grid(&self) -> Vec<ModelConfig> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.root_seed);
        let mut out = Vec::new();
        for &d in &self.d {
            // one θ direction per latent dimension, shared by all points with that d
            let probe = ModelConfig::new(d, d, d, 1.0);
            let theta = match self.theta_direction {
                ThetaDirection::Basis => probe.with_theta_norm_sq(self.theta_norm_sq).theta,
                ThetaDirection::Random => probe.with_random_theta(self.theta_norm_sq, &mut rng).theta,
            };
            for &n in &self.n {
                let ps: Vec<usize> = match (&self.p, &self.p_multipliers) {
                    (Some(p), _) => p.clone(),
                    (None, Some(m)) => m.iter().map(|k| k * n).collect(),
                    (None, None) => Vec::new(),
                };
                for p in ps {
                    for &gamma in &self.gamma {
                        out.push(
                            ModelConfig::new(d, n, p, gamma)
                                .with_theta(theta.clone())
                                .with_w_mode(self.w_mode)
                                .with_rotation(self.rotation)
                                .with_seed(self.root_seed),
                        );
                    }
                }
            }
        }
        out
    }

    pub fn spec(&self) -> SweepSpec {
        SweepSpec {
            grid: self.grid(),
            trials_per_point: self.trials_per_point,
            n_test: self.n_test,
            root_seed: self.root_seed,
            model_variant: self.model_variant,
            sampler: self.sampler,
        }
    }
}
