//! Population risk of a linear predictor: exact, and by Monte Carlo.
//!
//! `R(β̂) = σ² + (β̂ − β)ᵀΣ(β̂ − β)` with `Σ = (pγ + 1)P_W + P_{W⊥}`, so the
//! quadratic form only needs the range basis of `W`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::estimators::{EstimatorParams, Provenance};
use crate::linalg::{gaussian_vector, Vector};
use crate::model::{FeatureMap, Induced, Result, TaskRotation};

/// Smallest Monte-Carlo test set accepted by [`empirical_risk`].
pub const MIN_TEST_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    A,
    B,
}

/// `σ² + (pγ + 1)‖P_W δ‖² + ‖P_{W⊥} δ‖²` with `δ = β̂ − β`.
pub fn risk_of(beta_hat: &Vector, fm: &FeatureMap, induced: &Induced) -> f64 {
    let delta = beta_hat - &induced.beta_star;
    let (onto, rest) = fm.split(&delta);
    induced.sigma2 + (fm.signal_scale() + 1.0) * onto.norm_squared() + rest.norm_squared()
}

pub fn analytic_risk(est: &EstimatorParams, fm: &FeatureMap, induced: &Induced) -> f64 {
    risk_of(&est.beta_hat, fm, induced)
}

/// Task-B risk. Test features are `O(Wz + u)`, so the task-B risk of `β̂`
/// equals the task-A risk of `Oᵀβ̂`.
pub fn risk_of_task_b(
    beta_hat: &Vector,
    fm: &FeatureMap,
    rotation: &TaskRotation,
    induced: &Induced,
) -> Result<f64> {
    Ok(risk_of(&rotation.apply_transpose(beta_hat)?, fm, induced))
}

pub fn analytic_risk_task_b(
    est: &EstimatorParams,
    fm: &FeatureMap,
    rotation: &TaskRotation,
    induced: &Induced,
) -> Result<f64> {
    risk_of_task_b(&est.beta_hat, fm, rotation, induced)
}

/// How Monte-Carlo test points are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestSampler {
    /// Draws the full `p`-dimensional `x = Wz + u` for every test point.
    Full,
    /// Draws `z` and the scalar `uᵀβ̂ ~ N(0, ‖β̂‖²)`, which has the same joint law
    /// with `y = zᵀθ` as the full draw at `O(d)` cost per point.
    #[default]
    Projected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let m = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / m;
        let var = if samples.len() > 1 {
            samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        Self { mean, se: (var / m).sqrt() }
    }

    /// `|mean − reference| ≤ k·se`, with a tiny absolute slack for exact zeros.
    pub fn within(&self, reference: f64, k: f64) -> bool {
        (self.mean - reference).abs() <= k * self.se + 1e-12 * reference.abs().max(1e-300)
    }
}

/// Mean squared prediction error of `β̂` over `n_test` fresh draws of the
/// requested task.
#[allow(clippy::too_many_arguments)]
pub fn empirical_risk<R: Rng + ?Sized>(
    beta_hat: &Vector,
    theta: &Vector,
    fm: &FeatureMap,
    task: Task,
    rotation: &TaskRotation,
    n_test: usize,
    sampler: TestSampler,
    rng: &mut R,
) -> Result<McEstimate> {
    assert!(n_test >= MIN_TEST_SAMPLES, "n_test must be at least {MIN_TEST_SAMPLES}");
    // xᵀβ̂ with x = O(Wz + u) equals (Wz + u)ᵀOᵀβ̂
    let b = match task {
        Task::A => beta_hat.clone(),
        Task::B => rotation.apply_transpose(beta_hat)?,
    };
    let latent_weights = fm.w.tr_mul(&b);
    let d = theta.len();
    let mut losses = Vec::with_capacity(n_test);
    match sampler {
        TestSampler::Projected => {
            let noise_scale = b.norm();
            for _ in 0..n_test {
                let z = gaussian_vector(rng, d);
                let xi: f64 = rng.sample(StandardNormal);
                let err = z.dot(&latent_weights) + noise_scale * xi - z.dot(theta);
                losses.push(err * err);
            }
        }
        TestSampler::Full => {
            let p = b.len();
            for _ in 0..n_test {
                let z = gaussian_vector(rng, d);
                let u = gaussian_vector(rng, p);
                let x = &fm.w * &z + u;
                let err = x.dot(&b) - z.dot(theta);
                losses.push(err * err);
            }
        }
    }
    Ok(McEstimate::from_samples(&losses))
}

/// `R(β̂_BA) − R(β̂_A)`; negative finite-sample values are kept.
pub fn forgetting(r_ba: f64, r_a: f64) -> f64 {
    r_ba - r_a
}

/// `(R(β̂_BA) − R(β̂_A)) / (R(0) − R(β̂_A))`, undefined when task A was not
/// learned at all (`R(0) ≤ R(β̂_A)`).
pub fn forgetting_ratio(r_ba: f64, r_a: f64, r_null: f64) -> Option<f64> {
    let gain = r_null - r_a;
    if gain > 0.0 {
        Some((r_ba - r_a) / gain)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub analytic: f64,
    pub empirical: Option<McEstimate>,
    pub sigma2_floor: f64,
    pub excess: f64,
    pub task: Task,
    pub provenance: Provenance,
}

impl RiskReport {
    pub fn new(
        analytic: f64,
        empirical: Option<McEstimate>,
        sigma2: f64,
        task: Task,
        provenance: Provenance,
    ) -> Self {
        Self {
            analytic,
            empirical,
            sigma2_floor: sigma2,
            excess: analytic - sigma2,
            task,
            provenance,
        }
    }
}
