//! Closed-form continual-learning estimators and a gradient-descent oracle.
//!
//! `β̂_A` and `β̂_B` are minimum-norm interpolators from zero; `β̂_BA` is the
//! task-B interpolator closest to `β̂_A`. The sequential estimator is built two
//! ways (a shifted minimum-norm solve, and the explicit composition
//! `β̂_A + β̂_B − P_{X_Bᵀ}β̂_A`) and the two must agree.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, largest_gram_eigenvalue, LinalgError, Mat, RowSpace, Vector, ABS_FLOOR};
use crate::model::TaskPair;

/// Relative tolerance for the agreement of the two sequential-estimator paths.
pub const DUAL_PATH_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("sequential estimator paths disagree: relative difference {0:.3e}")]
    DualPathMismatch(f64),
    #[error("expected a task-A estimate, got {0:?}")]
    WrongProvenance(Provenance),
    #[error("step size {step:.3e} is not below the stability limit {limit:.3e}")]
    UnstableStep { step: f64, limit: f64 },
    #[error("gradient descent stalled after {iterations} iterations (relative gradient {gradient:.3e})")]
    NoConvergence { iterations: usize, gradient: f64 },
}

pub type Result<T> = std::result::Result<T, EstimatorError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    TaskA,
    TaskB,
    SequentialBa,
    Null,
    GdOracle,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Provenance::TaskA => "task_a",
            Provenance::TaskB => "task_b",
            Provenance::SequentialBa => "sequential_ba",
            Provenance::Null => "null",
            Provenance::GdOracle => "gd_oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorParams {
    pub beta_hat: Vector,
    pub provenance: Provenance,
    pub init: Vector,
}

impl EstimatorParams {
    pub fn null(p: usize) -> Self {
        Self {
            beta_hat: Vector::zeros(p),
            provenance: Provenance::Null,
            init: Vector::zeros(p),
        }
    }

    pub fn interpolation_residual(&self, x: &Mat, y: &Vector) -> f64 {
        (x * &self.beta_hat - y).norm() / y.norm().max(ABS_FLOOR)
    }
}

fn fit_from_zero(rows: &RowSpace<'_>, y: &Vector, provenance: Provenance) -> Result<EstimatorParams> {
    let init = Vector::zeros(rows.matrix().ncols());
    let beta_hat = rows.min_norm(y, &init)?;
    Ok(EstimatorParams { beta_hat, provenance, init })
}

/// `β̂_A = X_Aᵀ(X_AX_Aᵀ)⁻¹y`.
pub fn fit_task_a(tp: &TaskPair) -> Result<EstimatorParams> {
    fit_from_zero(&RowSpace::new(&tp.x_a)?, &tp.y, Provenance::TaskA)
}

/// `β̂_B = X_Bᵀ(X_BX_Bᵀ)⁻¹y`.
pub fn fit_task_b(tp: &TaskPair) -> Result<EstimatorParams> {
    fit_from_zero(&RowSpace::new(&tp.x_b)?, &tp.y, Provenance::TaskB)
}

/// Both constructions of the sequential estimator.
#[derive(Debug, Clone)]
pub struct DualPath {
    /// Minimum-norm solve on task B initialized at `β̂_A`.
    pub shifted: Vector,
    /// `β̂_A + β̂_B − P_{X_Bᵀ}β̂_A`.
    pub composed: Vector,
    pub beta_b: Vector,
    pub relative_difference: f64,
}

fn dual_path(rows_b: &RowSpace<'_>, y: &Vector, beta_a: &EstimatorParams) -> Result<DualPath> {
    if beta_a.provenance != Provenance::TaskA {
        return Err(EstimatorError::WrongProvenance(beta_a.provenance));
    }
    let shifted = rows_b.min_norm(y, &beta_a.beta_hat)?;
    let beta_b = rows_b.min_norm(y, &Vector::zeros(beta_a.beta_hat.len()))?;
    let (onto, _) = rows_b.project(&beta_a.beta_hat)?;
    let composed = &beta_a.beta_hat + &beta_b - onto;
    let relative_difference = linalg::relative_error(&shifted, &composed);
    Ok(DualPath { shifted, composed, beta_b, relative_difference })
}

pub fn sequential_dual_path(tp: &TaskPair, beta_a: &EstimatorParams) -> Result<DualPath> {
    dual_path(&RowSpace::new(&tp.x_b)?, &tp.y, beta_a)
}

/// `β̂_BA`: trains on task B starting from `β̂_A`.
pub fn fit_sequential(tp: &TaskPair, beta_a: &EstimatorParams) -> Result<EstimatorParams> {
    let path = sequential_dual_path(tp, beta_a)?;
    finish_sequential(path, beta_a)
}

fn finish_sequential(path: DualPath, beta_a: &EstimatorParams) -> Result<EstimatorParams> {
    if path.relative_difference.is_nan() || path.relative_difference > DUAL_PATH_TOL {
        return Err(EstimatorError::DualPathMismatch(path.relative_difference));
    }
    Ok(EstimatorParams {
        beta_hat: path.shifted,
        provenance: Provenance::SequentialBa,
        init: beta_a.beta_hat.clone(),
    })
}

/// All three estimators of a task pair, sharing one factorization per task.
#[derive(Debug, Clone)]
pub struct SequentialFits {
    pub task_a: EstimatorParams,
    pub task_b: EstimatorParams,
    pub sequential: EstimatorParams,
    pub dual_path_difference: f64,
}

pub fn fit_all(tp: &TaskPair) -> Result<SequentialFits> {
    fit_all_with(&RowSpace::new(&tp.x_a)?, &RowSpace::new(&tp.x_b)?, &tp.y)
}

/// [`fit_all`] with caller-owned factorizations of `X_A` and `X_B`.
pub fn fit_all_with(rows_a: &RowSpace<'_>, rows_b: &RowSpace<'_>, y: &Vector) -> Result<SequentialFits> {
    let task_a = fit_from_zero(rows_a, y, Provenance::TaskA)?;
    let path = dual_path(rows_b, y, &task_a)?;
    let dual_path_difference = path.relative_difference;
    let task_b = EstimatorParams {
        beta_hat: path.beta_b.clone(),
        provenance: Provenance::TaskB,
        init: Vector::zeros(rows_b.matrix().ncols()),
    };
    let sequential = finish_sequential(path, &task_a)?;
    Ok(SequentialFits { task_a, task_b, sequential, dual_path_difference })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdOptions {
    /// Defaults to `1 / λ_max(XᵀX)`.
    pub step: Option<f64>,
    /// Stop once `‖∇‖ ≤ tol·‖Xᵀy‖`.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for GdOptions {
    fn default() -> Self {
        Self { step: None, tol: 1e-10, max_iters: 200_000 }
    }
}

#[derive(Debug, Clone)]
pub struct GdFit {
    pub params: EstimatorParams,
    pub iterations: usize,
    pub step: f64,
}

/// Full-batch gradient descent on `½‖Xβ − y‖²` from `beta0`.
pub fn fit_gd(x: &Mat, y: &Vector, beta0: &Vector, opts: GdOptions) -> Result<GdFit> {
    let lambda_max = largest_gram_eigenvalue(x);
    let limit = 2.0 / lambda_max;
    let step = opts.step.unwrap_or(1.0 / lambda_max);
    if !(step > 0.0 && step < limit) {
        return Err(EstimatorError::UnstableStep { step, limit });
    }
    let scale = (x.tr_mul(y).norm()).max(ABS_FLOOR);
    let mut beta = beta0.clone();
    let mut iterations = 0;
    loop {
        let grad = x.tr_mul(&(x * &beta - y));
        let rel = grad.norm() / scale;
        if rel <= opts.tol || grad.norm() <= ABS_FLOOR {
            break;
        }
        if iterations == opts.max_iters {
            return Err(EstimatorError::NoConvergence { iterations, gradient: rel });
        }
        beta.axpy(-step, &grad, 1.0);
        iterations += 1;
    }
    Ok(GdFit {
        params: EstimatorParams {
            beta_hat: beta,
            provenance: Provenance::GdOracle,
            init: beta0.clone(),
        },
        iterations,
        step,
    })
}
