//! Problem instances of the latent-space regression model.
//!
//! Observed features are `x = Wz + u` with latent `z ~ N(0, I_d)` and feature
//! noise `u ~ N(0, I_p)`; responses are the noiseless `y = zᵀθ`. The second
//! task reuses the same responses with rotated features `X_B = X_A Oᵀ`.
//!
//! The surrogate model draws `A` with the same row covariance and moves all
//! noise onto the responses: `y = Aβ + ε`, `ε ~ N(0, σ²I)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    self, gaussian_matrix, gaussian_vector, haar_frame, haar_orthogonal, LinalgError, Mat, Vector,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("vector lies outside the subspace on which the task rotation was sampled")]
    OutsideRotationDomain,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WMode {
    /// `W = √(pγ)[I_d; 0]`.
    #[default]
    AxisAligned,
    /// `W = √(pγ)Q` with `Q` the first `d` columns of a Haar orthogonal matrix.
    RandomRotation,
}

/// How the task-B rotation `O` is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RotationKind {
    /// Haar `O`, sampled only on the row space of `X_A` (exact in law, `O(pn²)`).
    #[default]
    Haar,
    /// Haar `O` materialized as a dense `p × p` matrix. Only sensible for small `p`.
    HaarDense,
    /// `O = I`, so task B coincides with task A. Diagnostic.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub d: usize,
    pub n: usize,
    pub p: usize,
    pub gamma: f64,
    pub theta: Vector,
    pub w_mode: WMode,
    pub rotation: RotationKind,
    pub seed: u64,
}

impl ModelConfig {
    /// Unit `θ = e₁`, axis-aligned `W`, Haar rotation.
    pub fn new(d: usize, n: usize, p: usize, gamma: f64) -> Self {
        let mut theta = Vector::zeros(d.max(1));
        theta[0] = 1.0;
        Self {
            d,
            n,
            p,
            gamma,
            theta,
            w_mode: WMode::AxisAligned,
            rotation: RotationKind::Haar,
            seed: 0,
        }
    }

    /// `θ = √(norm_sq)·e₁`.
    pub fn with_theta_norm_sq(mut self, norm_sq: f64) -> Self {
        self.theta = Vector::zeros(self.d.max(1));
        self.theta[0] = norm_sq.max(0.0).sqrt();
        self
    }

    /// `θ` along a uniformly random direction derived from `seed`, with `‖θ‖² = norm_sq`.
    pub fn with_random_theta<R: Rng + ?Sized>(mut self, norm_sq: f64, rng: &mut R) -> Self {
        let g = gaussian_vector(rng, self.d.max(1));
        let norm = g.norm();
        self.theta = if norm > 0.0 { g * (norm_sq.max(0.0).sqrt() / norm) } else { g };
        self
    }

    pub fn with_theta(mut self, theta: Vector) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_w_mode(mut self, w_mode: WMode) -> Self {
        self.w_mode = w_mode;
        self
    }

    pub fn with_rotation(mut self, rotation: RotationKind) -> Self {
        self.rotation = rotation;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn theta_norm_sq(&self) -> f64 {
        self.theta.norm_squared()
    }

    /// `pγ`, the common squared column length of `W`.
    pub fn signal_scale(&self) -> f64 {
        self.p as f64 * self.gamma
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.d < 1 {
            return fail("latent dimension d must be at least 1".into());
        }
        if self.n < self.d {
            return fail(format!("need n ≥ d, got n = {} < d = {}", self.n, self.d));
        }
        if self.p < self.n {
            return fail(format!(
                "need p ≥ n (overparameterized regime d < n < p), got p = {} < n = {}",
                self.p, self.n
            ));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return fail(format!("gamma must be positive and finite, got {}", self.gamma));
        }
        if self.theta.len() != self.d {
            return fail(format!("theta has length {}, expected d = {}", self.theta.len(), self.d));
        }
        if !self.theta.iter().all(|v| v.is_finite()) {
            return fail("theta must be finite".into());
        }
        Ok(())
    }

    /// `p = n` or `n = d`: allowed, but outside every bound's premises.
    pub fn is_degenerate(&self) -> bool {
        self.p == self.n || self.n == self.d
    }
}

/// The feature map `W` with `WᵀW = pγ I_d`, plus an orthonormal basis of its range.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    pub w: Mat,
    pub gamma: f64,
    basis: Mat,
}

impl FeatureMap {
    /// Wraps an explicit `W`, checking `WᵀW = pγ I_d` to relative tolerance `1e-10`.
    pub fn from_w(w: Mat, gamma: f64) -> Result<Self> {
        let (p, d) = w.shape();
        let pg = p as f64 * gamma;
        if pg.is_nan() || pg <= 0.0 || d == 0 || d > p {
            return Err(ModelError::InvalidConfig(format!("unusable feature map shape {p}×{d}")));
        }
        let err = (w.transpose() * &w - Mat::identity(d, d) * pg).norm();
        if err > 1e-10 * pg * (d as f64).sqrt() {
            return Err(ModelError::InvalidConfig(format!(
                "columns of W are not orthogonal with squared length pγ (error {err:.3e})"
            )));
        }
        let basis = &w / pg.sqrt();
        Ok(Self { w, gamma, basis })
    }

    /// `pγ`.
    pub fn signal_scale(&self) -> f64 {
        self.w.nrows() as f64 * self.gamma
    }

    /// Orthonormal columns spanning `range(W)`; equals `W / √(pγ)`.
    pub fn basis(&self) -> &Mat {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.w.ncols()
    }

    /// Returns `(P_W v, P_{W⊥} v)`.
    pub fn split(&self, v: &Vector) -> (Vector, Vector) {
        let onto = &self.basis * self.basis.tr_mul(v);
        let rest = v - &onto;
        (onto, rest)
    }

    /// `Σv = (WWᵀ + I)v`, evaluated through the range basis.
    pub fn covariance_apply(&self, v: &Vector) -> Vector {
        let coeff = self.basis.tr_mul(v) * self.signal_scale();
        &self.basis * coeff + v
    }
}

pub fn build_feature_map<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<FeatureMap> {
    cfg.validate()?;
    let (d, p) = (cfg.d, cfg.p);
    let basis = match cfg.w_mode {
        WMode::AxisAligned => Mat::identity(p, d),
        WMode::RandomRotation => haar_frame(rng, p, d)?,
    };
    let w = &basis * cfg.signal_scale().sqrt();
    Ok(FeatureMap { w, gamma: cfg.gamma, basis })
}

/// Parameters of the equivalent noise-on-responses model.
///
/// `Σ = WWᵀ + I_p` is never materialized; it is carried by the [`FeatureMap`]
/// as `(pγ + 1)P_W + P_{W⊥}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Induced {
    /// `β = (I + WWᵀ)⁻¹Wθ = Wθ / (pγ + 1)`.
    pub beta_star: Vector,
    /// `σ² = θᵀ(WᵀW + I)⁻¹θ = ‖θ‖² / (pγ + 1)`.
    pub sigma2: f64,
}

pub fn derive_induced(cfg: &ModelConfig, fm: &FeatureMap) -> Induced {
    let shrink = 1.0 / (fm.signal_scale() + 1.0);
    Induced {
        beta_star: &fm.w * &cfg.theta * shrink,
        sigma2: cfg.theta.norm_squared() * shrink,
    }
}

/// The orthogonal map relating the two tasks.
#[derive(Debug, Clone)]
pub enum TaskRotation {
    Identity,
    Dense(Mat),
    /// `O` known only on a subspace: `O·domain = image`, both with orthonormal columns.
    Partial { domain: Mat, image: Mat },
}

fn restrict(basis: &Mat, v: &Vector) -> Result<Vector> {
    let coeff = basis.tr_mul(v);
    let inside = basis * &coeff;
    if (v - inside).norm() > 1e-8 * v.norm().max(linalg::ABS_FLOOR) {
        return Err(ModelError::OutsideRotationDomain);
    }
    Ok(coeff)
}

impl TaskRotation {
    /// `Ov`.
    pub fn apply(&self, v: &Vector) -> Result<Vector> {
        match self {
            TaskRotation::Identity => Ok(v.clone()),
            TaskRotation::Dense(o) => Ok(o * v),
            TaskRotation::Partial { domain, image } => Ok(image * restrict(domain, v)?),
        }
    }

    /// `Oᵀv`.
    pub fn apply_transpose(&self, v: &Vector) -> Result<Vector> {
        match self {
            TaskRotation::Identity => Ok(v.clone()),
            TaskRotation::Dense(o) => Ok(o.tr_mul(v)),
            TaskRotation::Partial { domain, image } => Ok(domain * restrict(image, v)?),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, TaskRotation::Identity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseModel {
    /// `y = Zθ`.
    Latent,
    /// `y = Aβ + ε`.
    Surrogate,
}

#[derive(Debug, Clone)]
pub struct TaskPair {
    pub x_a: Mat,
    pub x_b: Mat,
    pub rotation: TaskRotation,
    pub y: Vector,
    pub latents: Mat,
    pub feature_noise: Mat,
    pub responses: ResponseModel,
}

impl TaskPair {
    /// Builds a pair from an explicit task-A design and a dense orthogonal `O`.
    pub fn from_parts(x_a: Mat, y: Vector, o: Mat, responses: ResponseModel) -> Self {
        let x_b = &x_a * o.transpose();
        let (n, p) = x_a.shape();
        Self {
            x_a,
            x_b,
            rotation: TaskRotation::Dense(o),
            y,
            latents: Mat::zeros(n, 0),
            feature_noise: Mat::zeros(n, p),
            responses,
        }
    }
}

/// Builds `X_B = X_A Oᵀ` for the requested rotation kind.
///
/// For [`RotationKind::Haar`], only `O` restricted to `range(X_Aᵀ)` is drawn:
/// with `X_A X_Aᵀ = LLᵀ` and `Q = X_Aᵀ L⁻ᵀ`, `OQ` is a Haar frame `V`
/// independent of `X_A`, and `X_B = L Vᵀ`.
pub fn rotate_task<R: Rng + ?Sized>(
    x_a: &Mat,
    kind: RotationKind,
    rng: &mut R,
) -> Result<(Mat, TaskRotation)> {
    let (n, p) = x_a.shape();
    match kind {
        RotationKind::Identity => Ok((x_a.clone(), TaskRotation::Identity)),
        RotationKind::HaarDense => {
            let o = haar_orthogonal(rng, p)?;
            Ok((x_a * o.transpose(), TaskRotation::Dense(o)))
        }
        RotationKind::Haar => {
            let chol = nalgebra::Cholesky::new(x_a * x_a.transpose()).ok_or_else(|| {
                LinalgError::SolverFailure("task-A Gram matrix is not positive definite".into())
            })?;
            let l = chol.l();
            // Qᵀ = L⁻¹ X_A
            let domain = l
                .solve_lower_triangular(x_a)
                .ok_or_else(|| LinalgError::SolverFailure("singular Cholesky factor".into()))?
                .transpose();
            let image = haar_frame(rng, p, n)?;
            let x_b = &l * image.transpose();
            Ok((x_b, TaskRotation::Partial { domain, image }))
        }
    }
}

fn latent_design<R: Rng + ?Sized>(cfg: &ModelConfig, fm: &FeatureMap, rng: &mut R) -> (Mat, Mat, Mat) {
    let latents = gaussian_matrix(rng, cfg.n, cfg.d);
    let feature_noise = gaussian_matrix(rng, cfg.n, cfg.p);
    let x = &latents * fm.w.transpose() + &feature_noise;
    (latents, feature_noise, x)
}

pub fn sample_task_pair<R: Rng + ?Sized>(
    cfg: &ModelConfig,
    fm: &FeatureMap,
    rng: &mut R,
) -> Result<TaskPair> {
    cfg.validate()?;
    let (latents, feature_noise, x_a) = latent_design(cfg, fm, rng);
    let y = &latents * &cfg.theta;
    let (x_b, rotation) = rotate_task(&x_a, cfg.rotation, rng)?;
    Ok(TaskPair {
        x_a,
        x_b,
        rotation,
        y,
        latents,
        feature_noise,
        responses: ResponseModel::Latent,
    })
}

#[derive(Debug, Clone)]
pub struct SurrogateTask {
    pub a: Mat,
    pub y: Vector,
    pub beta_star: Vector,
    pub sigma2: f64,
    pub epsilon: Vector,
    pub latents: Mat,
    pub feature_noise: Mat,
}

pub fn sample_surrogate<R: Rng + ?Sized>(
    cfg: &ModelConfig,
    fm: &FeatureMap,
    rng: &mut R,
) -> Result<SurrogateTask> {
    cfg.validate()?;
    let induced = derive_induced(cfg, fm);
    let (latents, feature_noise, a) = latent_design(cfg, fm, rng);
    let epsilon = gaussian_vector(rng, cfg.n) * induced.sigma2.sqrt();
    let y = &a * &induced.beta_star + &epsilon;
    Ok(SurrogateTask {
        a,
        y,
        beta_star: induced.beta_star,
        sigma2: induced.sigma2,
        epsilon,
        latents,
        feature_noise,
    })
}

impl SurrogateTask {
    /// Attaches a second task `B = AOᵀ` sharing the responses.
    pub fn into_task_pair<R: Rng + ?Sized>(self, kind: RotationKind, rng: &mut R) -> Result<TaskPair> {
        let (x_b, rotation) = rotate_task(&self.a, kind, rng)?;
        Ok(TaskPair {
            x_a: self.a,
            x_b,
            rotation,
            y: self.y,
            latents: self.latents,
            feature_noise: self.feature_noise,
            responses: ResponseModel::Surrogate,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RngStream;

    fn rng(i: u64) -> rand_chacha::ChaCha8Rng {
        RngStream::new(11, i).rng()
    }

    #[test]
    fn axis_aligned_map_is_scaled_identity_block() {
        let cfg = ModelConfig::new(2, 3, 4, 1.0);
        let fm = build_feature_map(&cfg, &mut rng(0)).unwrap();
        let expected = Mat::from_row_slice(4, 2, &[2.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(fm.w, expected);
    }

    #[test]
    fn feature_map_satisfies_equal_orthogonal_columns() {
        for mode in [WMode::AxisAligned, WMode::RandomRotation] {
            let cfg = ModelConfig::new(4, 10, 40, 0.7).with_w_mode(mode);
            let fm = build_feature_map(&cfg, &mut rng(1)).unwrap();
            let pg = cfg.signal_scale();
            let err = (fm.w.transpose() * &fm.w - Mat::identity(4, 4) * pg).norm();
            assert!(err <= 1e-10 * pg * 2.0, "{mode:?}: {err}");
            // WWᵀ = pγ P_W with P_W built from a QR basis of range(W)
            let q = fm.w.clone().qr().q();
            let p_w = &q * q.transpose();
            let err = (&fm.w * fm.w.transpose() - p_w * pg).norm();
            assert!(err <= 1e-8 * pg, "{mode:?}: {err}");
        }
    }

    #[test]
    fn induced_parameters() {
        let cfg = ModelConfig::new(1, 10, 100, 1.0);
        let fm = build_feature_map(&cfg, &mut rng(2)).unwrap();
        let ind = derive_induced(&cfg, &fm);
        assert!((ind.sigma2 - 1.0 / 101.0).abs() < 1e-15);
        assert!((ind.sigma2 - 0.0099010).abs() < 1e-7);

        let cfg = ModelConfig::new(3, 10, 50, 2.0).with_w_mode(WMode::RandomRotation);
        let cfg = cfg.clone().with_random_theta(2.5, &mut rng(3));
        let fm = build_feature_map(&cfg, &mut rng(4)).unwrap();
        let ind = derive_induced(&cfg, &fm);
        let pg = cfg.signal_scale();
        let expected = pg / (pg + 1.0).powi(2) * cfg.theta_norm_sq();
        assert!(linalg::relative_gap(ind.beta_star.norm_squared(), expected) < 1e-10);

        // dense (I + WWᵀ)⁻¹Wθ and θᵀ(WᵀW + I)⁻¹θ
        let sigma = &fm.w * fm.w.transpose() + Mat::identity(50, 50);
        let dense_beta = sigma.lu().solve(&(&fm.w * &cfg.theta)).unwrap();
        assert!(linalg::relative_error(&ind.beta_star, &dense_beta) < 1e-10);
        let inner = fm.w.transpose() * &fm.w + Mat::identity(3, 3);
        let dense_sigma2 = cfg.theta.dot(&inner.lu().solve(&cfg.theta).unwrap());
        assert!(linalg::relative_gap(ind.sigma2, dense_sigma2) < 1e-10);
    }

    #[test]
    fn zero_theta_gives_zero_parameters() {
        let cfg = ModelConfig::new(2, 5, 9, 1.0).with_theta_norm_sq(0.0);
        let fm = build_feature_map(&cfg, &mut rng(5)).unwrap();
        let ind = derive_induced(&cfg, &fm);
        assert_eq!(ind.sigma2, 0.0);
        assert_eq!(ind.beta_star.norm(), 0.0);
        let s = sample_surrogate(&cfg, &fm, &mut rng(6)).unwrap();
        assert_eq!(s.y.norm(), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::new(0, 5, 9, 1.0).validate().is_err());
        assert!(ModelConfig::new(6, 5, 9, 1.0).validate().is_err());
        assert!(ModelConfig::new(2, 5, 4, 1.0).validate().is_err());
        assert!(ModelConfig::new(2, 5, 9, 0.0).validate().is_err());
        assert!(ModelConfig::new(2, 5, 9, f64::NAN).validate().is_err());
        assert!(ModelConfig::new(2, 5, 9, 1.0).with_theta(Vector::zeros(3)).validate().is_err());
        let degenerate = ModelConfig::new(2, 5, 5, 1.0);
        assert!(degenerate.validate().is_ok());
        assert!(degenerate.is_degenerate());
    }

    fn sample_covariance(rows: &Mat) -> Mat {
        rows.transpose() * rows / rows.nrows() as f64
    }

    #[test]
    fn latent_rows_have_model_covariance() {
        let fm = build_feature_map(&ModelConfig::new(2, 5, 5, 1.0), &mut rng(7)).unwrap();
        // unvalidated: many rows, few columns
        let tall = ModelConfig::new(2, 100_000, 5, 1.0);
        let (_, _, x) = latent_design(&tall, &fm, &mut rng(8));
        let sigma = &fm.w * fm.w.transpose() + Mat::identity(5, 5);
        let worst = (sample_covariance(&x) - sigma).amax();
        assert!(worst < 5e-2, "{worst}");
    }

    #[test]
    fn task_pair_structure() {
        for kind in [RotationKind::Haar, RotationKind::HaarDense, RotationKind::Identity] {
            let cfg = ModelConfig::new(3, 8, 30, 1.0).with_rotation(kind);
            let fm = build_feature_map(&cfg, &mut rng(9)).unwrap();
            let tp = sample_task_pair(&cfg, &fm, &mut rng(10)).unwrap();
            assert_eq!(tp.y, &tp.latents * &cfg.theta);
            let ga = &tp.x_a * tp.x_a.transpose();
            let gb = &tp.x_b * tp.x_b.transpose();
            assert!((&ga - &gb).norm() <= 1e-10 * ga.norm(), "{kind:?}");
            // X_B rows are O applied to X_A rows
            for i in 0..cfg.n {
                let row_a = tp.x_a.row(i).transpose();
                let row_b = tp.x_b.row(i).transpose();
                let mapped = tp.rotation.apply(&row_a).unwrap();
                assert!(linalg::relative_error(&mapped, &row_b) < 1e-10, "{kind:?}");
                let back = tp.rotation.apply_transpose(&row_b).unwrap();
                assert!(linalg::relative_error(&back, &row_a) < 1e-10, "{kind:?}");
            }
        }
    }

    #[test]
    fn partial_rotation_rejects_vectors_outside_domain() {
        let cfg = ModelConfig::new(2, 4, 20, 1.0);
        let fm = build_feature_map(&cfg, &mut rng(12)).unwrap();
        let tp = sample_task_pair(&cfg, &fm, &mut rng(13)).unwrap();
        let v = gaussian_vector(&mut rng(14), 20);
        assert_eq!(tp.rotation.apply(&v).unwrap_err(), ModelError::OutsideRotationDomain);
    }

    #[test]
    fn sampling_is_deterministic() {
        let cfg = ModelConfig::new(3, 10, 40, 1.0);
        let fm = build_feature_map(&cfg, &mut rng(15)).unwrap();
        let a = sample_task_pair(&cfg, &fm, &mut rng(16)).unwrap();
        let b = sample_task_pair(&cfg, &fm, &mut rng(16)).unwrap();
        assert_eq!(a.x_b, b.x_b);
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn surrogate_responses_and_covariance() {
        let cfg = ModelConfig::new(2, 5, 5, 1.0);
        let fm = build_feature_map(&cfg, &mut rng(17)).unwrap();
        let mut r = rng(18);
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..20_000 {
            let s = sample_surrogate(&cfg, &fm, &mut r).unwrap();
            assert!((&s.a * &s.beta_star + &s.epsilon - &s.y).norm() < 1e-12);
            rows.push(s.a);
            ys.extend(s.y.iter().copied());
        }
        let stacked = Mat::from_rows(
            &rows
                .iter()
                .flat_map(|m| m.row_iter().map(|r| r.into_owned()).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        );
        let sigma = &fm.w * fm.w.transpose() + Mat::identity(5, 5);
        let worst = (sample_covariance(&stacked) - sigma).amax();
        assert!(worst < 5e-2, "{worst}");
        let m = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / m;
        let var = ys.iter().map(|y| y * y).sum::<f64>() / m;
        assert!(mean.abs() <= 3.0 * (var / m).sqrt(), "{mean}");
    }
}
