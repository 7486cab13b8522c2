//! Seeded random-matrix primitives and least-squares kernels.
//!
//! Matrices are dense `nalgebra` values. Every routine is a pure function of
//! its inputs; randomness enters only through a caller-owned generator that
//! is derived from an [`RngStream`].

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rand::SeedableRng;
use thiserror::Error;

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Absolute floor used whenever a tolerance is scaled by a norm that may be zero.
pub const ABS_FLOOR: f64 = 1e-14;

/// Gram systems whose Cholesky condition estimate exceeds this are solved by SVD instead.
pub const CHOLESKY_CONDITION_LIMIT: f64 = 1e12;

/// Relative interpolation residual a minimum-norm solution must reach.
pub const INTERPOLATION_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("least-squares solver failure: {0}")]
    SolverFailure(String),
    #[error("QR breakdown: column {column} is numerically dependent")]
    QrBreakdown { column: usize },
    #[error("SVD did not converge")]
    SvdNoConvergence,
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Identifies one independent random stream: a root seed plus a stream index.
///
/// The same pair always yields the same draw sequence. Trials use
/// `stream_index = experiment << 32 | trial`, so parallel trials never share
/// a stream and results do not depend on scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub root_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(root_seed: u64, stream_index: u64) -> Self {
        Self { root_seed, stream_index }
    }

    pub fn for_trial(root_seed: u64, experiment: u32, trial: u32) -> Self {
        Self::new(root_seed, (u64::from(experiment) << 32) | u64::from(trial))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.root_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vector {
    Vector::from_iterator(len, (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// `rows × cols` matrix of i.i.d. standard normals, drawn in row-major order.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    Mat::from_row_slice(rows, cols, &data)
}

/// Haar-distributed `p × p` orthogonal matrix.
///
/// Householder QR of a Gaussian matrix, then each column of `Q` is multiplied
/// by `sign(R_ii)` so that the factorization is the unique one with a positive
/// `R` diagonal.
pub fn haar_orthogonal<R: Rng + ?Sized>(rng: &mut R, p: usize) -> Result<Mat> {
    let g = gaussian_matrix(rng, p, p);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        let rjj = r[(j, j)];
        if rjj == 0.0 || !rjj.is_finite() {
            return Err(LinalgError::QrBreakdown { column: j });
        }
        if rjj < 0.0 {
            col.neg_mut();
        }
    }
    Ok(q)
}

/// Haar-distributed `p × k` matrix with orthonormal columns (a uniform point on
/// the Stiefel manifold). Its law equals that of the first `k` columns of
/// [`haar_orthogonal`].
///
/// Computed as the positive-diagonal QR factor of a Gaussian matrix using two
/// Cholesky-QR passes, which keeps the cost dominated by matrix products when
/// `p ≫ k`.
pub fn haar_frame<R: Rng + ?Sized>(rng: &mut R, p: usize, k: usize) -> Result<Mat> {
    if k > p {
        return Err(LinalgError::DimensionMismatch(format!(
            "frame with {k} columns does not fit in dimension {p}"
        )));
    }
    let g = gaussian_matrix(rng, p, k);
    let q1 = cholesky_qr_pass(&g)?;
    cholesky_qr_pass(&q1)
}

/// One Cholesky-QR pass: returns `A R⁻¹` where `AᵀA = RᵀR` with `R` upper
/// triangular and positive on the diagonal.
fn cholesky_qr_pass(a: &Mat) -> Result<Mat> {
    let gram = a.transpose() * a;
    let chol = Cholesky::new(gram).ok_or(LinalgError::QrBreakdown { column: 0 })?;
    let r = chol.l().transpose();
    let r_inv = r
        .solve_upper_triangular(&Mat::identity(a.ncols(), a.ncols()))
        .ok_or(LinalgError::QrBreakdown { column: 0 })?;
    Ok(a * r_inv)
}

/// Relative distance `‖actual − expected‖ / max(‖expected‖, ABS_FLOOR)`.
pub fn relative_error(actual: &Vector, expected: &Vector) -> f64 {
    (actual - expected).norm() / expected.norm().max(ABS_FLOOR)
}

/// Scalar version of [`relative_error`].
pub fn relative_gap(actual: f64, expected: f64) -> f64 {
    (actual - expected).abs() / expected.abs().max(ABS_FLOOR)
}

enum GramFactor {
    Cholesky(Cholesky<f64, Dyn>),
    /// Pseudo-inverse `X⁺` (p × n) used when the Gram matrix is ill-conditioned.
    Pseudo(Mat),
}

/// Factorization of the row space of a wide matrix `X` (n × p, n ≤ p).
///
/// Holds a Cholesky factor of `XXᵀ`; when that is unavailable or its
/// condition estimate exceeds [`CHOLESKY_CONDITION_LIMIT`], an SVD-based
/// pseudo-inverse is used instead.
pub struct RowSpace<'a> {
    x: &'a Mat,
    factor: GramFactor,
}

impl<'a> RowSpace<'a> {
    pub fn new(x: &'a Mat) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || n > p {
            return Err(LinalgError::DimensionMismatch(format!(
                "row-space factorization needs 1 ≤ n ≤ p, got {n}×{p}"
            )));
        }
        let gram = x * x.transpose();
        let factor = match Cholesky::new(gram) {
            Some(chol) if cholesky_condition(&chol) <= CHOLESKY_CONDITION_LIMIT => {
                GramFactor::Cholesky(chol)
            }
            _ => GramFactor::Pseudo(pseudo_inverse(x)?),
        };
        Ok(Self { x, factor })
    }

    pub fn matrix(&self) -> &Mat {
        self.x
    }

    pub fn uses_cholesky(&self) -> bool {
        matches!(self.factor, GramFactor::Cholesky(_))
    }

    /// `Xᵀ(XXᵀ)⁻¹ r`, the minimum-norm solution of `Xβ = r`.
    fn lift(&self, r: &Vector) -> Vector {
        match &self.factor {
            GramFactor::Cholesky(chol) => self.x.tr_mul(&chol.solve(r)),
            GramFactor::Pseudo(pinv) => pinv * r,
        }
    }

    /// `β₀ + Xᵀ(XXᵀ)⁻¹(y − Xβ₀)`: the interpolator of `(X, y)` closest to `β₀`.
    pub fn min_norm(&self, y: &Vector, beta0: &Vector) -> Result<Vector> {
        let (n, p) = self.x.shape();
        if y.len() != n || beta0.len() != p {
            return Err(LinalgError::DimensionMismatch(format!(
                "expected y of length {n} and beta0 of length {p}, got {} and {}",
                y.len(),
                beta0.len()
            )));
        }
        let residual = y - self.x * beta0;
        let beta = beta0 + self.lift(&residual);
        let fit = (self.x * &beta - y).norm();
        let scale = y.norm().max(self.x.norm() * beta.norm()).max(ABS_FLOOR);
        if !beta.iter().all(|v| v.is_finite()) || fit > INTERPOLATION_TOL * scale {
            return Err(LinalgError::SolverFailure(format!(
                "interpolation residual {fit:.3e} exceeds tolerance (rank-deficient XXᵀ?)"
            )));
        }
        Ok(beta)
    }

    /// Splits `v` into its component in `range(Xᵀ)` and the orthogonal remainder.
    pub fn project(&self, v: &Vector) -> Result<(Vector, Vector)> {
        if v.len() != self.x.ncols() {
            return Err(LinalgError::DimensionMismatch(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.x.ncols()
            )));
        }
        let onto = self.lift(&(self.x * v));
        let residual = v - &onto;
        Ok((onto, residual))
    }

    /// `‖P_{Xᵀ} v‖²` computed as `(Xv)ᵀ(XXᵀ)⁻¹(Xv)` without forming the projection.
    pub fn projected_energy(&self, v: &Vector) -> f64 {
        let xv = self.x * v;
        match &self.factor {
            GramFactor::Cholesky(chol) => xv.dot(&chol.solve(&xv)),
            GramFactor::Pseudo(pinv) => (pinv * xv).norm_squared(),
        }
    }
}

fn cholesky_condition(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    let diag = l.diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| (lo.min(v.abs()), hi.max(v.abs())));
    if lo == 0.0 {
        f64::INFINITY
    } else {
        (hi / lo).powi(2)
    }
}

fn pseudo_inverse(x: &Mat) -> Result<Mat> {
    let svd = nalgebra::SVD::try_new(x.clone(), true, true, f64::EPSILON, 0)
        .ok_or(LinalgError::SvdNoConvergence)?;
    let smax = svd.singular_values.max();
    let cutoff = smax * (x.nrows().max(x.ncols()) as f64) * f64::EPSILON;
    svd.pseudo_inverse(cutoff)
        .map_err(|e| LinalgError::SolverFailure(e.to_string()))
}

/// The interpolator of `(x, y)` closest to `beta0` (minimum `‖β − β₀‖`).
pub fn min_norm_solve(x: &Mat, y: &Vector, beta0: &Vector) -> Result<Vector> {
    RowSpace::new(x)?.min_norm(y, beta0)
}

/// Returns `(P_{Xᵀ} v, v − P_{Xᵀ} v)`.
pub fn orth_projector_apply(x: &Mat, v: &Vector) -> Result<(Vector, Vector)> {
    RowSpace::new(x)?.project(v)
}

/// Thin singular value decomposition `X = U diag(s) Vᵀ` with `s` descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Mat,
    pub singular_values: Vector,
    pub v: Mat,
}

impl Svd {
    pub fn reconstruct(&self) -> Mat {
        &self.u * Mat::from_diagonal(&self.singular_values) * self.v.transpose()
    }
}

pub fn svd(x: &Mat) -> Result<Svd> {
    let raw = nalgebra::SVD::try_new(x.clone(), true, true, f64::EPSILON, 0)
        .ok_or(LinalgError::SvdNoConvergence)?;
    let u = raw.u.ok_or(LinalgError::SvdNoConvergence)?;
    let v_t = raw.v_t.ok_or(LinalgError::SvdNoConvergence)?;
    let s = raw.singular_values;

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let singular_values = Vector::from_iterator(s.len(), order.iter().map(|&i| s[i]));
    let u = Mat::from_columns(&order.iter().map(|&i| u.column(i)).collect::<Vec<_>>());
    let v = Mat::from_columns(
        &order
            .iter()
            .map(|&i| v_t.row(i).transpose())
            .collect::<Vec<_>>(),
    );
    Ok(Svd { u, singular_values, v })
}

/// Largest eigenvalue of `XᵀX`, read off the (smaller) Gram matrix.
pub fn largest_gram_eigenvalue(x: &Mat) -> f64 {
    let gram = if x.nrows() <= x.ncols() {
        x * x.transpose()
    } else {
        x.transpose() * x
    };
    SymmetricEigen::new(gram).eigenvalues.max()
}
