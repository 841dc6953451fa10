//! Unscented Kalman filter with additive noise.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, cholesky_strict, log_det, mahalanobis, symmetrize};

/// Mean and covariance of a Gaussian state estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianBelief {
    /// Validates dimensions and symmetrizes the covariance.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty state".into()));
        }
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: cov.nrows(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite belief".into()));
        }
        Ok(Self {
            mean,
            cov: symmetrize(&cov),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Scaled unscented transform parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UkfConfig {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UkfConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

impl UkfConfig {
    /// `λ = α²(n + κ) − n`.
    pub fn lambda(&self, n: usize) -> f64 {
        self.alpha * self.alpha * (n as f64 + self.kappa) - n as f64
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidArgument("alpha must be positive".into()));
        }
        if !(self.alpha * self.alpha * (n as f64 + self.kappa) > 0.0) {
            return Err(Error::InvalidArgument("alpha²(n + kappa) must be positive".into()));
        }
        Ok(())
    }
}

/// Dynamics, measurement map and additive noise of a tracking problem.
pub trait SystemModel {
    fn state_dim(&self) -> usize;
    fn meas_dim(&self) -> usize;
    fn transition(&self, x: &DVector<f64>) -> DVector<f64>;
    fn measure(&self, x: &DVector<f64>) -> DVector<f64>;
    fn process_noise(&self) -> &DMatrix<f64>;
    fn measurement_noise(&self) -> &DMatrix<f64>;

    /// `y − ŷ`; override for wrapped components such as angles.
    fn residual(&self, y: &DVector<f64>, predicted: &DVector<f64>) -> DVector<f64> {
        y - predicted
    }
}

/// `x' = F x`, `y = H x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub f: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl LinearModel {
    pub fn new(f: DMatrix<f64>, h: DMatrix<f64>, q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let (n, m) = (f.nrows(), h.nrows());
        let shapes = [
            (f.ncols(), n),
            (h.ncols(), n),
            (q.nrows(), n),
            (q.ncols(), n),
            (r.nrows(), m),
            (r.ncols(), m),
        ];
        if let Some((got, expected)) = shapes.into_iter().find(|(g, e)| g != e) {
            return Err(Error::DimensionMismatch { expected, got });
        }
        Ok(Self { f, h, q, r })
    }
}

impl SystemModel for LinearModel {
    fn state_dim(&self) -> usize {
        self.f.nrows()
    }

    fn meas_dim(&self) -> usize {
        self.h.nrows()
    }

    fn transition(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.f * x
    }

    fn measure(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.h * x
    }

    fn process_noise(&self) -> &DMatrix<f64> {
        &self.q
    }

    fn measurement_noise(&self) -> &DMatrix<f64> {
        &self.r
    }
}

/// `2n + 1` sigma points with mean and covariance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSet {
    pub points: Vec<DVector<f64>>,
    pub mean_weights: Vec<f64>,
    pub cov_weights: Vec<f64>,
}

pub fn sigma_points(belief: &GaussianBelief, cfg: &UkfConfig) -> Result<SigmaSet> {
    let n = belief.dim();
    cfg.validate(n)?;
    let lambda = cfg.lambda(n);
    // n + λ formed directly; the subtraction cancels for small α
    let c = cfg.alpha * cfg.alpha * (n as f64 + cfg.kappa);
    let l = cholesky_jittered(&belief.cov)?.l() * c.sqrt();
    let mut points = Vec::with_capacity(2 * n + 1);
    points.push(belief.mean.clone());
    for i in 0..n {
        points.push(&belief.mean + l.column(i));
    }
    for i in 0..n {
        points.push(&belief.mean - l.column(i));
    }
    let w = 0.5 / c;
    let mut mean_weights = vec![w; 2 * n + 1];
    let mut cov_weights = vec![w; 2 * n + 1];
    mean_weights[0] = lambda / c;
    cov_weights[0] = lambda / c + (1.0 - cfg.alpha * cfg.alpha + cfg.beta);
    Ok(SigmaSet {
        points,
        mean_weights,
        cov_weights,
    })
}

/// Weighted mean taken relative to the centre point; the centre weight is
/// large and negative for small `α`, so the direct sum cancels badly.
fn weighted_mean(values: &[DVector<f64>], weights: &[f64]) -> DVector<f64> {
    let centre = &values[0];
    let mut acc = DVector::zeros(centre.len());
    for (v, w) in values.iter().zip(weights).skip(1) {
        acc += (v - centre) * *w;
    }
    centre + acc
}

fn weighted_cross(
    a: &[DVector<f64>],
    a_mean: &DVector<f64>,
    b: &[DVector<f64>],
    b_mean: &DVector<f64>,
    weights: &[f64],
) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(a_mean.len(), b_mean.len());
    for ((x, y), w) in a.iter().zip(b).zip(weights) {
        acc += (x - a_mean) * (y - b_mean).transpose() * *w;
    }
    acc
}

fn check_model<M: SystemModel + ?Sized>(belief: &GaussianBelief, model: &M) -> Result<()> {
    if belief.dim() != model.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.state_dim(),
            got: belief.dim(),
        });
    }
    Ok(())
}

/// Unscented time update with additive process noise.
pub fn ukf_predict<M: SystemModel + ?Sized>(
    belief: &GaussianBelief,
    model: &M,
    cfg: &UkfConfig,
) -> Result<GaussianBelief> {
    check_model(belief, model)?;
    let set = sigma_points(belief, cfg)?;
    let moved: Vec<DVector<f64>> = set.points.iter().map(|x| model.transition(x)).collect();
    let mean = weighted_mean(&moved, &set.mean_weights);
    let cov = weighted_cross(&moved, &mean, &moved, &mean, &set.cov_weights) + model.process_noise();
    GaussianBelief::new(mean, cov)
}

/// Result of a measurement update.
#[derive(Debug, Clone, PartialEq)]
pub struct UkfUpdate {
    pub belief: GaussianBelief,
    pub innovation: DVector<f64>,
    pub innovation_cov: DMatrix<f64>,
    /// `ỹᵀ S⁻¹ ỹ`.
    pub nis: f64,
}

/// Unscented measurement update.
pub fn ukf_update<M: SystemModel + ?Sized>(
    belief: &GaussianBelief,
    model: &M,
    cfg: &UkfConfig,
    y: &DVector<f64>,
) -> Result<UkfUpdate> {
    check_model(belief, model)?;
    if y.len() != model.meas_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.meas_dim(),
            got: y.len(),
        });
    }
    let set = sigma_points(belief, cfg)?;
    let z: Vec<DVector<f64>> = set.points.iter().map(|x| model.measure(x)).collect();
    // residuals about the centre so wrapped components stay consistent
    let dz: Vec<DVector<f64>> = z.iter().map(|zi| model.residual(zi, &z[0])).collect();
    let dz_mean = weighted_mean(&dz, &set.mean_weights);
    let z_mean = &z[0] + &dz_mean;
    let s = symmetrize(
        &(weighted_cross(&dz, &dz_mean, &dz, &dz_mean, &set.cov_weights) + model.measurement_noise()),
    );
    let pxz = weighted_cross(&set.points, &belief.mean, &dz, &dz_mean, &set.cov_weights);
    let chol = cholesky_strict(&s, "innovation covariance").map_err(|_| Error::SingularInnovation)?;
    let innovation = model.residual(y, &z_mean);
    let gain = chol.solve(&pxz.transpose()).transpose();
    let mean = &belief.mean + &gain * &innovation;
    let cov = &belief.cov - &gain * &s * gain.transpose();
    let nis = mahalanobis(&chol, &innovation);
    Ok(UkfUpdate {
        belief: GaussianBelief::new(mean, cov)?,
        innovation,
        innovation_cov: s,
        nis,
    })
}

/// `log det P`, with a flag set when `P` has no Cholesky factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogDet {
    pub value: f64,
    pub degenerate: bool,
}

pub fn log_det_cov(belief: &GaussianBelief) -> LogDet {
    match nalgebra::Cholesky::new(symmetrize(&belief.cov)) {
        Some(c) => LogDet {
            value: log_det(&c),
            degenerate: false,
        },
        None => LogDet {
            value: f64::NEG_INFINITY,
            degenerate: true,
        },
    }
}

/// `(x − μ)ᵀ P⁻¹ (x − μ)` against the true state.
pub fn nees(belief: &GaussianBelief, truth: &DVector<f64>) -> Result<f64> {
    let chol = cholesky_jittered(&belief.cov)?;
    Ok(mahalanobis(&chol, &(truth - &belief.mean)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sigma_point_examples() {
        let b = GaussianBelief::new(DVector::from_vec(vec![0.0]), DMatrix::identity(1, 1)).unwrap();
        let s = sigma_points(&b, &UkfConfig::default()).unwrap();
        assert_abs_diff_eq!(s.points[0][0], 0.0);
        assert_abs_diff_eq!(s.points[1][0], 1e-3, epsilon = 1e-15);
        assert_abs_diff_eq!(s.points[2][0], -1e-3, epsilon = 1e-15);

        let b = GaussianBelief::new(DVector::from_vec(vec![1.0, 2.0]), DMatrix::identity(2, 2)).unwrap();
        let cfg = UkfConfig {
            alpha: 1.0,
            beta: 2.0,
            kappa: 0.0,
        };
        let s = sigma_points(&b, &cfg).unwrap();
        assert_abs_diff_eq!((&s.points[1] - &b.mean).norm(), 2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(s.points[3][0], 1.0 - 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn identity_predict_unchanged() {
        let n = 2;
        let model = LinearModel::new(
            DMatrix::identity(n, n),
            DMatrix::identity(n, n),
            DMatrix::zeros(n, n),
            DMatrix::identity(n, n),
        )
        .unwrap();
        let b = GaussianBelief::new(
            DVector::from_vec(vec![3.0, -1.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
        )
        .unwrap();
        let p = ukf_predict(&b, &model, &UkfConfig::default()).unwrap();
        assert!((p.mean - &b.mean).amax() < 1e-9);
        assert!((p.cov - &b.cov).amax() < 1e-9);
    }

    #[test]
    fn exact_measurement_gives_zero_innovation() {
        let model = LinearModel::new(
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::zeros(2, 2),
            DMatrix::identity(1, 1),
        )
        .unwrap();
        let b = GaussianBelief::new(DVector::from_vec(vec![0.5, 1.0]), DMatrix::identity(2, 2)).unwrap();
        let u = ukf_update(&b, &model, &UkfConfig::default(), &DVector::from_vec(vec![0.5])).unwrap();
        assert!(u.nis.abs() < 1e-18);
        assert!((&u.belief.mean - &b.mean).amax() < 1e-9);
    }

    #[test]
    fn log_det_examples() {
        let b = |d: f64| GaussianBelief::new(DVector::zeros(2), DMatrix::identity(2, 2) * d).unwrap();
        assert_eq!(log_det_cov(&b(1.0)).value, 0.0);
        assert_abs_diff_eq!(log_det_cov(&b(std::f64::consts::E)).value, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(log_det_cov(&b(1e-4)).value, -18.420680743952367, epsilon = 1e-12);
        let singular = GaussianBelief::new(DVector::zeros(2), DMatrix::zeros(2, 2)).unwrap();
        let ld = log_det_cov(&singular);
        assert!(ld.degenerate && ld.value == f64::NEG_INFINITY);
    }

    #[test]
    fn singular_innovation_rejected() {
        let model = LinearModel::new(
            DMatrix::identity(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let b = GaussianBelief::new(DVector::zeros(1), DMatrix::identity(1, 1)).unwrap();
        assert_eq!(
            ukf_update(&b, &model, &UkfConfig::default(), &DVector::zeros(1)).unwrap_err(),
            Error::SingularInnovation
        );
    }
}
