//! Support-point possibilistic filter.
//!
//! A deterministic sparse grid is pushed through the dynamics, widened by a
//! finite process-noise set, and contracted by a hard compatibility gate whose
//! geometry is the minimum-volume ellipsoid of the predicted measurements.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::gaussian::{GaussianBelief, SystemModel};
use crate::linalg::{cholesky_jittered, cholesky_strict, log_det, mahalanobis, symmetrize};
use crate::possibility::SupportCloud;
use crate::width::{ewm_report, UpdateDiagnostics, WidthReport};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Support shell radius, in standard deviations, used when seeding a grid
/// from a Gaussian belief.
pub const SHELL_SIGMA: f64 = 3.0;

/// Gate inflation applied once when every point is pruned.
pub const GATE_INFLATION: f64 = 4.0;

/// Process-noise widening factor and attempts after the inflated gate still
/// prunes everything.
pub const NOISE_GROWTH: f64 = 2.0;
pub const MAX_NOISE_WIDENINGS: usize = 16;

pub const DEFAULT_HULL_SHARE: f64 = 0.15;

/// Covariance assigned to a single-point extraction.
pub const DEGENERATE_SPREAD: f64 = 1e-9;

const AXIS_GRADE: f64 = 0.606_530_659_712_633_4; // exp(-1/2)
const PAIR_GRADE: f64 = 0.367_879_441_171_442_3; // exp(-1)

/// `{z : (z − c)ᵀ shape⁻¹ (z − c) ≤ 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
    /// Set when the shape needed jitter or regularization.
    pub degenerate: bool,
}

impl Ellipsoid {
    /// Accepts a symmetric PD shape; a near-singular one is jittered and flagged.
    pub fn new(center: DVector<f64>, shape: DMatrix<f64>) -> Result<Self> {
        if shape.nrows() != center.len() || shape.ncols() != center.len() {
            return Err(Error::DimensionMismatch {
                expected: center.len(),
                got: shape.nrows(),
            });
        }
        let shape = symmetrize(&shape);
        if cholesky_strict(&shape, "ellipsoid shape").is_ok() {
            return Ok(Self {
                center,
                shape,
                degenerate: false,
            });
        }
        let chol = cholesky_jittered(&shape)?;
        let l = chol.l();
        Ok(Self {
            center,
            shape: &l * l.transpose(),
            degenerate: true,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `(z − c)ᵀ shape⁻¹ (z − c)`.
    pub fn mahalanobis(&self, z: &DVector<f64>) -> Result<f64> {
        let chol = cholesky_jittered(&self.shape)?;
        Ok(mahalanobis(&chol, &(z - &self.center)))
    }

    pub fn log_det(&self) -> Result<f64> {
        Ok(log_det(&cholesky_jittered(&self.shape)?))
    }
}

/// Sparse grid level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum SmolyakLevel {
    /// Centre and the `2n` axis points.
    Two,
    /// Level two plus the `4·C(n, 2)` diagonal pair points.
    Three,
}

impl TryFrom<u8> for SmolyakLevel {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            2 => Ok(Self::Two),
            3 => Ok(Self::Three),
            _ => Err(Error::Config(format!("smolyak level {v} not in {{2, 3}}"))),
        }
    }
}

impl From<SmolyakLevel> for u8 {
    fn from(level: SmolyakLevel) -> u8 {
        match level {
            SmolyakLevel::Two => 2,
            SmolyakLevel::Three => 3,
        }
    }
}

impl SmolyakLevel {
    pub fn point_count(self, n: usize) -> usize {
        match self {
            Self::Two => 2 * n + 1,
            Self::Three => 2 * n * n + 1,
        }
    }
}

/// Grid points and seed grades in whitened coordinates.
fn whitened_grid(n: usize, level: SmolyakLevel) -> Vec<(DVector<f64>, f64)> {
    let mut out = Vec::with_capacity(level.point_count(n));
    out.push((DVector::zeros(n), 1.0));
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut v = DVector::zeros(n);
            v[i] = s;
            out.push((v, AXIS_GRADE));
        }
    }
    if level == SmolyakLevel::Three {
        for i in 0..n {
            for j in i + 1..n {
                for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    let mut v = DVector::zeros(n);
                    v[i] = si;
                    v[j] = sj;
                    out.push((v, PAIR_GRADE));
                }
            }
        }
    }
    out
}

/// Grade-weighted scatter of a pristine grid is this multiple of its shape.
pub fn grid_scatter_factor(n: usize, level: SmolyakLevel) -> f64 {
    let grid = whitened_grid(n, level);
    let total: f64 = grid.iter().map(|(_, g)| g).sum();
    grid.iter().map(|(v, g)| g * v[0] * v[0]).sum::<f64>() / total
}

/// Sparse grid on the ellipsoid: whitened grid points mapped through the
/// shape's Cholesky factor, seeded with a Gaussian grade profile.
pub fn smolyak_grid(support: &Ellipsoid, level: SmolyakLevel) -> Result<SupportCloud> {
    let l = cholesky_jittered(&support.shape)?.l();
    let (points, grades) = whitened_grid(support.dim(), level)
        .into_iter()
        .map(|(v, g)| (&support.center + &l * v, g))
        .unzip();
    SupportCloud::new(points, grades)
}

/// `⋃ᵢ {f(χᶦ)} ⊕ 𝒲` with sup-min grades; every noise vertex has grade 1.
pub fn minkowski_propagate<F>(
    cloud: &SupportCloud,
    f: F,
    noise_vertices: &[DVector<f64>],
) -> Result<SupportCloud>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if noise_vertices.is_empty() {
        return Err(Error::InvalidArgument(
            "noise support needs at least one vertex".into(),
        ));
    }
    let mut points = Vec::with_capacity(cloud.len() * noise_vertices.len());
    let mut grades = Vec::with_capacity(points.capacity());
    for (p, g) in cloud.points().iter().zip(cloud.grades()) {
        let moved = f(p);
        for w in noise_vertices {
            if w.len() != moved.len() {
                return Err(Error::DimensionMismatch {
                    expected: moved.len(),
                    got: w.len(),
                });
            }
            points.push(&moved + w);
            grades.push(g.min(1.0));
        }
    }
    SupportCloud::new(points, grades)
}

/// Vertices of the axis-aligned box `±k·σᵢ` of a covariance; axes with zero
/// variance are not split.
pub fn box_noise_vertices(q: &DMatrix<f64>, k_sigma: f64) -> Vec<DVector<f64>> {
    let n = q.nrows();
    let half: Vec<f64> = (0..n).map(|i| k_sigma * q[(i, i)].max(0.0).sqrt()).collect();
    let active: Vec<usize> = (0..n).filter(|&i| half[i] > 0.0).collect();
    (0..1usize << active.len())
        .map(|mask| {
            let mut v = DVector::zeros(n);
            for (bit, &axis) in active.iter().enumerate() {
                v[axis] = if mask >> bit & 1 == 1 { half[axis] } else { -half[axis] };
            }
            v
        })
        .collect()
}

fn mean_squared_radius(points: &[DVector<f64>], center: &DVector<f64>) -> f64 {
    points.iter().map(|p| (p - center).norm_squared()).sum::<f64>() / points.len() as f64
}

/// Khachiyan iteration with away steps on points in general position.
fn khachiyan(points: &[DVector<f64>], tol: f64) -> (DVector<f64>, DMatrix<f64>) {
    const REFRESH: usize = 32;
    let d = points[0].len();
    let n = points.len();
    let dim = (d + 1) as f64;
    let lifted: Vec<DVector<f64>> = points.iter().map(|p| p.clone().insert_row(d, 1.0)).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut u = vec![1.0 / n as f64; n];
    let mut m = vec![0.0; n];
    let mut x_inv = DMatrix::zeros(d + 1, d + 1);
    for iter in 0..200_000 {
        if iter % REFRESH == 0 {
            let mut x = DMatrix::zeros(d + 1, d + 1);
            for &i in &active {
                x.ger(u[i], &lifted[i], &lifted[i], 1.0);
            }
            let Some(chol) = x.cholesky() else { break };
            x_inv = chol.inverse();
            for &i in &active {
                m[i] = lifted[i].dot(&(&x_inv * &lifted[i]));
            }
            // drop points that cannot touch the optimal ellipsoid
            let eps = active.iter().map(|&i| m[i]).fold(0.0, f64::max) - dim;
            let cut = dim * (1.0 + eps / 2.0 - (eps * (4.0 + eps - 4.0 / dim)).max(0.0).sqrt() / 2.0);
            let before = active.len();
            active.retain(|&i| m[i] >= cut);
            if active.len() < before {
                let mut dropped = 0.0;
                for i in 0..n {
                    if u[i] > 0.0 && m[i] < cut {
                        dropped += u[i];
                        u[i] = 0.0;
                    }
                }
                if dropped > 0.0 {
                    u.iter_mut().for_each(|w| *w /= 1.0 - dropped);
                    let mut x = DMatrix::zeros(d + 1, d + 1);
                    for &i in &active {
                        x.ger(u[i], &lifted[i], &lifted[i], 1.0);
                    }
                    let Some(chol) = x.cholesky() else { break };
                    x_inv = chol.inverse();
                    for &i in &active {
                        m[i] = lifted[i].dot(&(&x_inv * &lifted[i]));
                    }
                }
            }
        }
        let (jp, mp) = active
            .iter()
            .map(|&i| (i, m[i]))
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let (jm, mm) = active
            .iter()
            .filter(|&&i| u[i] > 0.0)
            .map(|&i| (i, m[i]))
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
        let eps_plus = mp / dim - 1.0;
        let eps_minus = 1.0 - mm / dim;
        if eps_plus <= tol {
            break;
        }
        // u ← (1 − t) u + t e_j, with t < 0 for an away step
        let (j, t) = if eps_plus >= eps_minus {
            (jp, (mp - dim) / (dim * (mp - 1.0)))
        } else {
            let uj = u[jm];
            (jm, -((dim - mm) / (dim * (mm - 1.0))).min(uj / (1.0 - uj)))
        };
        u.iter_mut().for_each(|w| *w *= 1.0 - t);
        u[j] += t;
        if u[j] < 1e-300 {
            u[j] = 0.0;
        }
        // Sherman-Morrison on X' = (1 − t) X + t q qᵀ
        let k = &x_inv * &lifted[j];
        let denom = 1.0 - t + t * m[j];
        for &i in &active {
            let kij = lifted[i].dot(&k);
            m[i] = (m[i] - t * kij * kij / denom) / (1.0 - t);
        }
        x_inv.ger(-t / denom, &k, &k, 1.0);
        x_inv /= 1.0 - t;
    }
    let center = points
        .iter()
        .zip(&u)
        .fold(DVector::zeros(d), |acc, (p, w)| acc + p * *w);
    let mut scatter = DMatrix::zeros(d, d);
    for (p, w) in points.iter().zip(&u) {
        let dp = p - &center;
        scatter += &dp * dp.transpose() * *w;
    }
    (center, scatter * d as f64)
}

/// Minimum-volume enclosing ellipsoid to relative tolerance `tol`.
///
/// Rank-deficient sets are solved in their affine hull and padded with
/// `tol · mean squared radius` in the missing directions. Fewer than two
/// distinct points give a flagged `tol · I` ball.
pub fn mvee(points: &[DVector<f64>], tol: f64) -> Result<Ellipsoid> {
    if !(tol > 0.0 && tol < 0.1) {
        return Err(Error::InvalidArgument(format!("mvee tolerance {tol} outside (0, 0.1)")));
    }
    let Some(first) = points.first() else {
        return Err(Error::InvalidArgument("mvee of an empty set".into()));
    };
    let d = first.len();
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: p.len(),
        });
    }
    let centroid = points.iter().fold(DVector::zeros(d), |acc, p| acc + p) / points.len() as f64;
    let msr = mean_squared_radius(points, &centroid);
    if points.len() < 2 || msr == 0.0 {
        return Ok(Ellipsoid {
            center: centroid,
            shape: DMatrix::identity(d, d) * tol,
            degenerate: true,
        });
    }
    if d == 1 {
        let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        let half = 0.5 * (hi - lo);
        return Ellipsoid::new(
            DVector::from_element(1, 0.5 * (lo + hi)),
            DMatrix::from_element(1, 1, half * half),
        );
    }
    // principal directions of the centred set
    let mut cov = DMatrix::zeros(d, d);
    for p in points {
        let dp = p - &centroid;
        cov += &dp * dp.transpose();
    }
    let eig = SymmetricEigen::new(cov / points.len() as f64);
    let top = eig.eigenvalues.amax();
    let keep: Vec<usize> = (0..d).filter(|&i| eig.eigenvalues[i] > 1e-12 * top).collect();
    let k = keep.len();
    let basis = DMatrix::from_columns(&keep.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
    let reduced: Vec<DVector<f64>> = points.iter().map(|p| basis.transpose() * (p - &centroid)).collect();
    let (c_red, s_red) = if k == 1 {
        let lo = reduced.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let hi = reduced.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        let half = 0.5 * (hi - lo);
        (DVector::from_element(1, 0.5 * (lo + hi)), DMatrix::from_element(1, 1, half * half))
    } else {
        khachiyan(&reduced, tol)
    };
    // scale so every point is inside
    let chol = cholesky_jittered(&s_red)?;
    let worst = reduced
        .iter()
        .map(|p| mahalanobis(&chol, &(p - &c_red)))
        .fold(0.0, f64::max);
    let s_red = s_red * worst.max(1.0);
    let center = &centroid + &basis * c_red;
    let mut shape = &basis * s_red * basis.transpose();
    let degenerate = k < d;
    if degenerate {
        shape += DMatrix::identity(d, d) * (tol * msr);
    }
    let mut e = Ellipsoid::new(center, shape)?;
    e.degenerate |= degenerate;
    Ok(e)
}

/// Outcome of the hard compatibility gate.
#[derive(Debug, Clone, PartialEq)]
pub struct GateOutcome {
    pub mask: Vec<bool>,
    pub statistics: Vec<f64>,
    pub prune_count: usize,
    pub min_stat: f64,
}

impl GateOutcome {
    pub fn is_total_pruning(&self) -> bool {
        self.prune_count == self.mask.len()
    }
}

/// `dᶦ² = eᶦᵀ Π_e⁻¹ eᶦ ≤ r²` on measurement residuals.
pub fn compatibility_gate(residuals: &[DVector<f64>], spread: &Ellipsoid, r2: f64) -> Result<GateOutcome> {
    if !(r2 > 0.0) {
        return Err(Error::InvalidArgument(format!("gate radius {r2}")));
    }
    let chol = cholesky_strict(&spread.shape, "compatibility spread")?;
    let statistics: Vec<f64> = residuals.iter().map(|e| mahalanobis(&chol, e)).collect();
    let mask: Vec<bool> = statistics.iter().map(|d| *d <= r2).collect();
    let prune_count = mask.iter().filter(|m| !**m).count();
    let min_stat = statistics.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(GateOutcome {
        mask,
        statistics,
        prune_count,
        min_stat,
    })
}

/// `χ²(m)` 99th percentile.
pub fn default_gate_r2(meas_dim: usize) -> f64 {
    ChiSquared::new(meas_dim as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.99)
}

/// Filter settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EspfConfig {
    pub smolyak_level: SmolyakLevel,
    pub gate_r2: f64,
    /// Sensor spread `Π_y` added to the measurement ellipsoid.
    pub sensor_spread: DMatrix<f64>,
    pub noise_vertices: Vec<DVector<f64>>,
    pub mvee_tol: f64,
    /// Width of the graded compatibility inside the gate; `None` keeps the
    /// pure 0/1 gate.
    pub soft_scale: Option<f64>,
    /// Share of the predicted measurement hull added to the sensor spread
    /// when grading. Bounds how far one update can contract a wide cloud.
    pub hull_share: f64,
}

impl EspfConfig {
    /// Level 3, `χ²` gate, 3σ box noise support and unit soft grading.
    pub fn for_model<M: SystemModel + ?Sized>(model: &M) -> Self {
        Self {
            smolyak_level: SmolyakLevel::Three,
            gate_r2: default_gate_r2(model.meas_dim()),
            sensor_spread: model.measurement_noise().clone(),
            noise_vertices: box_noise_vertices(model.process_noise(), SHELL_SIGMA),
            mvee_tol: 1e-3,
            soft_scale: Some(1.0),
            hull_share: DEFAULT_HULL_SHARE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gate_r2 > 0.0 && self.gate_r2.is_finite()) {
            return Err(Error::Config(format!("gate r² {} must be positive", self.gate_r2)));
        }
        if !(self.mvee_tol > 0.0 && self.mvee_tol < 0.1) {
            return Err(Error::Config(format!("mvee_tol {} outside (0, 0.1)", self.mvee_tol)));
        }
        if self.noise_vertices.is_empty() {
            return Err(Error::Config("noise support needs at least one vertex".into()));
        }
        if let Some(s) = self.soft_scale {
            if !(s > 0.0) {
                return Err(Error::Config("soft_scale must be positive".into()));
            }
        }
        if !(0.0..=1.0).contains(&self.hull_share) {
            return Err(Error::Config(format!("hull_share {} outside [0, 1]", self.hull_share)));
        }
        if self.sensor_spread.nrows() != self.sensor_spread.ncols() {
            return Err(Error::Config("sensor spread must be square".into()));
        }
        Ok(())
    }
}

/// Result of one possibilistic measurement update.
#[derive(Debug, Clone, PartialEq)]
pub struct EspfUpdate {
    pub cloud: SupportCloud,
    pub diagnostics: UpdateDiagnostics,
    pub measurement_ellipsoid: Ellipsoid,
    /// The gate had to be widened to keep any point.
    pub gate_inflated: bool,
}

/// Gate, grade, prune and normalize the predicted cloud against `y`.
///
/// Survivors of the hard gate are graded `min(π, κ)`; with a soft scale `s`,
/// `κ = exp(−½ (e − e_min)/s)` where `e` is the residual statistic against
/// `Π_y + h·MVEE` (`h` the hull share) and `e_min` its smallest value among
/// survivors.
pub fn espf_update<M: SystemModel + ?Sized>(
    predicted: &SupportCloud,
    y: &DVector<f64>,
    model: &M,
    cfg: &EspfConfig,
) -> Result<EspfUpdate> {
    cfg.validate()?;
    if y.len() != model.meas_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.meas_dim(),
            got: y.len(),
        });
    }
    let projected: Vec<DVector<f64>> = predicted.points().iter().map(|p| model.measure(p)).collect();
    let residuals: Vec<DVector<f64>> = projected.iter().map(|z| model.residual(y, z)).collect();
    let hull = mvee(&projected, cfg.mvee_tol)?;
    let spread = Ellipsoid::new(hull.center.clone(), &hull.shape + &cfg.sensor_spread)?;

    let first = compatibility_gate(&residuals, &spread, cfg.gate_r2)?;
    let compatible_possibility = first
        .mask
        .iter()
        .zip(predicted.grades())
        .filter(|(m, _)| **m)
        .map(|(_, g)| *g)
        .fold(0.0, f64::max);
    let diagnostics = UpdateDiagnostics {
        prune_count: first.prune_count,
        min_gate_stat: first.min_stat,
        gate_r2: cfg.gate_r2,
        compatible_possibility,
    };
    let (gate, gate_inflated) = if first.is_total_pruning() {
        let wide = compatibility_gate(&residuals, &spread, cfg.gate_r2 * GATE_INFLATION)?;
        if wide.is_total_pruning() {
            return Err(Error::EvidenceContradiction);
        }
        (wide, true)
    } else {
        (first, false)
    };

    let kappa: Vec<f64> = match cfg.soft_scale {
        None => gate.mask.iter().map(|m| if *m { 1.0 } else { 0.0 }).collect(),
        Some(scale) => {
            let grading = &cfg.sensor_spread + &hull.shape * cfg.hull_share;
            let chol = cholesky_jittered(&grading)?;
            let e: Vec<f64> = residuals.iter().map(|r| mahalanobis(&chol, r)).collect();
            let e_min = e
                .iter()
                .zip(&gate.mask)
                .filter(|(_, m)| **m)
                .map(|(v, _)| *v)
                .fold(f64::INFINITY, f64::min);
            e.iter()
                .zip(&gate.mask)
                .map(|(v, m)| if *m { (-0.5 * (v - e_min) / scale).exp() } else { 0.0 })
                .collect()
        }
    };
    let grades: Vec<f64> = predicted.grades().iter().zip(&kappa).map(|(g, k)| g.min(*k)).collect();
    let cloud = predicted.with_grades(grades)?.prune()?.normalize()?;
    Ok(EspfUpdate {
        cloud,
        diagnostics,
        measurement_ellipsoid: hull,
        gate_inflated,
    })
}

/// `log` of the volume of the unit `n`-ball.
pub fn log_unit_ball_volume(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    h * std::f64::consts::PI.ln() - ln_gamma(h + 1.0)
}

/// `H_π = ½ log det Σ + (n/2)(log 2 − γ) + log c_n` for a Gaussian-profile
/// possibility distribution.
pub fn possibilistic_entropy_gaussian(cov: &DMatrix<f64>) -> Result<f64> {
    let chol = cholesky_strict(cov, "covariance")?;
    let n = cov.nrows() as f64;
    Ok(0.5 * log_det(&chol) + 0.5 * n * (std::f64::consts::LN_2 - EULER_GAMMA) + log_unit_ball_volume(cov.nrows()))
}

/// Grade-weighted moments of a cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianLimitExtract {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub h_pi: f64,
    pub degenerate: bool,
}

/// Weighted mean and scatter with weights proportional to grade.
pub fn gaussian_limit_extract(cloud: &SupportCloud) -> Result<GaussianLimitExtract> {
    let n = cloud.dim();
    let total: f64 = cloud.grades().iter().sum();
    if total <= 0.0 {
        return Err(Error::TotalIncompatibility);
    }
    let mean = cloud
        .points()
        .iter()
        .zip(cloud.grades())
        .fold(DVector::zeros(n), |acc, (p, g)| acc + p * (*g / total));
    let mut scatter = DMatrix::zeros(n, n);
    for (p, g) in cloud.points().iter().zip(cloud.grades()) {
        let d = p - &mean;
        scatter += &d * d.transpose() * (*g / total);
    }
    let scatter = symmetrize(&scatter);
    let positive = cloud.grades().iter().filter(|g| **g > 0.0).count();
    let (cov, degenerate) = if positive < 2 || scatter.trace() <= 0.0 {
        (DMatrix::identity(n, n) * DEGENERATE_SPREAD, true)
    } else if cholesky_strict(&scatter, "scatter").is_ok() {
        (scatter, false)
    } else {
        let l = cholesky_jittered(&scatter)?.l();
        (&l * l.transpose(), true)
    };
    let h_pi = possibilistic_entropy_gaussian(&cov)?;
    Ok(GaussianLimitExtract {
        mean,
        cov,
        h_pi,
        degenerate,
    })
}

/// Grid support for a Gaussian belief: a `3σ · inflation` shell.
pub fn belief_support(belief: &GaussianBelief, inflation: f64) -> Result<Ellipsoid> {
    if !(inflation >= 1.0) {
        return Err(Error::InvalidArgument(format!("inflation {inflation} below 1")));
    }
    let k = SHELL_SIGMA * inflation;
    Ellipsoid::new(belief.mean.clone(), &belief.cov * (k * k))
}

/// Gaussian equivalent of a cloud seeded on a `3σ · inflation` shell.
pub fn cloud_belief(cloud: &SupportCloud, level: SmolyakLevel, inflation: f64) -> Result<(GaussianBelief, bool)> {
    let extract = gaussian_limit_extract(cloud)?;
    let k = SHELL_SIGMA * inflation;
    let scale = k * k * grid_scatter_factor(cloud.dim(), level);
    let belief = GaussianBelief::new(extract.mean, extract.cov / scale)?;
    Ok((belief, extract.degenerate))
}

/// One filter step's outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct EspfStep {
    pub extract: GaussianLimitExtract,
    pub report: WidthReport,
    pub log_det_mvee: f64,
    pub cloud_size: usize,
    pub prune_count: usize,
    pub gate_inflated: bool,
    /// Number of process-noise widenings needed to find a compatible point.
    pub noise_widenings: usize,
}

/// Recursive support-point filter.
///
/// The posterior cloud is summarized by its grade-weighted moments; each step
/// re-seeds a grid whose shape is the scatter divided by the pristine-grid
/// scatter factor, so an undisturbed cloud maps back onto itself.
#[derive(Debug, Clone)]
pub struct Espf {
    cfg: EspfConfig,
    support: Ellipsoid,
    cloud: SupportCloud,
}

impl Espf {
    pub fn new(support: Ellipsoid, cfg: EspfConfig) -> Result<Self> {
        cfg.validate()?;
        let cloud = smolyak_grid(&support, cfg.smolyak_level)?;
        Ok(Self { cfg, support, cloud })
    }

    /// Seeds from a Gaussian on a `3σ · inflation` shell.
    pub fn from_belief(belief: &GaussianBelief, cfg: EspfConfig, inflation: f64) -> Result<Self> {
        Self::new(belief_support(belief, inflation)?, cfg)
    }

    pub fn cloud(&self) -> &SupportCloud {
        &self.cloud
    }

    pub fn support(&self) -> &Ellipsoid {
        &self.support
    }

    pub fn config(&self) -> &EspfConfig {
        &self.cfg
    }

    /// Gaussian equivalent of the current cloud.
    pub fn belief(&self) -> Result<GaussianBelief> {
        Ok(cloud_belief(&self.cloud, self.cfg.smolyak_level, 1.0)?.0)
    }

    /// Predict through the dynamics and update on `y`.
    pub fn step<M: SystemModel + ?Sized>(&mut self, model: &M, y: &DVector<f64>) -> Result<EspfStep> {
        let grid = smolyak_grid(&self.support, self.cfg.smolyak_level)?;
        let predicted = minkowski_propagate(&grid, |x| model.transition(x), &self.cfg.noise_vertices)?;
        let (mut update, first_diag, expansions) = match espf_update(&predicted, y, model, &self.cfg) {
            Ok(u) => {
                let d = u.diagnostics;
                (u, d, 0)
            }
            Err(Error::EvidenceContradiction) => self.widen_until_compatible(model, y, &grid, &predicted)?,
            Err(e) => return Err(e),
        };
        update.diagnostics = first_diag;
        let extract = gaussian_limit_extract(&update.cloud)?;
        let factor = grid_scatter_factor(self.cloud.dim(), self.cfg.smolyak_level);
        self.support = Ellipsoid::new(extract.mean.clone(), &extract.cov / factor)?;
        self.cloud = update.cloud;
        let report = ewm_report(&self.cloud, &update.diagnostics, None);
        Ok(EspfStep {
            extract,
            report,
            log_det_mvee: update.measurement_ellipsoid.log_det()?,
            cloud_size: self.cloud.len(),
            prune_count: update.diagnostics.prune_count,
            gate_inflated: update.gate_inflated,
            noise_widenings: expansions,
        })
    }

    /// Widens the process-noise support until the inflated gate keeps a
    /// point. Diagnostics are those of the nominal prediction.
    fn widen_until_compatible<M: SystemModel + ?Sized>(
        &self,
        model: &M,
        y: &DVector<f64>,
        grid: &SupportCloud,
        predicted: &SupportCloud,
    ) -> Result<(EspfUpdate, UpdateDiagnostics, usize)> {
        let first = original_diagnostics(predicted, y, model, &self.cfg)?;
        let mut scale = 1.0;
        for j in 1..=MAX_NOISE_WIDENINGS {
            scale *= NOISE_GROWTH;
            let vertices: Vec<DVector<f64>> = self.cfg.noise_vertices.iter().map(|w| w * scale).collect();
            let predicted = minkowski_propagate(grid, |x| model.transition(x), &vertices)?;
            match espf_update(&predicted, y, model, &self.cfg) {
                Ok(u) => return Ok((u, first, j)),
                Err(Error::EvidenceContradiction) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::EvidenceContradiction)
    }
}

/// Gate diagnostics of a predicted cloud whose update failed.
fn original_diagnostics<M: SystemModel + ?Sized>(
    predicted: &SupportCloud,
    y: &DVector<f64>,
    model: &M,
    cfg: &EspfConfig,
) -> Result<UpdateDiagnostics> {
    let projected: Vec<DVector<f64>> = predicted.points().iter().map(|p| model.measure(p)).collect();
    let residuals: Vec<DVector<f64>> = projected.iter().map(|z| model.residual(y, z)).collect();
    let hull = mvee(&projected, cfg.mvee_tol)?;
    let spread = Ellipsoid::new(hull.center.clone(), &hull.shape + &cfg.sensor_spread)?;
    let gate = compatibility_gate(&residuals, &spread, cfg.gate_r2)?;
    Ok(UpdateDiagnostics {
        prune_count: gate.prune_count,
        min_gate_stat: gate.min_stat,
        gate_r2: cfg.gate_r2,
        compatible_possibility: 0.0,
    })
}
