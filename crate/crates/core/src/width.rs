//! Epistemic width diagnostics.
//!
//! Pointwise width `Π(A) − N(A)`, aggregate width on trapezoids and clouds,
//! the NEES-based online proxy, domain expansion and fragility, the credal
//! pseudo-metric, and the per-step width report.

use std::collections::VecDeque;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integration::alpha_of_confidence;
use crate::possibility::{
    check_enumerable, credal_width_exact, subset_possibilities, PossibilityMeasure,
    SupportCloud, TrapezoidPossibility, ENUMERATION_LIMIT, MERGE_TOLERANCE,
};

/// `ε` used when mapping confidence `1 − W̄` to a Hölder exponent.
pub const CONFIDENCE_EPSILON: f64 = 0.01;

/// `w(A) = Π(A) − N(A)`.
pub fn pointwise_width<D: PossibilityMeasure>(dist: &D, event: &D::Event) -> Result<f64> {
    let w = dist.possibility_of(event)? - dist.necessity_of(event)?;
    Ok(w.clamp(0.0, 1.0))
}

/// How the aggregate width of a trapezoid is computed.
///
/// The two methods do not agree: the closed form reproduces the tabulated
/// scalar example, the quadrature integrates `π − n` directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthMethod {
    /// `2δ(ℓ+δ)/(ℓ+2δ)`.
    ClosedForm,
    /// `(1/μ(𝒳)) ∫ (π − n) dμ` by adaptive quadrature.
    Quadrature,
}

const QUADRATURE_TOL: f64 = 1e-8;

fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    whole: f64,
    m: f64,
    fm: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (left, lm, flm) = simpson(f, a, fa, m, fm);
    let (right, rm, frm) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive_step(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
        + adaptive_step(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (whole, m, fm) = simpson(&f, a, fa, b, fb);
    adaptive_step(&f, a, fa, b, fb, whole, m, fm, tol, 40)
}

/// Normalized aggregate width `W̄` of a trapezoid.
pub fn aggregate_width_trapezoid(dist: &TrapezoidPossibility, method: WidthMethod) -> Result<f64> {
    let (lo, hi) = dist.domain();
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::UnboundedDomain);
    }
    if dist.is_ignorance() {
        return Ok(1.0);
    }
    let (l, d) = (dist.plateau_len(), dist.delta());
    match method {
        WidthMethod::ClosedForm => {
            let span = l + 2.0 * d;
            Ok(if span > 0.0 { 2.0 * d * (l + d) / span } else { 0.0 })
        }
        WidthMethod::Quadrature => {
            let c = dist.kernel_offset();
            let (a, b) = (dist.a(), dist.b());
            // breakpoints of the piecewise-linear integrand
            let mut knots = vec![lo, a - d, a - d + c * d, a, b, b + d - c * d, b + d, hi];
            knots.retain(|x| *x >= lo && *x <= hi);
            knots.sort_by(f64::total_cmp);
            knots.dedup();
            let integrand = |x: f64| dist.grade(x) - dist.necessity_kernel(x);
            let total: f64 = knots
                .windows(2)
                .map(|w| adaptive_simpson(integrand, w[0], w[1], QUADRATURE_TOL))
                .sum();
            Ok((total / (hi - lo)).clamp(0.0, 1.0))
        }
    }
}

/// Discrete necessity kernel of a cloud: `nᶦ = max(0, πᶦ − max_{j≠i} πʲ)`.
///
/// This is the pointwise necessity of the singleton `{xᵢ}` and is nonzero only
/// at a unique top-graded point.
pub fn necessity_kernel_cloud(cloud: &SupportCloud) -> Vec<f64> {
    let g = cloud.grades();
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut arg = 0;
    for (i, &v) in g.iter().enumerate() {
        if v > first {
            second = first;
            first = v;
            arg = i;
        } else if v > second {
            second = v;
        }
    }
    let second = second.max(0.0);
    g.iter()
        .enumerate()
        .map(|(i, &v)| if i == arg { (v - second).max(0.0) } else { 0.0 })
        .collect()
}

/// `W̄ = (1/M) Σᵢ (πᶦ − nᶦ)` on a cloud of `M` points.
pub fn aggregate_width_cloud(cloud: &SupportCloud) -> f64 {
    let kernel = necessity_kernel_cloud(cloud);
    let total: f64 = cloud.grades().iter().zip(&kernel).map(|(p, n)| p - n).sum();
    (total / cloud.len() as f64).clamp(0.0, 1.0)
}

/// Thresholds and scaling for the regime switch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchThresholds {
    pub w_crit: f64,
    pub hysteresis: f64,
    pub kappa_w: f64,
}

impl SwitchThresholds {
    pub fn new(w_crit: f64, hysteresis: f64, kappa_w: f64) -> Result<Self> {
        let t = Self {
            w_crit,
            hysteresis,
            kappa_w,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w_crit > 0.0 && self.w_crit < 1.0) {
            return Err(Error::InvalidArgument(format!("w_crit {} outside (0, 1)", self.w_crit)));
        }
        if !(self.hysteresis > 0.0) {
            return Err(Error::InvalidArgument("hysteresis must be positive".into()));
        }
        if self.w_crit + self.hysteresis >= 1.0 || self.w_crit - self.hysteresis <= 0.0 {
            return Err(Error::InvalidArgument(
                "hysteresis band must stay inside (0, 1)".into(),
            ));
        }
        if !(self.kappa_w > 0.0) {
            return Err(Error::InvalidArgument("kappa_w must be positive".into()));
        }
        Ok(())
    }

    pub fn upper(&self) -> f64 {
        self.w_crit + self.hysteresis
    }

    pub fn lower(&self) -> f64 {
        self.w_crit - self.hysteresis
    }
}

impl Default for SwitchThresholds {
    fn default() -> Self {
        Self {
            w_crit: 0.5,
            hysteresis: 0.1,
            kappa_w: 0.5,
        }
    }
}

/// Default NEES window length.
pub const DEFAULT_WINDOW: usize = 20;

/// Sliding window of per-step innovation statistics `ỹᵀS⁻¹ỹ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeesWindow {
    len: usize,
    meas_dim: usize,
    buffer: VecDeque<f64>,
}

impl NeesWindow {
    pub fn new(len: usize, meas_dim: usize) -> Result<Self> {
        if len == 0 || meas_dim == 0 {
            return Err(Error::InvalidArgument(
                "window length and measurement dimension must be positive".into(),
            ));
        }
        Ok(Self {
            len,
            meas_dim,
            buffer: VecDeque::with_capacity(len),
        })
    }

    pub fn push(&mut self, stat: f64) -> Result<()> {
        if !(stat >= 0.0 && stat.is_finite()) {
            return Err(Error::InvalidArgument(format!("innovation statistic {stat}")));
        }
        if self.buffer.len() == self.len {
            self.buffer.pop_front();
        }
        self.buffer.push_back(stat);
        Ok(())
    }

    pub fn clear(&mut self) {
        self.buffer.clear();
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn capacity(&self) -> usize {
        self.len
    }

    pub fn meas_dim(&self) -> usize {
        self.meas_dim
    }

    /// Window-mean statistic per measurement dimension.
    pub fn nees(&self) -> Result<f64> {
        if self.buffer.is_empty() {
            return Err(Error::ColdStart);
        }
        let sum: f64 = self.buffer.iter().sum();
        Ok(sum / (self.buffer.len() * self.meas_dim) as f64)
    }
}

/// `1 − exp(−κ_W · nees)`.
pub fn w_hat_from_nees(nees: f64, kappa_w: f64) -> f64 {
    1.0 - (-kappa_w * nees).exp()
}

/// Proxy width `Ŵ = 1 − exp(−κ_W · NEES)` from the current window.
pub fn w_hat(window: &NeesWindow, thresholds: &SwitchThresholds) -> Result<f64> {
    Ok(w_hat_from_nees(window.nees()?, thresholds.kappa_w))
}

fn coincides(p: &DVector<f64>, q: &DVector<f64>) -> bool {
    let scale = p.amax().max(q.amax()).max(1.0);
    (p - q).amax() <= MERGE_TOLERANCE * scale
}

/// Appends `new_points` at grade 1: total ignorance over the added region.
pub fn domain_expand(cloud: &SupportCloud, new_points: &[DVector<f64>]) -> Result<SupportCloud> {
    if new_points.is_empty() {
        return Ok(cloud.clone());
    }
    for (k, q) in new_points.iter().enumerate() {
        if q.len() != cloud.dim() {
            return Err(Error::DimensionMismatch {
                expected: cloud.dim(),
                got: q.len(),
            });
        }
        if cloud.points().iter().chain(&new_points[..k]).any(|p| coincides(p, q)) {
            return Err(Error::InvalidArgument(
                "expansion points must be disjoint from the existing support".into(),
            ));
        }
    }
    let mut points = cloud.points().to_vec();
    points.extend_from_slice(new_points);
    let mut grades = cloud.grades().to_vec();
    grades.extend(std::iter::repeat_n(1.0, new_points.len()));
    SupportCloud::validated(points, grades)
}

/// `count` points just outside the bounding sphere of the cloud, cycling
/// through the coordinate axes.
pub fn hull_boundary_points(cloud: &SupportCloud, count: usize) -> Vec<DVector<f64>> {
    let n = cloud.dim();
    let m = cloud.len() as f64;
    let centroid = cloud
        .points()
        .iter()
        .fold(DVector::zeros(n), |acc, p| acc + p)
        / m;
    let radius = cloud
        .points()
        .iter()
        .map(|p| (p - &centroid).norm())
        .fold(0.0, f64::max);
    let radius = if radius > 0.0 { radius } else { 1.0 };
    (0..count)
        .map(|j| {
            let axis = (j / 2) % n;
            let ring = j / (2 * n);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let mut q = centroid.clone();
            q[axis] += sign * radius * (1.05 + 0.05 * ring as f64);
            q
        })
        .collect()
}

/// Finite-difference fragility `(W̄(expanded) − W̄) / fraction`, where the
/// expansion adds `⌈fraction · M⌉` grade-1 points on the support boundary.
pub fn fragility_estimate(cloud: &SupportCloud, expansion_fraction: f64) -> Result<f64> {
    if !(expansion_fraction > 0.0 && expansion_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "expansion fraction {expansion_fraction} outside (0, 1]"
        )));
    }
    let count = (expansion_fraction * cloud.len() as f64).ceil() as usize;
    let expanded = domain_expand(cloud, &hull_boundary_points(cloud, count))?;
    let rate = (aggregate_width_cloud(&expanded) - aggregate_width_cloud(cloud)) / expansion_fraction;
    Ok(rate.max(0.0))
}

/// Additive extension of `p_star` to `p_star.len() + r.len()` atoms:
/// `(1 − α) P*(·)/P*(𝒳)` on the original atoms and `α R(·)` on the new ones.
pub fn additive_extension(p_star: &[f64], alpha: f64, r: &[f64]) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1)")));
    }
    let total = |v: &[f64]| -> Result<f64> {
        if v.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidArgument("masses must be nonnegative".into()));
        }
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            Ok(s)
        } else {
            Err(Error::InvalidArgument("a probability needs positive mass".into()))
        }
    };
    let (ps, rs) = (total(p_star)?, total(r)?);
    Ok(p_star
        .iter()
        .map(|p| (1.0 - alpha) * p / ps)
        .chain(r.iter().map(|x| alpha * x / rs))
        .collect())
}

/// Conditions an extended measure back onto its first `original` atoms.
pub fn restrict_additive(extended: &[f64], original: usize) -> Result<Vec<f64>> {
    let head = extended.get(..original).ok_or(Error::DimensionMismatch {
        expected: original,
        got: extended.len(),
    })?;
    let s: f64 = head.iter().sum();
    if s <= 0.0 {
        return Err(Error::InvalidArgument("no mass on the original atoms".into()));
    }
    Ok(head.iter().map(|p| p / s).collect())
}

/// `sup_A |Π₁(A) − Π₂(A)|` over every nonempty event of a shared support.
pub fn credal_pseudometric(d1: &SupportCloud, d2: &SupportCloud) -> Result<f64> {
    if !d1.same_points(d2) {
        return Err(Error::MismatchedPoints);
    }
    check_enumerable(d1.len())?;
    let t1 = subset_possibilities(d1.grades());
    let t2 = subset_possibilities(d2.grades());
    Ok(t1
        .iter()
        .zip(&t2)
        .skip(1)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Statistics of one compatibility-gated update, as consumed by the report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateDiagnostics {
    pub prune_count: usize,
    /// Smallest gate statistic `dᶦ²` over the predicted support.
    pub min_gate_stat: f64,
    pub gate_r2: f64,
    /// `Π` of the gate-compatible event under the predicted grades.
    pub compatible_possibility: f64,
}

/// One flat per-step snapshot of the epistemic diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthReport {
    pub w_bar: f64,
    /// Exact credal width, when the cloud is small enough to enumerate.
    pub w_tv: Option<f64>,
    pub w_hat: Option<f64>,
    pub prune_count: usize,
    pub necessity_saturation: f64,
    pub surprisal: f64,
    pub alpha_c: f64,
}

/// Assembles the width report for a post-update cloud.
///
/// Necessity saturation is `N` of the gate-incompatible event under the
/// predicted grades, `1 − Π(compatible)`: it reaches 1 when only implausible
/// alternatives survive the gate. Surprisal is the smallest gate statistic
/// divided by `r²`.
pub fn ewm_report(cloud: &SupportCloud, diag: &UpdateDiagnostics, w_hat: Option<f64>) -> WidthReport {
    let w_bar = aggregate_width_cloud(cloud);
    let w_tv = if cloud.len() <= ENUMERATION_LIMIT {
        credal_width_exact(cloud).ok()
    } else {
        None
    };
    WidthReport {
        w_bar,
        w_tv,
        w_hat,
        prune_count: diag.prune_count,
        necessity_saturation: (1.0 - diag.compatible_possibility).clamp(0.0, 1.0),
        surprisal: (diag.min_gate_stat / diag.gate_r2).max(0.0),
        alpha_c: alpha_of_confidence(1.0 - w_bar, CONFIDENCE_EPSILON),
    }
}
