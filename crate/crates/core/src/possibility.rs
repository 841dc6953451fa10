//! Consonant possibility distributions.
//!
//! Two representations are provided: an analytic one-dimensional trapezoid and a
//! finite cloud of support points in `n` dimensions carrying possibility grades.
//! Events on the trapezoid are finite unions of closed intervals; events on a
//! cloud are index sets. Both answer possibility, necessity and alpha-cut
//! queries through the [`PossibilityMeasure`] trait.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance under which two cloud points are treated as one.
pub const MERGE_TOLERANCE: f64 = 1e-9;

/// Largest cloud for which events are enumerated exhaustively.
pub const ENUMERATION_LIMIT: usize = 20;

const NORMALIZED_TOL: f64 = 1e-12;
const DOMAIN_TOL: f64 = 1e-12;

/// Queries shared by every consonant possibility representation.
pub trait PossibilityMeasure {
    type Event;

    /// `Π(A) = sup_{x∈A} π(x)`. Rejects the empty event.
    fn possibility_of(&self, event: &Self::Event) -> Result<f64>;

    /// Like [`possibility_of`](Self::possibility_of) but returns `Π(∅) = 0`.
    fn possibility_allow_empty(&self, event: &Self::Event) -> Result<f64>;

    /// `N(A) = 1 − Π(Aᶜ)`.
    fn necessity_of(&self, event: &Self::Event) -> Result<f64>;

    /// `{x : π(x) ≥ alpha}` for `alpha ∈ (0, 1]`.
    fn alpha_cut(&self, alpha: f64) -> Result<Self::Event>;

    /// The event covering the whole reference domain.
    fn full_event(&self) -> Self::Event;
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )))
    }
}

// ---------------------------------------------------------------------------
// Interval events
// ---------------------------------------------------------------------------

/// A finite union of closed intervals, stored sorted and merged.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalEvent {
    intervals: Vec<(f64, f64)>,
}

impl IntervalEvent {
    pub fn new(intervals: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut ivs: Vec<(f64, f64)> = Vec::new();
        for (lo, hi) in intervals {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(Error::InvalidEvent(format!("bad interval [{lo}, {hi}]")));
            }
            ivs.push((lo, hi));
        }
        ivs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(ivs.len());
        for (lo, hi) in ivs {
            match merged.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        Ok(Self { intervals: merged })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new([(lo, hi)])
    }

    pub fn empty() -> Self {
        Self { intervals: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= x && x <= hi)
    }

    /// True when every interval of `self` lies inside some interval of `other`.
    pub fn is_subset_of(&self, other: &IntervalEvent) -> bool {
        self.intervals.iter().all(|&(lo, hi)| {
            other
                .intervals
                .iter()
                .any(|&(olo, ohi)| olo <= lo + 1e-12 && hi <= ohi + 1e-12)
        })
    }
}

// ---------------------------------------------------------------------------
// Trapezoid
// ---------------------------------------------------------------------------

/// One-dimensional trapezoidal possibility distribution: grade 1 on the plateau
/// `[a, b]`, linear ramps of width `delta` on either side, 0 elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapezoidPossibility {
    a: f64,
    b: f64,
    delta: f64,
    domain_lo: f64,
    domain_hi: f64,
}

impl TrapezoidPossibility {
    pub fn new(a: f64, b: f64, delta: f64, domain: (f64, f64)) -> Result<Self> {
        let (lo, hi) = domain;
        if !(a.is_finite() && b.is_finite() && delta.is_finite()) {
            return Err(Error::InvalidArgument("trapezoid parameters must be finite".into()));
        }
        if a > b {
            return Err(Error::InvalidArgument(format!("plateau edges reversed: a={a} > b={b}")));
        }
        if delta < 0.0 {
            return Err(Error::InvalidArgument(format!("negative ramp width {delta}")));
        }
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidArgument(format!("bad domain [{lo}, {hi}]")));
        }
        if a - delta < lo - DOMAIN_TOL || b + delta > hi + DOMAIN_TOL {
            return Err(Error::InvalidArgument(format!(
                "support [{}, {}] leaves the domain [{lo}, {hi}]",
                a - delta,
                b + delta
            )));
        }
        Ok(Self {
            a,
            b,
            delta,
            domain_lo: lo,
            domain_hi: hi,
        })
    }

    /// `π ≡ 1` on `[lo, hi]`.
    pub fn ignorance(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, 0.0, (lo, hi))
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.domain_lo, self.domain_hi)
    }

    /// Plateau length `b − a`.
    pub fn plateau_len(&self) -> f64 {
        self.b - self.a
    }

    pub fn support(&self) -> (f64, f64) {
        (self.a - self.delta, self.b + self.delta)
    }

    /// The plateau covers the whole domain: every state is fully possible.
    pub fn is_ignorance(&self) -> bool {
        self.delta == 0.0 && self.a <= self.domain_lo && self.b >= self.domain_hi
    }

    pub fn grade(&self, x: f64) -> f64 {
        if x < self.domain_lo || x > self.domain_hi {
            return 0.0;
        }
        if x >= self.a && x <= self.b {
            return 1.0;
        }
        if self.delta == 0.0 {
            return 0.0;
        }
        let dist = if x < self.a { self.a - x } else { x - self.b };
        (1.0 - dist / self.delta).max(0.0)
    }

    /// Level removed from `π` to form the necessity kernel: `2δ/(ℓ+2δ)`.
    pub fn kernel_offset(&self) -> f64 {
        let span = self.plateau_len() + 2.0 * self.delta;
        if span > 0.0 {
            2.0 * self.delta / span
        } else {
            0.0
        }
    }

    /// Pointwise necessity kernel `n(x) = max(0, π(x) − 2δ/(ℓ+2δ))`.
    ///
    /// The total-ignorance distribution has `n ≡ 0`.
    pub fn necessity_kernel(&self, x: f64) -> f64 {
        if self.is_ignorance() {
            return 0.0;
        }
        (self.grade(x) - self.kernel_offset()).max(0.0)
    }

    fn check_event(&self, event: &IntervalEvent) -> Result<()> {
        for &(lo, hi) in event.intervals() {
            if lo < self.domain_lo - DOMAIN_TOL || hi > self.domain_hi + DOMAIN_TOL {
                return Err(Error::InvalidEvent(format!(
                    "[{lo}, {hi}] leaves the domain [{}, {}]",
                    self.domain_lo, self.domain_hi
                )));
            }
        }
        Ok(())
    }

    fn sup_on(&self, lo: f64, hi: f64) -> f64 {
        if hi >= self.a && lo <= self.b {
            1.0
        } else if hi < self.a {
            self.grade(hi)
        } else {
            self.grade(lo)
        }
    }

    /// Closure of the complement of `event` within the domain, as closed pieces
    /// with nonempty interior.
    fn complement_closure(&self, event: &IntervalEvent) -> Vec<(f64, f64)> {
        let mut pieces = Vec::new();
        let mut cursor = self.domain_lo;
        for &(lo, hi) in event.intervals() {
            if lo > cursor {
                pieces.push((cursor, lo));
            }
            cursor = cursor.max(hi);
        }
        if cursor < self.domain_hi {
            pieces.push((cursor, self.domain_hi));
        }
        pieces
    }
}

impl PossibilityMeasure for TrapezoidPossibility {
    type Event = IntervalEvent;

    fn possibility_of(&self, event: &IntervalEvent) -> Result<f64> {
        if event.is_empty() {
            return Err(Error::EmptyEvent);
        }
        self.possibility_allow_empty(event)
    }

    fn possibility_allow_empty(&self, event: &IntervalEvent) -> Result<f64> {
        self.check_event(event)?;
        Ok(event
            .intervals()
            .iter()
            .map(|&(lo, hi)| self.sup_on(lo.max(self.domain_lo), hi.min(self.domain_hi)))
            .fold(0.0, f64::max))
    }

    fn necessity_of(&self, event: &IntervalEvent) -> Result<f64> {
        if event.is_empty() {
            return Err(Error::EmptyEvent);
        }
        self.check_event(event)?;
        let outside = self
            .complement_closure(event)
            .into_iter()
            .map(|(lo, hi)| self.sup_on(lo, hi))
            .fold(0.0, f64::max);
        Ok(1.0 - outside)
    }

    fn alpha_cut(&self, alpha: f64) -> Result<IntervalEvent> {
        check_alpha(alpha)?;
        let slack = self.delta * (1.0 - alpha);
        IntervalEvent::interval(self.a - slack, self.b + slack)
    }

    fn full_event(&self) -> IntervalEvent {
        IntervalEvent {
            intervals: vec![(self.domain_lo, self.domain_hi)],
        }
    }
}

// ---------------------------------------------------------------------------
// Index events and support clouds
// ---------------------------------------------------------------------------

/// A set of indices into a [`SupportCloud`], kept sorted and unique.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexEvent {
    indices: Vec<usize>,
}

impl IndexEvent {
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut indices: Vec<usize> = indices.into_iter().collect();
        indices.sort_unstable();
        indices.dedup();
        Self { indices }
    }

    pub fn singleton(i: usize) -> Self {
        Self { indices: vec![i] }
    }

    pub fn full(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
        }
    }

    pub fn empty() -> Self {
        Self { indices: Vec::new() }
    }

    pub fn from_mask(mask: u64, n: usize) -> Self {
        Self {
            indices: (0..n).filter(|i| mask >> i & 1 == 1).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn complement(&self, n: usize) -> Self {
        Self {
            indices: (0..n).filter(|i| !self.contains(*i)).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &IndexEvent) -> bool {
        self.indices.iter().all(|i| other.contains(*i))
    }
}

/// Finite set of support points with possibility grades in `[0, 1]`.
///
/// Grades are not required to be max-normalized at construction; call
/// [`normalize`](Self::normalize) explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportCloud {
    dim: usize,
    points: Vec<DVector<f64>>,
    grades: Vec<f64>,
}

impl SupportCloud {
    /// Validates the inputs and merges near-duplicate points, keeping the
    /// larger grade.
    pub fn new(points: Vec<DVector<f64>>, grades: Vec<f64>) -> Result<Self> {
        let cloud = Self::validated(points, grades)?;
        Ok(cloud.merge_duplicates())
    }

    /// Validates the inputs without merging duplicates.
    pub(crate) fn validated(points: Vec<DVector<f64>>, grades: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("a support cloud needs at least one point".into()));
        }
        if points.len() != grades.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: grades.len(),
            });
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidArgument("zero-dimensional points".into()));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("non-finite support point".into()));
            }
        }
        if let Some(g) = grades.iter().find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(Error::InvalidArgument(format!("grade {g} outside [0, 1]")));
        }
        Ok(Self { dim, points, grades })
    }

    fn merge_duplicates(self) -> Self {
        let n = self.points.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| self.points[i][0].total_cmp(&self.points[j][0]));
        let mut owner: Vec<usize> = (0..n).collect();
        for (pos, &i) in order.iter().enumerate() {
            if owner[i] != i {
                continue;
            }
            let scale_i = self.points[i].amax().max(1.0);
            for &j in &order[pos + 1..] {
                let scale = scale_i.max(self.points[j].amax());
                let tol = MERGE_TOLERANCE * scale;
                if self.points[j][0] - self.points[i][0] > tol {
                    break;
                }
                if owner[j] == j && (&self.points[i] - &self.points[j]).amax() <= tol {
                    owner[j] = i;
                }
            }
        }
        if owner.iter().enumerate().all(|(i, &o)| i == o) {
            return self;
        }
        let mut grades = self.grades.clone();
        for j in 0..n {
            let i = owner[j];
            if i != j {
                grades[i] = grades[i].max(self.grades[j]);
            }
        }
        let mut points = Vec::new();
        let mut kept = Vec::new();
        for (j, p) in self.points.into_iter().enumerate() {
            if owner[j] == j {
                points.push(p);
                kept.push(grades[j]);
            }
        }
        Self {
            dim: self.dim,
            points,
            grades: kept,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn grades(&self) -> &[f64] {
        &self.grades
    }

    pub fn max_grade(&self) -> f64 {
        self.grades.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_normalized(&self) -> bool {
        (self.max_grade() - 1.0).abs() <= NORMALIZED_TOL
    }

    /// Exactly one point at grade 1, all others at 0.
    pub fn is_collapsed(&self) -> bool {
        let ones = self.grades.iter().filter(|g| (**g - 1.0).abs() <= NORMALIZED_TOL).count();
        let zeros = self.grades.iter().filter(|g| **g == 0.0).count();
        ones == 1 && ones + zeros == self.len()
    }

    /// Divides every grade by the maximum grade.
    pub fn normalize(&self) -> Result<Self> {
        let max = self.max_grade();
        if max <= 0.0 {
            return Err(Error::TotalIncompatibility);
        }
        Ok(Self {
            dim: self.dim,
            points: self.points.clone(),
            grades: self.grades.iter().map(|g| (g / max).min(1.0)).collect(),
        })
    }

    /// Same points, new grades.
    pub fn with_grades(&self, grades: Vec<f64>) -> Result<Self> {
        if grades.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: grades.len(),
            });
        }
        if let Some(g) = grades.iter().find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(Error::InvalidArgument(format!("grade {g} outside [0, 1]")));
        }
        Ok(Self {
            dim: self.dim,
            points: self.points.clone(),
            grades,
        })
    }

    /// Indices whose grade is exactly zero.
    pub fn prunable(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.grades[i] == 0.0).collect()
    }

    /// Drops zero-grade points.
    pub fn prune(&self) -> Result<Self> {
        let (points, grades): (Vec<_>, Vec<_>) = self
            .points
            .iter()
            .zip(&self.grades)
            .filter(|(_, g)| **g > 0.0)
            .map(|(p, g)| (p.clone(), *g))
            .unzip();
        if points.is_empty() {
            return Err(Error::TotalIncompatibility);
        }
        Ok(Self {
            dim: self.dim,
            points,
            grades,
        })
    }

    /// Keeps the listed indices in order.
    pub fn restrict(&self, event: &IndexEvent) -> Result<Self> {
        self.check_event(event)?;
        if event.is_empty() {
            return Err(Error::EmptyEvent);
        }
        Ok(Self {
            dim: self.dim,
            points: event.indices().iter().map(|&i| self.points[i].clone()).collect(),
            grades: event.indices().iter().map(|&i| self.grades[i]).collect(),
        })
    }

    /// Whether both clouds hold the same points in the same order.
    pub fn same_points(&self, other: &SupportCloud) -> bool {
        self.len() == other.len()
            && self.dim == other.dim
            && self.points.iter().zip(&other.points).all(|(p, q)| {
                let scale = p.amax().max(q.amax()).max(1.0);
                (p - q).amax() <= MERGE_TOLERANCE * scale
            })
    }

    fn check_event(&self, event: &IndexEvent) -> Result<()> {
        match event.indices().last() {
            Some(&i) if i >= self.len() => Err(Error::InvalidEvent(format!(
                "index {i} out of range for a cloud of {} points",
                self.len()
            ))),
            _ => Ok(()),
        }
    }
}

impl PossibilityMeasure for SupportCloud {
    type Event = IndexEvent;

    fn possibility_of(&self, event: &IndexEvent) -> Result<f64> {
        if event.is_empty() {
            return Err(Error::EmptyEvent);
        }
        self.possibility_allow_empty(event)
    }

    fn possibility_allow_empty(&self, event: &IndexEvent) -> Result<f64> {
        self.check_event(event)?;
        Ok(event
            .indices()
            .iter()
            .map(|&i| self.grades[i])
            .fold(0.0, f64::max))
    }

    fn necessity_of(&self, event: &IndexEvent) -> Result<f64> {
        if event.is_empty() {
            return Err(Error::EmptyEvent);
        }
        self.check_event(event)?;
        let outside = event.complement(self.len());
        Ok(1.0 - self.possibility_allow_empty(&outside)?)
    }

    fn alpha_cut(&self, alpha: f64) -> Result<IndexEvent> {
        check_alpha(alpha)?;
        Ok(IndexEvent::new(
            (0..self.len()).filter(|&i| self.grades[i] >= alpha),
        ))
    }

    fn full_event(&self) -> IndexEvent {
        IndexEvent::full(self.len())
    }
}

/// Grade-wise `min(π⁻, κ)` without renormalization.
///
/// Points whose grade drops to zero are kept; see [`SupportCloud::prunable`].
pub fn min_condition_raw(prior: &SupportCloud, kappa: &[f64]) -> Result<SupportCloud> {
    if kappa.len() != prior.len() {
        return Err(Error::DimensionMismatch {
            expected: prior.len(),
            got: kappa.len(),
        });
    }
    if let Some(k) = kappa.iter().find(|k| !(0.0..=1.0).contains(*k)) {
        return Err(Error::InvalidArgument(format!("compatibility {k} outside [0, 1]")));
    }
    let grades: Vec<f64> = prior
        .grades()
        .iter()
        .zip(kappa)
        .map(|(p, k)| p.min(*k))
        .collect();
    if grades.iter().all(|g| *g == 0.0) {
        return Err(Error::TotalIncompatibility);
    }
    prior.with_grades(grades)
}

/// Possibilistic conditioning: `π⁺ = min(π⁻, κ)` followed by max-normalization.
pub fn min_condition(prior: &SupportCloud, kappa: &[f64]) -> Result<SupportCloud> {
    min_condition_raw(prior, kappa)?.normalize()
}

/// `Π` of every subset of the first `n ≤ 64` grades, indexed by bitmask.
pub(crate) fn subset_possibilities(grades: &[f64]) -> Vec<f64> {
    let n = grades.len();
    let mut table = vec![0.0_f64; 1usize << n];
    for mask in 1usize..table.len() {
        let low = mask.trailing_zeros() as usize;
        table[mask] = table[mask & (mask - 1)].max(grades[low]);
    }
    table
}

pub(crate) fn check_enumerable(n: usize) -> Result<()> {
    if n > ENUMERATION_LIMIT {
        Err(Error::EnumerationLimit {
            size: n,
            limit: ENUMERATION_LIMIT,
        })
    } else {
        Ok(())
    }
}

/// `sup_A [Π(A) − N(A)]` over every nonempty proper event, by enumeration.
pub fn credal_width_exact(cloud: &SupportCloud) -> Result<f64> {
    let n = cloud.len();
    check_enumerable(n)?;
    let table = subset_possibilities(cloud.grades());
    let full = (1usize << n) - 1;
    let mut best: f64 = 0.0;
    // Π(A) − N(A) = Π(A) + Π(Aᶜ) − 1 is symmetric in A ↔ Aᶜ, so fix point 0 in A.
    for mask in (1..full).filter(|m| m & 1 == 1) {
        best = best.max(table[mask] + table[full ^ mask] - 1.0);
    }
    Ok(best.max(0.0))
}

// ---------------------------------------------------------------------------
// JSON documents
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum DistributionDoc {
    Trapezoid {
        a: f64,
        b: f64,
        delta: f64,
        domain: [f64; 2],
    },
    Cloud {
        dim: usize,
        points: Vec<Vec<f64>>,
        grades: Vec<f64>,
    },
}

/// Either possibility representation, as read from or written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionDoc", into = "DistributionDoc")]
pub enum Distribution {
    Trapezoid(TrapezoidPossibility),
    Cloud(SupportCloud),
}

impl TryFrom<DistributionDoc> for Distribution {
    type Error = Error;

    fn try_from(doc: DistributionDoc) -> Result<Self> {
        match doc {
            DistributionDoc::Trapezoid { a, b, delta, domain } => Ok(Distribution::Trapezoid(
                TrapezoidPossibility::new(a, b, delta, (domain[0], domain[1]))?,
            )),
            DistributionDoc::Cloud { dim, points, grades } => {
                if let Some(p) = points.iter().find(|p| p.len() != dim) {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: p.len(),
                    });
                }
                let points = points.into_iter().map(DVector::from_vec).collect();
                Ok(Distribution::Cloud(SupportCloud::new(points, grades)?))
            }
        }
    }
}

impl From<Distribution> for DistributionDoc {
    fn from(d: Distribution) -> Self {
        match d {
            Distribution::Trapezoid(t) => DistributionDoc::Trapezoid {
                a: t.a,
                b: t.b,
                delta: t.delta,
                domain: [t.domain_lo, t.domain_hi],
            },
            Distribution::Cloud(c) => DistributionDoc::Cloud {
                dim: c.dim,
                points: c.points.iter().map(|p| p.iter().copied().collect()).collect(),
                grades: c.grades,
            },
        }
    }
}

impl Distribution {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn step1() -> TrapezoidPossibility {
        TrapezoidPossibility::new(0.14, 0.50, 0.14, (0.0, 1.0)).unwrap()
    }

    fn cloud(grades: &[f64]) -> SupportCloud {
        let points = (0..grades.len())
            .map(|i| DVector::from_vec(vec![i as f64]))
            .collect();
        SupportCloud::new(points, grades.to_vec()).unwrap()
    }

    fn dense_sup(t: &TrapezoidPossibility, lo: f64, hi: f64) -> f64 {
        let n = 200_000;
        (0..=n)
            .map(|k| t.grade(lo + (hi - lo) * k as f64 / n as f64))
            .fold(0.0, f64::max)
    }

    #[test]
    fn trapezoid_possibility_on_ramp() {
        let t = step1();
        let ev = IntervalEvent::interval(0.6, 1.0).unwrap();
        let expected = (0.64 - 0.6) / 0.14;
        assert_abs_diff_eq!(t.possibility_of(&ev).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(t.possibility_of(&ev).unwrap(), dense_sup(&t, 0.6, 1.0), epsilon = 1e-5);
        assert_eq!(t.possibility_of(&t.full_event()).unwrap(), 1.0);
    }

    #[test]
    fn trapezoid_necessity_of_plateau_is_zero() {
        let t = step1();
        let plateau = IntervalEvent::interval(0.14, 0.50).unwrap();
        // closed complement reaches the plateau edges
        let oracle = 1.0 - dense_sup(&t, 0.0, 0.14).max(dense_sup(&t, 0.50, 1.0));
        assert_abs_diff_eq!(t.necessity_of(&plateau).unwrap(), oracle, epsilon = 1e-9);
        assert_eq!(t.necessity_of(&plateau).unwrap(), 0.0);
        assert_eq!(t.necessity_of(&t.full_event()).unwrap(), 1.0);
        let support = IntervalEvent::interval(0.0, 0.64).unwrap();
        assert_eq!(t.necessity_of(&support).unwrap(), 1.0);
    }

    #[test]
    fn empty_event_needs_explicit_flag() {
        let t = step1();
        assert_eq!(t.possibility_of(&IntervalEvent::empty()), Err(Error::EmptyEvent));
        assert_eq!(t.possibility_allow_empty(&IntervalEvent::empty()).unwrap(), 0.0);
        let c = cloud(&[1.0, 0.4]);
        assert_eq!(c.possibility_of(&IndexEvent::empty()), Err(Error::EmptyEvent));
        assert_eq!(c.possibility_allow_empty(&IndexEvent::empty()).unwrap(), 0.0);
    }

    #[test]
    fn event_outside_domain_rejected() {
        let t = step1();
        let ev = IntervalEvent::interval(0.5, 1.5).unwrap();
        assert!(matches!(t.possibility_of(&ev), Err(Error::InvalidEvent(_))));
        let c = cloud(&[1.0, 0.4]);
        assert!(matches!(
            c.possibility_of(&IndexEvent::singleton(5)),
            Err(Error::InvalidEvent(_))
        ));
    }

    #[test]
    fn cloud_possibility_and_necessity() {
        let c = cloud(&[1.0, 0.4]);
        assert_eq!(c.possibility_of(&IndexEvent::singleton(1)).unwrap(), 0.4);
        assert_abs_diff_eq!(c.necessity_of(&IndexEvent::singleton(0)).unwrap(), 0.6, epsilon = 1e-15);
        assert_eq!(c.necessity_of(&c.full_event()).unwrap(), 1.0);
        assert_eq!(c.possibility_of(&c.full_event()).unwrap(), 1.0);
    }

    #[test]
    fn necessity_kernel_values() {
        let t = step1();
        assert_abs_diff_eq!(t.necessity_kernel(0.3), 1.0 - 0.28 / 0.64, epsilon = 1e-12);
        assert_abs_diff_eq!(t.necessity_kernel(0.3), 0.5625, epsilon = 1e-12);
        assert_eq!(t.necessity_kernel(0.9), 0.0);
        let flat = TrapezoidPossibility::new(0.2, 0.4, 0.0, (0.0, 1.0)).unwrap();
        assert_eq!(flat.necessity_kernel(0.3), flat.grade(0.3));
        let ign = TrapezoidPossibility::ignorance(0.0, 1.0).unwrap();
        assert_eq!(ign.necessity_kernel(0.3), 0.0);
    }

    #[test]
    fn alpha_cuts() {
        let t = step1();
        let cut = t.alpha_cut(0.5).unwrap();
        assert_abs_diff_eq!(cut.intervals()[0].0, 0.07, epsilon = 1e-12);
        assert_abs_diff_eq!(cut.intervals()[0].1, 0.57, epsilon = 1e-12);
        let top = t.alpha_cut(1.0).unwrap();
        assert_eq!(top.intervals(), &[(0.14, 0.50)]);
        assert!(t.alpha_cut(0.0).is_err());
        assert!(t.alpha_cut(1.5).is_err());
        let c = cloud(&[1.0, 0.4]);
        assert_eq!(c.alpha_cut(0.7).unwrap(), IndexEvent::singleton(0));
    }

    #[test]
    fn trapezoid_alpha_cuts_nested_on_grid() {
        let t = step1();
        let alphas: Vec<f64> = (1..=50).map(|k| k as f64 / 50.0).collect();
        for w in alphas.windows(2) {
            let outer = t.alpha_cut(w[0]).unwrap();
            let inner = t.alpha_cut(w[1]).unwrap();
            assert!(inner.is_subset_of(&outer));
        }
    }

    #[test]
    fn min_condition_examples() {
        let c = cloud(&[1.0, 0.8]);
        assert_eq!(min_condition(&c, &[1.0, 1.0]).unwrap().grades(), &[1.0, 0.8]);
        let post = min_condition(&c, &[0.5, 1.0]).unwrap();
        assert_abs_diff_eq!(post.grades()[0], 0.625, epsilon = 1e-15);
        assert_eq!(post.grades()[1], 1.0);
        assert_eq!(min_condition(&c, &[0.0, 0.0]), Err(Error::TotalIncompatibility));
        assert!(min_condition(&c, &[1.0]).is_err());
    }

    #[test]
    fn zero_grades_kept_but_prunable() {
        let c = cloud(&[1.0, 0.8, 0.3]);
        let post = min_condition(&c, &[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(post.len(), 3);
        assert_eq!(post.prunable(), vec![1]);
        assert_eq!(post.prune().unwrap().len(), 2);
    }

    #[test]
    fn credal_width_examples() {
        assert_abs_diff_eq!(credal_width_exact(&cloud(&[1.0, 0.4])).unwrap(), 0.4, epsilon = 1e-15);
        assert_eq!(credal_width_exact(&cloud(&[1.0; 5])).unwrap(), 1.0);
        assert_eq!(credal_width_exact(&cloud(&[1.0, 0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(credal_width_exact(&cloud(&[1.0])).unwrap(), 0.0);
        let big = cloud(&vec![0.5; 21]);
        assert!(matches!(credal_width_exact(&big), Err(Error::EnumerationLimit { .. })));
    }

    #[test]
    fn duplicates_merge_keeping_max() {
        let points = vec![
            DVector::from_vec(vec![1.0, 2.0]),
            DVector::from_vec(vec![1.0 + 1e-12, 2.0]),
            DVector::from_vec(vec![3.0, 2.0]),
        ];
        let c = SupportCloud::new(points, vec![0.3, 0.9, 1.0]).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.grades(), &[0.9, 1.0]);
    }

    #[test]
    fn rejects_bad_clouds() {
        assert!(SupportCloud::new(vec![], vec![]).is_err());
        let p = vec![DVector::from_vec(vec![0.0])];
        assert!(SupportCloud::new(p.clone(), vec![1.2]).is_err());
        assert!(SupportCloud::new(p, vec![1.0, 0.5]).is_err());
    }

    #[test]
    fn json_round_trip_and_schema() {
        let t = Distribution::Trapezoid(step1());
        let text = t.to_json().unwrap();
        assert!(text.contains("\"kind\":\"trapezoid\""));
        assert_eq!(Distribution::from_json(&text).unwrap(), t);

        let doc = r#"{"grades":[1.0,0.4],"points":[[0.0,1.0],[2.0,3.0]],"kind":"cloud","dim":2}"#;
        match Distribution::from_json(doc).unwrap() {
            Distribution::Cloud(c) => {
                assert_eq!(c.dim(), 2);
                assert_eq!(c.grades(), &[1.0, 0.4]);
            }
            _ => panic!("expected a cloud"),
        }
        let bad = r#"{"kind":"cloud","dim":3,"points":[[0.0,1.0]],"grades":[1.0]}"#;
        assert!(Distribution::from_json(bad).is_err());
        let reversed = r#"{"kind":"trapezoid","a":0.5,"b":0.1,"delta":0.0,"domain":[0,1]}"#;
        assert!(Distribution::from_json(reversed).is_err());
    }
}
