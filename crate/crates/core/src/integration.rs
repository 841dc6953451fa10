//! Non-additive integration against possibility capacities.
//!
//! Choquet and Sugeno integrals over a [`SupportCloud`], the analytic Choquet
//! and Lebesgue expectations of `f(x) = x` for a trapezoid, upper/lower credal
//! expectations, and the Hölder power-mean family.

use crate::error::{Error, Result};
use crate::possibility::{SupportCloud, TrapezoidPossibility};

/// Largest cloud accepted by [`upper_lower_expectation`].
pub const EXPECTATION_LIMIT: usize = 12;

/// Below this magnitude the Hölder exponent is treated as zero.
pub const HOLDER_ZERO_GUARD: f64 = 1e-8;

/// Samples of a bounded function at the points of a cloud, with a certified
/// sup-norm bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedSamples {
    values: Vec<f64>,
    bound: f64,
}

impl BoundedSamples {
    pub fn new(values: Vec<f64>, bound: f64) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::InvalidArgument(format!("bound must be positive, got {bound}")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || v.abs() > bound) {
            return Err(Error::InvalidArgument(format!("sample {v} exceeds bound {bound}")));
        }
        Ok(Self { values, bound })
    }

    /// Uses the tightest bound `max |f|` (or 1 for the zero function).
    pub fn tight(values: Vec<f64>) -> Result<Self> {
        let m = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        Self::new(values, if m > 0.0 { m } else { 1.0 })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    fn negated(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| -v).collect(),
            bound: self.bound,
        }
    }
}

/// Indices sorted by descending value, ties broken by index.
fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    order
}

/// Choquet integral of `values` against a capacity given on the nested
/// top-`i` sets: `levels[i]` is the capacity of the `i + 1` largest values.
fn choquet_layers(sorted: &[f64], levels: &[f64], full: f64) -> Result<f64> {
    let m = sorted.len();
    let normalized = (full - 1.0).abs() <= 1e-12;
    let has_negative = sorted[m - 1] < 0.0;
    if !normalized && has_negative {
        return Err(Error::InvalidArgument(
            "signed Choquet integral needs a normalized capacity".into(),
        ));
    }
    // above the largest value {f ≥ t} is empty
    let mut total = if normalized { -(-sorted[0]).max(0.0) } else { 0.0 };
    for i in 0..m {
        let upper = sorted[i];
        // {f ≥ t} equals the top-(i+1) set for t in (next, upper].
        let next = if i + 1 < m { sorted[i + 1] } else { f64::NEG_INFINITY };
        let pos = (upper.max(0.0) - next.max(0.0)).max(0.0);
        total += levels[i] * pos;
        if normalized && i + 1 < m {
            let neg = (upper.min(0.0) - next.min(0.0)).max(0.0);
            total += (levels[i] - 1.0) * neg;
        }
    }
    Ok(total)
}

/// Discrete Choquet integral of `f` with respect to the cloud's possibility
/// measure `Π`.
///
/// Negative values are handled by the signed two-term form (no shifting),
/// which requires a normalized cloud.
pub fn choquet_discrete(cloud: &SupportCloud, f: &BoundedSamples) -> Result<f64> {
    choquet_values(cloud, f.values())
}

pub(crate) fn choquet_values(cloud: &SupportCloud, values: &[f64]) -> Result<f64> {
    if values.len() != cloud.len() {
        return Err(Error::DimensionMismatch {
            expected: cloud.len(),
            got: values.len(),
        });
    }
    let order = descending_order(values);
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let grades = cloud.grades();
    let mut running = 0.0_f64;
    let levels: Vec<f64> = order
        .iter()
        .map(|&i| {
            running = running.max(grades[i]);
            running
        })
        .collect();
    choquet_layers(&sorted, &levels, cloud.max_grade())
}

/// Choquet integral of `f` against the dual necessity measure `N`.
fn choquet_necessity(cloud: &SupportCloud, values: &[f64]) -> Result<f64> {
    let order = descending_order(values);
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let grades = cloud.grades();
    // N(top-i) = 1 − max grade among the remaining points.
    let m = values.len();
    let mut suffix_max = vec![0.0_f64; m + 1];
    for k in (0..m).rev() {
        suffix_max[k] = suffix_max[k + 1].max(grades[order[k]]);
    }
    let levels: Vec<f64> = (0..m).map(|i| 1.0 - suffix_max[i + 1]).collect();
    choquet_layers(&sorted, &levels, 1.0)
}

/// `(lower, upper)` expectation of `f` over the credal set of a normalized cloud:
/// `upper = ∫ f dΠ` and `lower = ∫ f dN = −∫ (−f) dΠ`.
pub fn upper_lower_expectation(cloud: &SupportCloud, f: &BoundedSamples) -> Result<(f64, f64)> {
    if cloud.len() > EXPECTATION_LIMIT {
        return Err(Error::EnumerationLimit {
            size: cloud.len(),
            limit: EXPECTATION_LIMIT,
        });
    }
    if !cloud.is_normalized() {
        return Err(Error::InvalidArgument("credal expectations need a normalized cloud".into()));
    }
    let upper = choquet_discrete(cloud, f)?;
    let lower = -choquet_discrete(cloud, &f.negated())?;
    debug_assert!((lower - choquet_necessity(cloud, f.values())?).abs() < 1e-9);
    Ok((lower, upper))
}

/// Sugeno integral `sup_α min(α, Π{f ≥ α})` for `f` valued in `[0, 1]`.
pub fn sugeno_discrete(cloud: &SupportCloud, f: &[f64]) -> Result<f64> {
    if f.len() != cloud.len() {
        return Err(Error::DimensionMismatch {
            expected: cloud.len(),
            got: f.len(),
        });
    }
    if let Some(v) = f.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidArgument(format!(
            "Sugeno integration needs values in [0, 1], got {v}"
        )));
    }
    let grades = cloud.grades();
    let level_possibility = |alpha: f64| {
        f.iter()
            .zip(grades)
            .filter(|(v, _)| **v >= alpha)
            .map(|(_, g)| *g)
            .fold(0.0, f64::max)
    };
    Ok(f.iter()
        .chain(grades)
        .map(|&alpha| alpha.min(level_possibility(alpha)))
        .fold(0.0, f64::max))
}

/// `∫₀^∞ Π{x ≥ t} dt` for a trapezoid on a nonnegative domain: `b + δ/2`.
pub fn choquet_trapezoid_identity(dist: &TrapezoidPossibility) -> Result<f64> {
    let (lo, _) = dist.domain();
    if lo < 0.0 {
        return Err(Error::InvalidArgument(
            "the closed form needs a nonnegative domain".into(),
        ));
    }
    Ok(dist.b() + dist.delta() / 2.0)
}

/// Centroid of the area-normalized trapezoid density.
pub fn lebesgue_expectation_trapezoid(dist: &TrapezoidPossibility) -> Result<f64> {
    let (a, b, d) = (dist.a(), dist.b(), dist.delta());
    let l = b - a;
    let area = l + d;
    if area <= 0.0 {
        return Err(Error::InvalidArgument("trapezoid support has zero area".into()));
    }
    // plateau mass at its midpoint, triangular ramps at their centroids
    let moment = l * (a + b) / 2.0 + (d / 2.0) * (a - d / 3.0) + (d / 2.0) * (b + d / 3.0);
    Ok(moment / area)
}

/// Hölder power mean `M_α(a, b) = ((a^α + b^α)/2)^{1/α}`, with the geometric
/// mean at `α = 0` and min/max at `∓∞`.
pub fn holder_mean(alpha: f64, a: f64, b: f64) -> f64 {
    debug_assert!(a >= 0.0 && b >= 0.0);
    if alpha == f64::INFINITY {
        a.max(b)
    } else if alpha == f64::NEG_INFINITY {
        a.min(b)
    } else if alpha.abs() < HOLDER_ZERO_GUARD {
        (a * b).sqrt()
    } else {
        let m = ((a.powf(alpha) + b.powf(alpha)) / 2.0).powf(1.0 / alpha);
        m.clamp(a.min(b), a.max(b))
    }
}

/// Confidence-to-exponent heuristic `α(C) = 1 + 1/(ε + (1 − C))`.
pub fn alpha_of_confidence(confidence: f64, epsilon: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&confidence) && epsilon > 0.0);
    1.0 + 1.0 / (epsilon + (1.0 - confidence))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn cloud(grades: &[f64]) -> SupportCloud {
        let points = (0..grades.len())
            .map(|i| DVector::from_vec(vec![i as f64]))
            .collect();
        SupportCloud::new(points, grades.to_vec()).unwrap()
    }

    fn samples(v: &[f64]) -> BoundedSamples {
        BoundedSamples::tight(v.to_vec()).unwrap()
    }

    /// Layer-cake `∫ Π{f ≥ t} dt` by the trapezoid rule over `(0, max f]`.
    fn layer_cake(grades: &[f64], f: &[f64], steps: usize) -> f64 {
        let top = f.iter().copied().fold(0.0, f64::max);
        let h = top / steps as f64;
        let level = |t: f64| {
            f.iter()
                .zip(grades)
                .filter(|(v, _)| **v >= t)
                .map(|(_, g)| *g)
                .fold(0.0, f64::max)
        };
        let mut s = 0.0;
        for k in 0..steps {
            let t0 = k as f64 * h;
            let t1 = t0 + h;
            s += 0.5 * h * (level(t0.max(1e-300)) + level(t1));
        }
        s
    }

    #[test]
    fn choquet_examples() {
        let c = cloud(&[1.0, 0.5]);
        let f = [2.0, 10.0];
        assert_abs_diff_eq!(choquet_discrete(&c, &samples(&f)).unwrap(), 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(layer_cake(c.grades(), &f, 100_000), 6.0, epsilon = 1e-3);
        let collapsed = cloud(&[0.0, 1.0, 0.0]);
        assert_eq!(choquet_discrete(&collapsed, &samples(&[3.0, -2.0, 7.0])).unwrap(), -2.0);
        let c3 = cloud(&[1.0, 0.3, 0.7]);
        assert_abs_diff_eq!(choquet_discrete(&c3, &samples(&[4.2; 3])).unwrap(), 4.2, epsilon = 1e-12);
        assert_abs_diff_eq!(choquet_discrete(&c3, &samples(&[-4.2; 3])).unwrap(), -4.2, epsilon = 1e-12);
    }

    #[test]
    fn choquet_tie_invariance() {
        let c = cloud(&[0.2, 1.0, 0.6, 0.9]);
        let f = [1.0, 1.0, 3.0, 1.0];
        let a = choquet_discrete(&c, &samples(&f)).unwrap();
        // permute the cloud and the samples together
        let perm = [3, 1, 0, 2];
        let c2 = cloud(&perm.map(|i| c.grades()[i]));
        let f2 = perm.map(|i| f[i]);
        let b = choquet_discrete(&c2, &samples(&f2)).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-15);
    }

    #[test]
    fn signed_choquet_needs_normalized_cloud() {
        let sub = cloud(&[0.5, 0.2]);
        assert!(choquet_discrete(&sub, &samples(&[-1.0, 2.0])).is_err());
        assert!(choquet_discrete(&sub, &samples(&[1.0, 2.0])).is_ok());
    }

    #[test]
    fn expectation_examples() {
        let c = cloud(&[1.0, 0.4]);
        let (lo, hi) = upper_lower_expectation(&c, &samples(&[0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(lo, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 0.4, epsilon = 1e-15);
        let collapsed = cloud(&[0.0, 1.0]);
        let (lo, hi) = upper_lower_expectation(&collapsed, &samples(&[5.0, -3.0])).unwrap();
        assert_eq!((lo, hi), (-3.0, -3.0));
        let (lo, hi) = upper_lower_expectation(&c, &samples(&[2.5, 2.5])).unwrap();
        assert_abs_diff_eq!(lo, 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 2.5, epsilon = 1e-15);
        let big = cloud(&[1.0; 13]);
        assert!(matches!(
            upper_lower_expectation(&big, &samples(&[0.0; 13])),
            Err(Error::EnumerationLimit { .. })
        ));
    }

    #[test]
    fn sugeno_examples() {
        let c = cloud(&[1.0, 0.5]);
        let got = sugeno_discrete(&c, &[0.2, 0.9]).unwrap();
        assert_eq!(got, 0.5);
        // dense alpha-grid oracle
        let oracle = (0..=100_000)
            .map(|k| {
                let a = k as f64 / 100_000.0;
                let lvl = [0.2_f64, 0.9]
                    .iter()
                    .zip(c.grades())
                    .filter(|(v, _)| **v >= a)
                    .map(|(_, g)| *g)
                    .fold(0.0, f64::max);
                a.min(lvl)
            })
            .fold(0.0, f64::max);
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-5);
        assert_eq!(sugeno_discrete(&cloud(&[0.0, 1.0]), &[0.8, 0.3]).unwrap(), 0.3);
        assert_eq!(sugeno_discrete(&cloud(&[1.0, 0.4, 0.7]), &[0.6; 3]).unwrap(), 0.6);
        assert!(sugeno_discrete(&c, &[1.2, 0.0]).is_err());
    }

    #[test]
    fn trapezoid_identities_match_table_values() {
        let t1 = TrapezoidPossibility::new(0.14, 0.50, 0.14, (0.0, 1.0)).unwrap();
        let t3 = TrapezoidPossibility::new(0.26, 0.36, 0.05, (0.0, 1.0)).unwrap();
        let t0 = TrapezoidPossibility::ignorance(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(choquet_trapezoid_identity(&t1).unwrap(), 0.570, epsilon = 1e-12);
        assert_abs_diff_eq!(choquet_trapezoid_identity(&t3).unwrap(), 0.385, epsilon = 1e-12);
        assert_abs_diff_eq!(choquet_trapezoid_identity(&t0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lebesgue_expectation_trapezoid(&t1).unwrap(), 0.320, epsilon = 1e-12);
        assert_abs_diff_eq!(lebesgue_expectation_trapezoid(&t3).unwrap(), 0.310, epsilon = 1e-12);
        assert_abs_diff_eq!(lebesgue_expectation_trapezoid(&t0).unwrap(), 0.500, epsilon = 1e-12);
        let neg = TrapezoidPossibility::new(-0.5, 0.2, 0.1, (-1.0, 1.0)).unwrap();
        assert!(choquet_trapezoid_identity(&neg).is_err());
    }

    #[test]
    fn trapezoid_identity_matches_layer_cake_quadrature() {
        let t = TrapezoidPossibility::new(0.22, 0.42, 0.10, (0.0, 1.0)).unwrap();
        let n = 200_000;
        let h = 1.0 / n as f64;
        let sup_above = |s: f64| if s <= t.b() { 1.0 } else { t.grade(s) };
        let quad: f64 = (0..n)
            .map(|k| 0.5 * h * (sup_above(k as f64 * h) + sup_above((k + 1) as f64 * h)))
            .sum();
        assert_abs_diff_eq!(choquet_trapezoid_identity(&t).unwrap(), quad, epsilon = 1e-6);
    }

    #[test]
    fn lebesgue_centroid_matches_numeric_moment() {
        let t = TrapezoidPossibility::new(0.1, 0.25, 0.07, (0.0, 1.0)).unwrap();
        let n = 400_000;
        let h = 1.0 / n as f64;
        let (mut m0, mut m1) = (0.0, 0.0);
        for k in 0..n {
            let x = (k as f64 + 0.5) * h;
            m0 += t.grade(x) * h;
            m1 += x * t.grade(x) * h;
        }
        assert_abs_diff_eq!(lebesgue_expectation_trapezoid(&t).unwrap(), m1 / m0, epsilon = 1e-8);
        let point = TrapezoidPossibility::new(0.3, 0.3, 0.0, (0.0, 1.0)).unwrap();
        assert!(lebesgue_expectation_trapezoid(&point).is_err());
    }

    #[test]
    fn holder_mean_examples() {
        assert_abs_diff_eq!(holder_mean(1.0, 0.2, 0.8), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(holder_mean(0.0, 0.25, 1.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(holder_mean(1e-9, 0.25, 1.0), 0.5, epsilon = 1e-15);
        assert!((holder_mean(64.0, 0.2, 0.8) - 0.8).abs() < 1e-2);
        assert_eq!(holder_mean(f64::INFINITY, 0.2, 0.8), 0.8);
        assert_eq!(holder_mean(f64::NEG_INFINITY, 0.2, 0.8), 0.2);
        assert_eq!(holder_mean(-3.0, 0.0, 0.8), 0.0);
    }

    #[test]
    fn confidence_exponent() {
        assert_abs_diff_eq!(alpha_of_confidence(0.0, 0.01), 1.0 + 1.0 / 1.01, epsilon = 1e-12);
        assert!((alpha_of_confidence(0.0, 0.01) - 1.990).abs() < 1e-3);
        assert_abs_diff_eq!(alpha_of_confidence(1.0, 0.01), 101.0, epsilon = 1e-9);
        assert!(alpha_of_confidence(1.0, 1e6) - 1.0 < 1e-5);
        assert!(alpha_of_confidence(0.3, 0.01) < alpha_of_confidence(0.7, 0.01));
    }
}
