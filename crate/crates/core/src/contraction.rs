//! Evidence-driven contraction of a possibility cloud.
//!
//! Compatibility fields, the Choquet credibility benchmark, and an explicit
//! Euler discretization of the credibility-directed flow.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integration::choquet_values;
use crate::linalg::{cholesky_strict, mahalanobis};
use crate::possibility::{min_condition, SupportCloud};
use crate::width::aggregate_width_cloud;

/// Functional form of the compatibility field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompatibilityMode {
    /// 1 inside the gate `d² ≤ r²`, 0 outside.
    Hard,
    /// `exp(−½ d²/r²)`.
    Smooth,
}

/// Per-point Mahalanobis statistics `dᶦ² = (y − h(χᶦ))ᵀ Π_e⁻¹ (y − h(χᶦ))`.
pub fn gate_statistics<H>(
    points: &[DVector<f64>],
    y: &DVector<f64>,
    h: H,
    spread: &DMatrix<f64>,
) -> Result<Vec<f64>>
where
    H: Fn(&DVector<f64>) -> DVector<f64>,
{
    if spread.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: spread.nrows(),
        });
    }
    let chol = cholesky_strict(spread, "compatibility spread")?;
    points
        .iter()
        .map(|p| {
            let predicted = h(p);
            if predicted.len() != y.len() {
                return Err(Error::DimensionMismatch {
                    expected: y.len(),
                    got: predicted.len(),
                });
            }
            Ok(mahalanobis(&chol, &(y - predicted)))
        })
        .collect()
}

/// Compatibility `κ(χᶦ) ∈ [0, 1]` of every cloud point with measurement `y`.
pub fn compatibility_field<H>(
    cloud: &SupportCloud,
    y: &DVector<f64>,
    h: H,
    spread: &DMatrix<f64>,
    r2: f64,
    mode: CompatibilityMode,
) -> Result<Vec<f64>>
where
    H: Fn(&DVector<f64>) -> DVector<f64>,
{
    if !(r2 > 0.0 && r2.is_finite()) {
        return Err(Error::InvalidArgument(format!("gate radius {r2}")));
    }
    let d2 = gate_statistics(cloud.points(), y, h, spread)?;
    Ok(d2
        .into_iter()
        .map(|d| match mode {
            CompatibilityMode::Hard => {
                if d <= r2 {
                    1.0
                } else {
                    0.0
                }
            }
            CompatibilityMode::Smooth => (-0.5 * d / r2).exp(),
        })
        .collect())
}

/// Choquet integral of the posterior grades against the prior's possibility
/// capacity.
pub fn choquet_benchmark(prior: &SupportCloud, posterior_grades: &[f64]) -> Result<f64> {
    if let Some(g) = posterior_grades.iter().find(|g| !(0.0..=1.0).contains(*g)) {
        return Err(Error::InvalidArgument(format!("grade {g} outside [0, 1]")));
    }
    choquet_values(prior, posterior_grades)
}

/// Rate and step control for the contraction flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub lambda: f64,
    pub dt: f64,
    pub max_steps: usize,
    pub floor: f64,
}

impl FlowConfig {
    pub fn new(lambda: f64, dt: f64, max_steps: usize, floor: f64) -> Result<Self> {
        let cfg = Self {
            lambda,
            dt,
            max_steps,
            floor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.dt > 0.0) {
            return Err(Error::InvalidArgument("lambda and dt must be positive".into()));
        }
        if self.lambda * self.dt >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "lambda·dt = {} must be below 1",
                self.lambda * self.dt
            )));
        }
        if !(0.0..1.0).contains(&self.floor) {
            return Err(Error::InvalidArgument(format!("floor {} outside [0, 1)", self.floor)));
        }
        Ok(())
    }
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            dt: 0.1,
            max_steps: 200,
            floor: 0.0,
        }
    }
}

/// One explicit Euler step of `∂π/∂t = −λ π (π̄ − π⁺)₊`.
///
/// Grades are never raised; a grade already below the floor is left alone.
pub fn flow_step(
    cloud: &SupportCloud,
    posterior_grades: &[f64],
    benchmark: f64,
    cfg: &FlowConfig,
) -> Result<SupportCloud> {
    cfg.validate()?;
    if posterior_grades.len() != cloud.len() {
        return Err(Error::DimensionMismatch {
            expected: cloud.len(),
            got: posterior_grades.len(),
        });
    }
    let rate = cfg.lambda * cfg.dt;
    let grades = cloud
        .grades()
        .iter()
        .zip(posterior_grades)
        .map(|(&g, &post)| {
            let gap = (benchmark - post).max(0.0);
            if gap == 0.0 {
                return g;
            }
            let next = g * (1.0 - rate * gap);
            if g <= cfg.floor {
                g
            } else {
                next.clamp(cfg.floor, 1.0).min(g)
            }
        })
        .collect();
    cloud.with_grades(grades)
}

/// Conditions the prior on `kappa`, fixes the benchmark from the prior
/// capacity, and integrates the flow. Returns the final cloud and the width
/// after every step, starting with the conditioned cloud.
pub fn run_contraction(
    prior: &SupportCloud,
    kappa: &[f64],
    cfg: &FlowConfig,
) -> Result<(SupportCloud, Vec<f64>)> {
    cfg.validate()?;
    let posterior = min_condition(prior, kappa)?;
    let benchmark = choquet_benchmark(prior, posterior.grades())?;
    let mut current = posterior.clone();
    let mut trace = vec![aggregate_width_cloud(&current)];
    for _ in 0..cfg.max_steps {
        let next = flow_step(&current, posterior.grades(), benchmark, cfg)?;
        let unchanged = next.grades() == current.grades();
        current = next;
        trace.push(aggregate_width_cloud(&current));
        if unchanged {
            break;
        }
    }
    Ok((current, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line_cloud(grades: &[f64]) -> SupportCloud {
        let points = (0..grades.len())
            .map(|i| DVector::from_vec(vec![i as f64]))
            .collect();
        SupportCloud::new(points, grades.to_vec()).unwrap()
    }

    fn identity(x: &DVector<f64>) -> DVector<f64> {
        x.clone()
    }

    #[test]
    fn compatibility_modes() {
        let c = line_cloud(&[1.0, 1.0, 1.0]);
        let y = DVector::from_vec(vec![0.0]);
        let spread = DMatrix::from_element(1, 1, 1.0);
        let r2 = 1.0;
        let hard = compatibility_field(&c, &y, identity, &spread, r2, CompatibilityMode::Hard).unwrap();
        assert_eq!(hard, vec![1.0, 1.0, 0.0]);
        let y = DVector::from_vec(vec![2f64.sqrt()]);
        let smooth = compatibility_field(&c, &y, identity, &spread, r2, CompatibilityMode::Smooth).unwrap();
        // d² = 2r² at point 0
        assert_abs_diff_eq!(smooth[0], (-1.0f64).exp(), epsilon = 1e-12);
        let just_out = DVector::from_vec(vec![(1.0f64 + 1e-6).sqrt()]);
        let hard = compatibility_field(&c, &just_out, identity, &spread, r2, CompatibilityMode::Hard).unwrap();
        assert_eq!(hard[0], 0.0);
        let bad = DMatrix::from_element(1, 1, -1.0);
        assert!(compatibility_field(&c, &y, identity, &bad, r2, CompatibilityMode::Hard).is_err());
    }

    #[test]
    fn benchmark_examples() {
        let ign = line_cloud(&[1.0, 1.0]);
        assert_eq!(choquet_benchmark(&ign, &[1.0, 1.0]).unwrap(), 1.0);
        let prior = line_cloud(&[1.0, 0.5]);
        assert_abs_diff_eq!(choquet_benchmark(&prior, &[1.0, 0.2]).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(choquet_benchmark(&prior, &[0.0, 0.0]).unwrap(), 0.0);
        // collapsed prior picks out the surviving point
        let collapsed = line_cloud(&[0.0, 1.0, 0.0]);
        assert_abs_diff_eq!(choquet_benchmark(&collapsed, &[0.9, 0.3, 0.7]).unwrap(), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn flow_step_examples() {
        let cfg = FlowConfig::new(1.0, 0.1, 10, 0.0).unwrap();
        let c = line_cloud(&[1.0, 0.0, 0.6]);
        let next = flow_step(&c, &[0.0, 0.0, 0.5], 0.5, &cfg).unwrap();
        assert_abs_diff_eq!(next.grades()[0], 0.95, epsilon = 1e-15);
        assert_eq!(next.grades()[1], 0.0);
        assert_eq!(next.grades()[2], 0.6);
        assert!(FlowConfig::new(10.0, 0.1, 1, 0.0).is_err());
    }

    #[test]
    fn contraction_examples() {
        let cfg = FlowConfig::new(2.0, 0.2, 50, 0.05).unwrap();
        let prior = line_cloud(&[1.0, 1.0, 1.0]);
        let (same, trace) = run_contraction(&prior, &[1.0, 1.0, 1.0], &cfg).unwrap();
        assert_eq!(same.grades(), prior.grades());
        assert!(trace.iter().all(|w| *w == 1.0));

        let points: Vec<f64> = (-10..=10).map(|k| k as f64 * 0.3).collect();
        let prior = SupportCloud::new(
            points.iter().map(|x| DVector::from_vec(vec![*x])).collect(),
            points.iter().map(|x| (-0.05 * x * x).exp()).collect(),
        )
        .unwrap()
        .normalize()
        .unwrap();
        let kappa: Vec<f64> = points.iter().map(|x| (-0.5 * (x - 0.3) * (x - 0.3)).exp()).collect();
        let (_, trace) = run_contraction(&prior, &kappa, &cfg).unwrap();
        assert!(trace.len() > 2);
        let first_flat = trace.windows(2).position(|w| w[1] == w[0]).unwrap_or(trace.len() - 1);
        assert!(first_flat > 0);
        for w in trace[..=first_flat].windows(2).take(first_flat) {
            assert!(w[1] < w[0], "{trace:?}");
        }
        for w in trace.windows(2) {
            assert!(w[1] <= w[0]);
        }

        assert_eq!(
            run_contraction(&prior, &vec![0.0; 21], &cfg).unwrap_err(),
            Error::TotalIncompatibility
        );
    }
}
