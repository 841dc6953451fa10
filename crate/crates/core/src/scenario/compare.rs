//! Side-by-side comparison of two runs over the same truth stream.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::track::RunSummary;
use super::FilterKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub diagnostic: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// `b − a` when both sides are present.
    pub difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seed: u64,
    pub label_a: String,
    pub label_b: String,
    pub rows: Vec<ComparisonRow>,
}

fn label(s: &RunSummary) -> String {
    let filter = serde_json::to_value(s.filter).ok();
    let variant = serde_json::to_value(s.variant).ok();
    format!(
        "{}/{}",
        filter.as_ref().and_then(|v| v.as_str()).unwrap_or("?"),
        variant.as_ref().and_then(|v| v.as_str()).unwrap_or("?")
    )
}

/// First post-onset alarm: saturation for cloud filters, an NIS bound
/// exceedance for Gaussian ones, whichever comes first for the adaptive one.
fn alarm_delay(s: &RunSummary) -> Option<f64> {
    let step = match s.filter {
        FilterKind::Ukf => s.first_nis_exceedance_step,
        FilterKind::Espf => s.first_saturation_step,
        FilterKind::Adaptive => match (s.first_nis_exceedance_step, s.first_saturation_step) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        },
    }?;
    Some(step as f64 - s.stress_onset_step as f64)
}

/// Post-recovery steps on which the run still signals inconsistency.
fn post_recovery_signal(s: &RunSummary) -> Option<f64> {
    match (s.post_recovery_w_bar_run, s.post_recovery_nis_exceedances) {
        (Some(w), _) => Some(w as f64),
        (None, n) => n.map(|n| n as f64),
    }
}

fn audit_trail(s: &RunSummary) -> Option<f64> {
    Some(if s.post_recovery_w_bar_run.is_some() { 1.0 } else { 0.0 })
}

/// Six-row diagnostic comparison. The runs must share a seed.
pub fn compare_report(a: &RunSummary, b: &RunSummary) -> Result<ComparisonReport> {
    if a.seed != b.seed {
        return Err(Error::SeedMismatch(a.seed, b.seed));
    }
    type Extract = fn(&RunSummary) -> Option<f64>;
    let rows: [(&str, Extract); 6] = [
        ("final position error (m)", |s| s.final_position_error),
        ("stress-onset alarm delay (steps)", alarm_delay),
        ("post-recovery signal (steps)", post_recovery_signal),
        ("consistency (mean NEES per dim)", |s| s.mean_nees_per_dim),
        ("covariance memory (relative log det change)", |s| s.log_det_relative_change),
        ("per-step width audit trail (1 = yes)", audit_trail),
    ];
    Ok(ComparisonReport {
        seed: a.seed,
        label_a: label(a),
        label_b: label(b),
        rows: rows
            .iter()
            .map(|(name, f)| {
                let (va, vb) = (f(a), f(b));
                ComparisonRow {
                    diagnostic: name.to_string(),
                    a: va,
                    b: vb,
                    difference: va.zip(vb).map(|(x, y)| y - x),
                }
            })
            .collect(),
    })
}

/// Loads `summary.json` from two run directories and compares them.
pub fn compare_runs(dir_a: &Path, dir_b: &Path) -> Result<ComparisonReport> {
    compare_report(&RunSummary::load(dir_a)?, &RunSummary::load(dir_b)?)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed {}", self.seed)?;
        writeln!(f, "| diagnostic | {} | {} | difference |", self.label_a, self.label_b)?;
        writeln!(f, "|---|---|---|---|")?;
        for r in &self.rows {
            writeln!(f, "| {} | {} | {} | {} |", r.diagnostic, cell(r.a), cell(r.b), cell(r.difference))?;
        }
        Ok(())
    }
}
