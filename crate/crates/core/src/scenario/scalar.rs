//! Scalar contraction demo on `[0, 1]`: ignorance followed by three
//! progressively narrower trapezoids.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::integration::{choquet_trapezoid_identity, lebesgue_expectation_trapezoid};
use crate::possibility::TrapezoidPossibility;
use crate::width::{aggregate_width_trapezoid, WidthMethod};

/// Plateau `[a, b]` and ramp width of each observation.
pub const SCALAR_STAGES: [(f64, f64, f64); 3] = [(0.14, 0.50, 0.14), (0.22, 0.42, 0.10), (0.26, 0.36, 0.05)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarRow {
    pub step: usize,
    pub w_bar: f64,
    pub choquet: f64,
    pub lebesgue: f64,
    pub gap: f64,
}

/// Width, Choquet expectation, Lebesgue expectation and their gap for one
/// trapezoid.
pub fn scalar_row(step: usize, dist: &TrapezoidPossibility) -> Result<ScalarRow> {
    let choquet = choquet_trapezoid_identity(dist)?;
    let lebesgue = lebesgue_expectation_trapezoid(dist)?;
    Ok(ScalarRow {
        step,
        w_bar: aggregate_width_trapezoid(dist, WidthMethod::ClosedForm)?,
        choquet,
        lebesgue,
        gap: choquet - lebesgue,
    })
}

/// The four-row contraction table.
pub fn scalar_demo() -> Result<Vec<ScalarRow>> {
    let mut rows = vec![scalar_row(0, &TrapezoidPossibility::ignorance(0.0, 1.0)?)?];
    for (k, (a, b, d)) in SCALAR_STAGES.iter().enumerate() {
        rows.push(scalar_row(k + 1, &TrapezoidPossibility::new(*a, *b, *d, (0.0, 1.0))?)?);
    }
    Ok(rows)
}

pub fn write_scalar_csv<W: Write>(rows: &[ScalarRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn format_scalar_table(rows: &[ScalarRow]) -> String {
    let mut s = String::from("step   W_bar  Choquet  Lebesgue    gap\n");
    for r in rows {
        s.push_str(&format!(
            "{:>4} {:>7.3} {:>8.3} {:>9.3} {:>6.3}\n",
            r.step, r.w_bar, r.choquet, r.lebesgue, r.gap
        ));
    }
    s
}

pub(crate) fn csv_error(e: csv::Error) -> crate::Error {
    crate::Error::Io(e.to_string())
}
