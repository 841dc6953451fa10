#![allow(dead_code)]

use continuum::possibility::SupportCloud;
use nalgebra::DVector;
use proptest::prelude::*;

/// Points on a line, one per grade.
pub fn line_cloud(grades: &[f64]) -> SupportCloud {
    let points = (0..grades.len()).map(|i| DVector::from_vec(vec![i as f64])).collect();
    SupportCloud::new(points, grades.to_vec()).unwrap()
}

/// Grades in `[0, 1]` with one entry forced to 1.
pub fn normalized_grades(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    (1..=max_len)
        .prop_flat_map(|n| (prop::collection::vec(0.0..=1.0f64, n), 0..n))
        .prop_map(|(mut g, top)| {
            g[top] = 1.0;
            g
        })
}

/// Grades in `[0, 1]` with at least one positive entry.
pub fn positive_grades(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    normalized_grades(max_len).prop_flat_map(|g| {
        let n = g.len();
        (Just(g), 0.05..=1.0f64, 0..n).prop_map(|(g, scale, _)| g.iter().map(|x| x * scale).collect())
    })
}

pub fn normalized_cloud(max_len: usize) -> impl Strategy<Value = SupportCloud> {
    normalized_grades(max_len).prop_map(|g| line_cloud(&g))
}

/// Trapezoids whose support stays inside `[0, 1]`.
pub fn trapezoid() -> impl Strategy<Value = continuum::possibility::TrapezoidPossibility> {
    (0.0..0.3f64, 0.0..0.4f64, 0.0..=1.0f64).prop_map(|(d, len, u)| {
        let a = d + u * (1.0 - 2.0 * d - len);
        continuum::possibility::TrapezoidPossibility::new(a, a + len, d, (0.0, 1.0)).unwrap()
    })
}
