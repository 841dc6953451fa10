mod common;

use common::{line_cloud, normalized_grades};
use continuum::contraction::{choquet_benchmark, flow_step, run_contraction, FlowConfig};
use continuum::possibility::min_condition;
use proptest::prelude::*;

fn cloud_and_kappa() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    normalized_grades(10).prop_flat_map(|g| {
        let n = g.len();
        (Just(g), prop::collection::vec(0.0..=1.0f64, n))
    })
}

proptest! {
    #[test]
    fn flow_only_lowers_grades(
        (grades, kappa) in cloud_and_kappa(),
        lambda in 0.1..5.0f64,
        floor in 0.0..0.2f64,
    ) {
        let prior = line_cloud(&grades);
        let Ok(post) = min_condition(&prior, &kappa) else { return Ok(()) };
        let bench = choquet_benchmark(&prior, post.grades()).unwrap();
        let cfg = FlowConfig::new(lambda, 0.1, 50, floor).unwrap();
        let mut current = post.clone();
        for _ in 0..20 {
            let next = flow_step(&current, post.grades(), bench, &cfg).unwrap();
            for (a, b) in next.grades().iter().zip(current.grades()) {
                prop_assert!(a <= b);
                prop_assert!(*a >= 0.0);
            }
            current = next;
        }
    }

    #[test]
    fn contraction_trace_never_rises((grades, kappa) in cloud_and_kappa(), lambda in 0.1..5.0f64) {
        let prior = line_cloud(&grades);
        let cfg = FlowConfig::new(lambda, 0.1, 100, 0.0).unwrap();
        if let Ok((_, trace)) = run_contraction(&prior, &kappa, &cfg) {
            for w in trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-15, "{trace:?}");
            }
        }
    }

    #[test]
    fn benchmark_of_collapsed_prior_is_the_top_grade(
        n in 1usize..10,
        top in 0usize..10,
        post in prop::collection::vec(0.0..=1.0f64, 10),
    ) {
        let top = top % n;
        let grades: Vec<f64> = (0..n).map(|i| if i == top { 1.0 } else { 0.0 }).collect();
        let prior = line_cloud(&grades);
        prop_assert!((choquet_benchmark(&prior, &post[..n]).unwrap() - post[top]).abs() <= 1e-15);
    }

    #[test]
    fn benchmark_stays_in_the_posterior_range((grades, post) in cloud_and_kappa()) {
        let prior = line_cloud(&grades);
        let b = choquet_benchmark(&prior, &post).unwrap();
        let lo = post.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = post.iter().copied().fold(0.0, f64::max);
        prop_assert!(lo - 1e-15 <= b && b <= hi + 1e-15);
    }
}
