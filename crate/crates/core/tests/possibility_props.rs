mod common;

use common::{line_cloud, normalized_cloud, normalized_grades, positive_grades, trapezoid};
use continuum::possibility::{
    credal_width_exact, min_condition, min_condition_raw, Distribution, IndexEvent, IntervalEvent,
    PossibilityMeasure,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn maxitivity_and_duality(grades in normalized_grades(8)) {
        let c = line_cloud(&grades);
        let n = c.len();
        for a in 1..(1u64 << n) {
            let ea = IndexEvent::from_mask(a, n);
            let pa = c.possibility_of(&ea).unwrap();
            let brute = ea.indices().iter().map(|&i| grades[i]).fold(0.0, f64::max);
            prop_assert_eq!(pa, brute);
            prop_assert_eq!(c.necessity_of(&ea).unwrap(), 1.0 - c.possibility_allow_empty(&ea.complement(n)).unwrap());
            prop_assert!(c.necessity_of(&ea).unwrap() <= pa + 1e-15);
            for b in 1..(1u64 << n) {
                let eb = IndexEvent::from_mask(b, n);
                let union = IndexEvent::from_mask(a | b, n);
                let pu = c.possibility_of(&union).unwrap();
                prop_assert_eq!(pu, pa.max(c.possibility_of(&eb).unwrap()));
            }
        }
        prop_assert_eq!(c.possibility_of(&c.full_event()).unwrap(), 1.0);
        prop_assert_eq!(c.possibility_allow_empty(&IndexEvent::empty()).unwrap(), 0.0);
    }

    #[test]
    fn cloud_cuts_are_nested(c in normalized_cloud(10)) {
        let mut prev: Option<IndexEvent> = None;
        for k in 1..=50 {
            let alpha = k as f64 / 50.0;
            let cut = c.alpha_cut(alpha).unwrap();
            if let Some(p) = &prev {
                prop_assert!(cut.is_subset_of(p));
            }
            prev = Some(cut);
        }
    }

    #[test]
    fn trapezoid_cuts_are_nested(t in trapezoid()) {
        let mut prev: Option<IntervalEvent> = None;
        for k in 1..=50 {
            let alpha = k as f64 / 50.0;
            let cut = t.alpha_cut(alpha).unwrap();
            if let Some(p) = &prev {
                prop_assert!(cut.is_subset_of(p));
            }
            prev = Some(cut);
        }
    }

    #[test]
    fn trapezoid_duality(t in trapezoid(), lo in 0.0..1.0f64, len in 0.0..0.5f64) {
        let hi = (lo + len).min(1.0);
        let a = IntervalEvent::interval(lo, hi).unwrap();
        prop_assert!(t.necessity_of(&a).unwrap() <= t.possibility_of(&a).unwrap() + 1e-12);
        let sampled = (0..=1000)
            .map(|k| lo + (hi - lo) * k as f64 / 1000.0)
            .map(|x| t.grade(x))
            .fold(0.0, f64::max);
        prop_assert!(t.possibility_of(&a).unwrap() + 1e-12 >= sampled);
    }

    #[test]
    fn conditioning_never_raises_grades(
        grades in normalized_grades(8),
        kappa in prop::collection::vec(0.0..=1.0f64, 8),
    ) {
        let c = line_cloud(&grades);
        let kappa = &kappa[..c.len()];
        if let Ok(raw) = min_condition_raw(&c, kappa) {
            for (after, before) in raw.grades().iter().zip(c.grades()) {
                prop_assert!(after <= before);
            }
            let post = min_condition(&c, kappa).unwrap();
            prop_assert!(post.is_normalized());
        }
    }

    #[test]
    fn credal_width_matches_second_grade(grades in normalized_grades(10)) {
        let c = line_cloud(&grades);
        let mut sorted = c.grades().to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let second = sorted.get(1).copied().unwrap_or(0.0);
        let w = credal_width_exact(&c).unwrap();
        prop_assert!((w - second).abs() <= 1e-12);
        prop_assert_eq!(w == 0.0, c.is_collapsed() || c.len() == 1);
    }

    #[test]
    fn sub_normal_clouds_keep_their_height(grades in positive_grades(6)) {
        let c = line_cloud(&grades);
        let top = c.possibility_of(&c.full_event()).unwrap();
        prop_assert!((top - c.max_grade()).abs() <= 1e-15);
        let n = c.normalize().unwrap();
        prop_assert!(n.is_normalized());
    }

    #[test]
    fn distribution_json_round_trip(t in trapezoid(), grades in normalized_grades(6)) {
        for d in [Distribution::Trapezoid(t), Distribution::Cloud(line_cloud(&grades))] {
            let back = Distribution::from_json(&d.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, d);
        }
    }
}
