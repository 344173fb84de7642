//! Property tests of the closed-form transport cost against independent
//! formulations.

use proptest::prelude::*;
use sot_core::measure1d::{monotone_plan, quantized_atom_oracle, wasserstein_pp};
use sot_core::{DiscreteMeasure, OtConfig, PositionTransform};

fn measure_from(raw: Vec<(f64, f64)>, mass: f64) -> DiscreteMeasure {
    let mut raw = raw;
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    raw.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-6);
    let total: f64 = raw.iter().map(|p| p.1).sum();
    let x: Vec<f64> = raw.iter().map(|p| p.0).collect();
    let w: Vec<f64> = raw.iter().map(|p| p.1 * mass / total).collect();
    DiscreteMeasure::new(&x, &w).unwrap()
}

fn measure() -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((0.01f64..10.0, 0.01f64..1.0), 1..12).prop_map(|raw| measure_from(raw, 1.0))
}

/// Weights in multiples of 1/64 so the atom oracle is exact.
fn quantized() -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::btree_set(1usize..64, 0..11).prop_flat_map(|cuts| {
        let mut bounds = vec![0];
        bounds.extend(cuts);
        bounds.push(64);
        let w: Vec<f64> = bounds.windows(2).map(|b| (b[1] - b[0]) as f64 / 64.0).collect();
        let n = w.len();
        prop::collection::btree_set(0u32..100_000, n).prop_map(move |xs| {
            let x: Vec<f64> = xs.iter().map(|&v| v as f64 / 1000.0).collect();
            DiscreteMeasure::new(&x, &w).unwrap()
        })
    })
}

/// W1 as the L1 distance between cumulative distribution functions.
fn w1_by_cdf(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    let mut xs: Vec<f64> = a.positions().iter().chain(b.positions()).copied().collect();
    xs.sort_by(f64::total_cmp);
    xs.windows(2)
        .map(|w| (a.cdf(w[0]) - b.cdf(w[0])).abs() * (w[1] - w[0]))
        .sum()
}

fn shifted(m: &DiscreteMeasure, d: f64, s: f64) -> DiscreteMeasure {
    let x: Vec<f64> = m.positions().iter().map(|v| s * v + d).collect();
    DiscreteMeasure::new(&x, m.weights()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closed_form_matches_atom_oracle_and_plan(a in quantized(), b in quantized(), p in 1u32..=2) {
        let cfg = OtConfig::with_p(p);
        let w = wasserstein_pp(&a, &b, &cfg).unwrap();
        prop_assert!((w - quantized_atom_oracle(&a, &b, p, 64).unwrap()).abs() <= 1e-9);
        prop_assert!((w - monotone_plan(&a, &b, &cfg).unwrap().cost).abs() <= 1e-9);
    }

    #[test]
    fn plan_marginals_are_the_measures(a in measure(), b in measure()) {
        let plan = monotone_plan(&a, &b, &OtConfig::with_p(2)).unwrap();
        for (got, want) in plan.row_sums(a.len()).iter().zip(a.weights()) {
            prop_assert!((got - want).abs() <= 1e-9);
        }
        for (got, want) in plan.column_sums(b.len()).iter().zip(b.weights()) {
            prop_assert!((got - want).abs() <= 1e-9);
        }
    }

    #[test]
    fn w1_equals_cdf_distance(a in measure(), b in measure()) {
        let w = wasserstein_pp(&a, &b, &OtConfig::with_p(1)).unwrap();
        prop_assert!((w - w1_by_cdf(&a, &b)).abs() <= 1e-9 * (1.0 + w));
    }

    #[test]
    fn translating_a_measure_costs_the_shift(a in measure(), d in -5.0f64..5.0, p in 1u32..=2) {
        let w = wasserstein_pp(&a, &shifted(&a, d, 1.0), &OtConfig::with_p(p)).unwrap();
        prop_assert!((w - d.abs().powi(p as i32)).abs() <= 1e-9);
    }

    #[test]
    fn common_translation_and_scaling(a in measure(), b in measure(), d in -5.0f64..5.0, s in 0.1f64..10.0) {
        let cfg = OtConfig::with_p(2);
        let w = wasserstein_pp(&a, &b, &cfg).unwrap();
        let moved = wasserstein_pp(&shifted(&a, d, s), &shifted(&b, d, s), &cfg).unwrap();
        prop_assert!((moved - s * s * w).abs() <= 1e-9 * (1.0 + moved));
    }

    #[test]
    fn log_transform_equals_identity_on_log_positions(a in measure(), b in measure()) {
        let log_cfg = OtConfig {
            position_transform: PositionTransform::Logarithmic,
            ..OtConfig::with_p(2)
        };
        let to_log = |m: &DiscreteMeasure| {
            let x: Vec<f64> = m.positions().iter().map(|v| v.ln()).collect();
            DiscreteMeasure::new(&x, m.weights()).unwrap()
        };
        let direct = wasserstein_pp(&a, &b, &log_cfg).unwrap();
        let mapped = wasserstein_pp(&to_log(&a), &to_log(&b), &OtConfig::with_p(2)).unwrap();
        prop_assert!((direct - mapped).abs() <= 1e-12 * (1.0 + direct));
    }
}
