use std::collections::BTreeMap;

use pidreg_core::plants::{catalog_lookup, estimate_lipschitz, estimate_lipschitz_around, shift_nonlinearity, PlantFunction};
use proptest::prelude::*;

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn lipschitz_catalog() -> impl Strategy<Value = PlantFunction> {
    prop_oneof![
        (1usize..4).prop_map(|n| catalog_lookup("zero", &params(&[("n", n as f64)])).unwrap()),
        (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b)| catalog_lookup("sine_mix", &params(&[("alpha", a), ("beta", b)])).unwrap()),
        (0.1..20.0f64, 0.1..3.0f64, -2.0..2.0f64)
            .prop_map(|(g, l, c)| catalog_lookup("pendulum", &params(&[("g", g), ("l", l), ("c", c)])).unwrap()),
        (-5.0..5.0f64, -5.0..5.0f64).prop_map(|(k, c)| catalog_lookup("damped_spring", &params(&[("k", k), ("c", c)])).unwrap()),
        prop::array::uniform4(-2.0..2.0f64).prop_map(|[a, b, c, d]| catalog_lookup(
            "linear",
            &params(&[("n", 2.0), ("a1_1", a), ("a1_4", b), ("a2_2", c), ("a2_3", d), ("a1_2", a - d)])
        ).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn sampled_quotients_stay_below_declared_constant(f in lipschitz_catalog(), radius in 0.01..1e3f64, seed in any::<u64>()) {
        let declared = f.declared_l().unwrap();
        let est = estimate_lipschitz(&f, radius, 200, seed);
        prop_assert!(est.sampled_max <= declared * (1.0 + 1e-6) + 1e-12, "{} > {}", est.sampled_max, declared);
    }

    #[test]
    fn shifting_keeps_sampled_constant(f in lipschitz_catalog(), shift in -20.0..20.0f64, seed in any::<u64>()) {
        let setpoint = vec![shift; f.dim()];
        let g = shift_nonlinearity(&f, &setpoint);
        prop_assert!(g.evaluate(&vec![0.0; f.dim()], &vec![0.0; f.dim()]).iter().all(|v| *v == 0.0));
        // Probing g around the origin visits the same pairs as probing f around (y*, 0).
        let mut center = setpoint.clone();
        center.extend(vec![0.0; f.dim()]);
        let a = estimate_lipschitz_around(&f, &center, 10.0, 200, seed).sampled_max;
        let b = estimate_lipschitz(&g, 10.0, 200, seed).sampled_max;
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{a} vs {b}");
    }

    #[test]
    fn power_law_beats_any_bound(eps in 0.2..2.0f64, l in 0.5..50.0f64, seed in any::<u64>()) {
        let f = catalog_lookup("power_law", &params(&[("epsilon", eps)])).unwrap();
        prop_assert!(f.not_globally_lipschitz());
        let radius = 4.0 * l.powf(1.0 / eps) + 10.0;
        prop_assert!(estimate_lipschitz(&f, radius, 400, seed).sampled_max > l);
    }
}
