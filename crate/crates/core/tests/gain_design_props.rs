use pidreg_core::gain_design::{
    corollary_gains, corollary_triple, gains_to_lambda, h, in_omega_k, in_omega_lambda, lambda_to_gains, phi,
    EigenTriple, LipschitzBound,
};
use proptest::prelude::*;

fn distinct_negative_triple() -> impl Strategy<Value = EigenTriple> {
    (-100.0..-0.01f64, -100.0..-0.01f64, -100.0..-0.01f64)
        .prop_map(|(a, b, c)| EigenTriple { lambda1: a, lambda2: b, lambda3: c })
        .prop_filter("distinct", |t| t.is_distinct())
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn gains_round_trip_to_the_same_roots(lam in distinct_negative_triple()) {
        let back = gains_to_lambda(&lambda_to_gains(&lam));
        let got = sorted(back.iter().map(|z| z.re).collect());
        let want = sorted(lam.as_array().to_vec());
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-9 * w.abs(), "{got:?} vs {want:?}");
        }
        for z in back {
            prop_assert!(z.im.abs() <= 1e-9 * lam.max_abs());
        }
    }

    #[test]
    fn corollary_gains_match_their_triple_and_region(
        eps in 0.0001..0.2499f64,
        l in 0.0..20.0f64,
        stretch in 1.0001..5.0f64,
    ) {
        let lb = LipschitzBound::new(l).unwrap();
        let a = (5.0 * l).max(5.0) * stretch;
        let g = corollary_gains(eps, a, lb).unwrap();
        prop_assert_eq!(g, lambda_to_gains(&corollary_triple(eps, a)));
        prop_assert!(in_omega_k(&g, lb).member);
    }

    #[test]
    fn region_is_open_around_members(
        l1 in -2.0..-0.05f64,
        gap in 0.05..2.0f64,
        l3 in -5000.0..-200.0f64,
        signs in prop::array::uniform3(prop::bool::ANY),
    ) {
        let lam = EigenTriple { lambda1: l1, lambda2: l1 - gap, lambda3: l3 };
        let l = LipschitzBound::new(1.0).unwrap();
        let report = in_omega_lambda(&lam, l);
        prop_assume!(report.member && report.product_l_phi_h < 0.999);
        let delta = 1e-6 * f64::max(1.0, lam.max_abs());
        let d = signs.map(|s| if s { delta } else { -delta });
        let moved = EigenTriple { lambda1: l1 + d[0], lambda2: l1 - gap + d[1], lambda3: l3 + d[2] };
        prop_assert!(in_omega_lambda(&moved, l).member);
    }

    #[test]
    fn deep_third_eigenvalue_drives_product_down(l1 in -2.0..-0.05f64, gap in 0.05..2.0f64, l in 0.1..10.0f64) {
        let l2 = l1 - gap;
        let lb = LipschitzBound::new(l).unwrap();
        let product = |l3: f64| {
            let lam = EigenTriple { lambda1: l1, lambda2: l2, lambda3: l3 };
            l * phi(&lam).unwrap() * h(&lam).unwrap()
        };
        let mut l3 = -10.0;
        let mut last = product(l3);
        while last >= 1.0 {
            l3 *= 2.0;
            let next = product(l3);
            prop_assert!(next < last);
            last = next;
            prop_assert!(l3 > -1e15);
        }
        let deeper = EigenTriple { lambda1: l1, lambda2: l2, lambda3: 4.0 * l3 };
        prop_assert!(in_omega_lambda(&deeper, lb).member);
    }

    #[test]
    fn corollary_gains_grow_linearly_in_l(eps in 0.001..0.249f64, l in 0.0..1e4f64) {
        let lb = LipschitzBound::new(l).unwrap();
        let g = corollary_gains(eps, 5.1 * l.max(1.0), lb).unwrap();
        prop_assert!(g.kp.abs() <= 8.0 * l.max(1.0));
        prop_assert!(g.kd.abs() <= 8.0 * l.max(1.0));
    }

    #[test]
    fn membership_iff_no_failure_reasons(kp in -400.0..50.0f64, ki in -400.0..50.0f64, kd in -200.0..50.0f64, l in 0.0..5.0f64) {
        let lb = LipschitzBound::new(l).unwrap();
        let gains = pidreg_core::gain_design::PidGains { kp, ki, kd };
        let r = in_omega_k(&gains, lb);
        prop_assert_eq!(r.member, r.failure_reasons.is_empty());
    }
}
