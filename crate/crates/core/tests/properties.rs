use approx::assert_relative_eq;
use parthines::stability::{
    char_poly, is_stable, quadratic_roots, recursion_matrix, RecursionMethod, TestSystemParams,
};
use parthines::*;
use proptest::prelude::*;

fn admissible() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (-2.0f64..2.0, -2.0f64..2.0, -5.0f64..5.0, -5.0f64..5.0)
        .prop_map(|(lm, ll, a, b)| (-10f64.powf(lm), -10f64.powf(ll), a, b))
        .prop_filter("ab < mu lambda", |(mu, la, a, b)| a * b < mu * la)
}

fn hh_state() -> impl Strategy<Value = SplitState> {
    (-100.0f64..40.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0)
        .prop_map(|(v, m, n, h)| SplitState::new(0.0, vec![v], vec![m, n, h]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn controller_is_deterministic(r in 0.0f64..50.0, prev in 1e-6f64..10.0, h in 1e-6f64..1.0, k in 2u32..4) {
        let mut a = ControllerState::new(h, k, ControllerConfig::default());
        a.prev_error_ratio = prev;
        let mut b = a.clone();
        prop_assert_eq!(a.propose(r, 0.0).unwrap(), b.propose(r, 0.0).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn controller_accepts_iff_ratio_at_most_one(r in 0.0f64..50.0, prev in 1e-6f64..10.0, h in 1e-6f64..1.0) {
        let cfg = ControllerConfig::default();
        let mut c = ControllerState::new(h, 3, cfg);
        c.prev_error_ratio = prev;
        let d = c.propose(r, 0.0).unwrap();
        prop_assert_eq!(d.accept, r <= 1.0);
        if d.accept {
            prop_assert!(d.h_next >= cfg.shrink_min * h * (1.0 - 1e-15));
            prop_assert!(d.h_next <= cfg.growth_max * h * (1.0 + 1e-15));
            prop_assert_eq!(c.prev_error_ratio, r.max(parthines::adaptive::RATIO_FLOOR));
        } else {
            // rejection always shrinks, by at least the rejection factor
            prop_assert!(d.h_next <= cfg.reject_factor * h * (1.0 + 1e-15));
            prop_assert!(d.h_next >= cfg.shrink_min * h * (1.0 - 1e-15));
            prop_assert_eq!(c.prev_error_ratio, prev);
        }
    }

    #[test]
    // Larger steps on this box amplify rounding in the two stage formulas.
    fn pr_form_equals_modified_step(s in hh_state(), h in 1e-3f64..0.1) {
        let sys = models::HodgkinHuxley::new(models::HHParams::default());
        let cfg = StageSolveConfig::default();
        let a = modified_step(&sys, &s, h, &cfg, &mut EvalCounter::new()).unwrap();
        let b = pr_step(&sys, &s, h, &cfg, &mut EvalCounter::new()).unwrap();
        for (u, v) in a.stacked().iter().zip(b.stacked()) {
            assert_relative_eq!(*u, v, max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn swapping_blocks_permutes_the_field(s in hh_state()) {
        let sys = models::HodgkinHuxley::new(models::HHParams::default());
        let sw = Swapped::new(models::HodgkinHuxley::new(models::HHParams::default()));
        let (f, g) = evaluate(&sys, &s, &mut EvalCounter::new()).unwrap();
        let flipped = SplitState::new(s.t, s.y.clone(), s.x.clone());
        let (fs, gs) = evaluate(&sw, &flipped, &mut EvalCounter::new()).unwrap();
        prop_assert_eq!(f, gs);
        prop_assert_eq!(g, fs);
        prop_assert_eq!(sw.typical_size(), [&sys.typical_size()[1..], &sys.typical_size()[..1]].concat());
    }

    #[test]
    fn stacked_round_trip(x in prop::collection::vec(-1e3f64..1e3, 0..5), y in prop::collection::vec(-1e3f64..1e3, 0..5)) {
        let s = SplitState::new(1.5, x.clone(), y.clone());
        let back = SplitState::from_stacked(1.5, &s.stacked(), x.len());
        prop_assert_eq!(back, s);
    }

    #[test]
    fn consistency_check_passes_on_linear_systems(seed in 0u64..1000, (mu, la, a, b) in admissible()) {
        let sys = LinearSystem::test_system(mu, la, a, b);
        prop_assert!(consistency_check(&sys, 4, seed).unwrap() <= 1e-12);
    }

    #[test]
    fn verdict_matches_spectral_radius((mu, la, a, b) in admissible(), lh in -3.0f64..1.5) {
        let p = TestSystemParams::new(mu, la, a, b);
        let h = 10f64.powf(lh);
        let c = recursion_matrix(&p, h, RecursionMethod::Modified).unwrap();
        let sf = parthines::stability::stability_functions(&p, h, parthines::stability::Flavor::Discrete).unwrap();
        let v = is_stable(sf.alpha, sf.beta, p.gamma()).unwrap();
        prop_assume!(v.margin.abs() > 1e-9);
        let (cp, cq) = char_poly(sf.alpha, sf.beta, p.gamma());
        let rho = quadratic_roots(cp, cq).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert_eq!(v.stable, rho < 1.0);
        prop_assert!((parthines::stability::spectral_radius(&c) - rho).abs() <= 1e-9 * (1.0 + rho));
    }
}
