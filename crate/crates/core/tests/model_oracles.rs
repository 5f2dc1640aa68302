use parthines::models::{hh, parse_config, psi, sds, write_config, GateSign, SDSParams};
use parthines::*;

#[test]
fn psi_reflection_identity() {
    for k in 0..=600 {
        let x = -30.0 + k as f64 * 0.1;
        let lhs = psi(-x);
        let rhs = psi(x) * x.exp();
        assert!(
            (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0),
            "x = {x}: {lhs} vs {rhs}"
        );
    }
}

#[test]
fn psi_is_decreasing() {
    let vals: Vec<f64> = (0..=2000).map(|k| psi(-40.0 + k as f64 * 0.04)).collect();
    assert!(vals.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn hh_rates_at_rest() {
    // alpha_n(0) = 0.1 / (e - 1)
    assert!((hh::alpha_n(0.0) - 0.1 / (std::f64::consts::E - 1.0)).abs() < 1e-15);
    assert!((hh::alpha_n(0.0) - 0.058198).abs() < 1e-6);
    // removable singularities
    assert!((hh::alpha_n(-10.0) - 0.1).abs() < 1e-15);
    assert!((hh::alpha_m(-25.0) - 1.0).abs() < 1e-15);
}

#[test]
fn sds_rates_are_continuous() {
    let eps = 1e-12;
    assert!((sds::alpha_r(-0.07 - eps) - sds::alpha_r(-0.07 + eps)).abs() < 1e-9);
    assert!((sds::alpha_r(-0.07) + sds::beta_r(-0.07) - 5.0).abs() < 1e-15);
    // removable singularities
    assert!((sds::alpha_m(-0.045) - 1e3).abs() < 1e-12);
    assert!((sds::alpha_m(-0.045 - eps) - sds::alpha_m(-0.045 + eps)).abs() < 1e-6);
    assert!((sds::alpha_n(-0.06) - 100.0).abs() < 1e-12);
    assert!((sds::alpha_n(-0.06 - eps) - sds::alpha_n(-0.06 + eps)).abs() < 1e-6);
    assert!((sds::beta_s(-0.0189) - 100.0).abs() < 1e-12);
}

#[test]
fn config_round_trip() {
    for kind in [ModelKind::Hh, ModelKind::Sds] {
        let spec = ModelSpec::standard(kind);
        assert_eq!(parse_config(&write_config(&spec)).unwrap(), spec);
    }
    let custom = parse_config("model = hh\n# a comment\nI = 10\nt_end = 50\n").unwrap();
    let ModelSpec::Hh { params, t_end, .. } = custom else {
        panic!("expected hh");
    };
    assert_eq!((params.i, t_end), (10.0, 50.0));
    assert_eq!(parse_config(&write_config(&custom)).unwrap(), custom);

    let verbatim = parse_config("model = sds\ngate_sign = verbatim\n").unwrap();
    let ModelSpec::Sds { params, .. } = &verbatim else {
        panic!("expected sds");
    };
    assert_eq!(params.gate_sign, GateSign::Verbatim);
    assert_eq!(parse_config(&write_config(&verbatim)).unwrap(), verbatim);
    assert_eq!(SDSParams::default().gate_sign, GateSign::Standard);
}

#[test]
fn config_errors_name_the_line() {
    let cases = [
        ("model = hh\nbogus = 1\n", 2),
        ("model = hh\nI = 1\nI = 2\n", 3),
        ("model = hh\nI = abc\n", 2),
        ("model = hh\njust text\n", 2),
        ("I = 1\n", 0),
        ("model = xyz\n", 1),
    ];
    for (text, line) in cases {
        match parse_config(text) {
            Err(Error::Config { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
}

#[test]
fn assignments_describe_the_same_vector_field() {
    for kind in [ModelKind::Hh, ModelKind::Sds] {
        let spec = ModelSpec::standard(kind);
        let a = spec.build(BlockAssignment::VoltagesAsX);
        let b = spec.build(BlockAssignment::GatesAsX);
        let z = spec.initial();
        let fa = evaluate(
            a.system.as_ref(),
            &a.from_canonical(0.0, z),
            &mut EvalCounter::new(),
        )
        .unwrap();
        let fb = evaluate(
            b.system.as_ref(),
            &b.from_canonical(0.0, z),
            &mut EvalCounter::new(),
        )
        .unwrap();
        let ca = a.to_canonical(&SplitState::new(0.0, fa.0, fa.1));
        let cb = b.to_canonical(&SplitState::new(0.0, fb.0, fb.1));
        assert_eq!(ca, cb, "{kind:?}");
        assert_eq!(a.canonical_typical_size(), b.canonical_typical_size());
    }
}

#[test]
fn assignments_converge_to_the_same_solution() {
    let spec = ModelSpec::standard(ModelKind::Hh);
    let cfg = StageSolveConfig::default();
    let finals: Vec<Vec<f64>> = BlockAssignment::ALL
        .iter()
        .map(|&asg| {
            let p = spec.build(asg);
            let run = integrate_constant(
                p.system.as_ref(),
                &p.initial,
                p.t_end,
                1 << 14,
                ConstantMethod::CmHines,
                &cfg,
                false,
            )
            .unwrap();
            p.to_canonical(&run.final_state)
        })
        .collect();
    let typical = spec
        .build(BlockAssignment::VoltagesAsX)
        .canonical_typical_size();
    let d = parthines::harness::mixed_error_norm(&finals[0], &finals[1], &typical);
    assert!(d < 1e-6, "{d}");
}

#[test]
fn hh_gates_stay_in_unit_interval() {
    let (s0, t_end) = models::paper_initial_conditions(ModelKind::Hh);
    let sys = models::HodgkinHuxley::new(models::HHParams::default());
    let cfg = StageSolveConfig::default();
    for method in [ConstantMethod::Hines, ConstantMethod::CmHines] {
        let run = integrate_constant(&sys, &s0, t_end, 2000, method, &cfg, true).unwrap();
        assert!(!run.samples.is_empty());
        for s in &run.samples {
            assert!(
                s.y.iter().all(|g| (0.0..=1.0).contains(g)),
                "{method:?} t = {}: {:?}",
                s.t,
                s.y
            );
        }
    }
}

#[test]
fn sds_gates_stay_in_unit_interval() {
    let p = ModelSpec::standard(ModelKind::Sds).build(BlockAssignment::VoltagesAsX);
    let cfg = StageSolveConfig::default();
    let run = integrate_constant(
        p.system.as_ref(),
        &p.initial,
        p.t_end,
        1 << 14,
        ConstantMethod::CmHines,
        &cfg,
        true,
    )
    .unwrap();
    for s in &run.samples {
        assert!(s.y[0] > 0.0, "calcium at t = {}", s.t);
        assert!(
            s.y[1..].iter().all(|g| (0.0..=1.0).contains(g)),
            "t = {}: {:?}",
            s.t,
            s.y
        );
    }
}
