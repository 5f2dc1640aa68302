use parthines::{ControllerConfig, ControllerState};

const TRACE: &str = include_str!("data/controller_trace.csv");

#[test]
fn controller_reproduces_golden_trace() {
    let mut rows = TRACE.lines().skip(1).peekable();
    let mut checked = 0;
    while rows.peek().is_some() {
        let mut ctrl: Option<ControllerState> = None;
        while let Some(line) = rows.peek() {
            let f: Vec<&str> = line.split(',').collect();
            let (k, step): (u32, usize) = (f[0].parse().unwrap(), f[1].parse().unwrap());
            if step == 0 && ctrl.is_some() {
                break;
            }
            let c = ctrl
                .get_or_insert_with(|| ControllerState::new(0.01, k, ControllerConfig::default()));
            let ratio: f64 = f[2].parse().unwrap();
            let d = c.propose(ratio, 0.0).unwrap();
            assert_eq!(d.accept, f[3] == "1", "k {k} step {step}");
            let expected: f64 = f[4].parse().unwrap();
            assert!(
                (d.h_next - expected).abs() <= 1e-14 * expected,
                "k {k} step {step}: {} vs {expected}",
                d.h_next
            );
            checked += 1;
            rows.next();
        }
    }
    assert_eq!(checked, 82);
}
