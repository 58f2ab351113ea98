mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use impdde::config::{load_system, save_system};
use impdde::grid::{Grid, GridFunction};
use impdde::{Hypothesis, ImpulseMap, PeriodicFn, Side};
use proptest::prelude::*;

#[test]
fn fourier_values() {
    let sin2 = PeriodicFn::new(PI, 0.5, vec![-0.5], vec![]).unwrap();
    assert!((sin2.eval(PI / 2.0) - 1.0).abs() < 1e-15);
    let p = PeriodicFn::new(PI, 1.5, vec![1.5], vec![]).unwrap();
    assert!((p.eval(0.0) - 3.0).abs() < 1e-15);
    for t in [0.3, 1.1, 2.9] {
        // direct formulas
        assert!((sin2.eval(t) - t.sin().powi(2)).abs() < 1e-15);
        assert!((p.eval(t) - 3.0 * t.cos().powi(2)).abs() < 1e-14);
    }
    assert_eq!(PeriodicFn::constant(1.0, 2.0).eval(17.3), 2.0);
}

#[test]
fn nonneg_flag_names_coefficient() {
    let f = PeriodicFn::new(1.0, 0.1, vec![1.0], vec![]).unwrap();
    let err = f.into_nonneg("d_1").unwrap_err();
    assert!(err.to_string().contains("d_1"), "{err}");
}

proptest! {
    #[test]
    fn periodic_shift(mean in -3.0..3.0f64, cos in prop::collection::vec(-2.0..2.0f64, 0..5),
                      sin in prop::collection::vec(-2.0..2.0f64, 0..5), omega in 0.1..10.0f64, t in -50.0..50.0f64) {
        let f = PeriodicFn::new(omega, mean, cos, sin).unwrap();
        let (a, b) = (f.eval(t), f.eval(t + omega));
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn impulse_sector_linear(eta in -0.99..5.0f64, u in prop::collection::vec(0.0..100.0f64, 1000)) {
        let m = ImpulseMap::linear(eta).unwrap();
        for u in u {
            let i = m.apply(u);
            prop_assert!(eta * u <= i && i <= eta * u);
        }
    }

    #[test]
    fn impulse_sector_saturating(eta in -0.99..5.0f64, scale in 0.01..10.0f64, u in prop::collection::vec(0.0..1.0f64, 1000)) {
        let m = ImpulseMap::saturating(eta, scale).unwrap();
        for u in u {
            let u = u * 10.0 * scale;
            let i = m.apply(u);
            prop_assert!(m.alpha() * u <= i && i <= m.eta() * u, "u {u}: {} <= {i} <= {}", m.alpha() * u, m.eta() * u);
        }
    }

    #[test]
    fn impulse_sector_table(a in -0.9..0.0f64, e in 0.0..2.0f64, w in prop::collection::vec(0.0..1.0f64, 4),
                            u in prop::collection::vec(0.0..20.0f64, 1000)) {
        // every segment slope in [a, e], so the chords are too
        let mut table = vec![(0.0, 0.0)];
        for (k, w) in w.iter().enumerate() {
            let prev = table[k].1;
            table.push(((k + 1) as f64, prev + a + (e - a) * w));
        }
        let m = ImpulseMap::bounded_slope(a, e, table, None).unwrap();
        for u in u {
            let i = m.apply(u);
            prop_assert!(a * u <= i && i <= e * u, "u {u}: {} <= {i} <= {}", a * u, e * u);
        }
    }
}

#[test]
fn example_configs_load() {
    let planar = r#"
omega = 0.34657359027997264
[[component]]
death = 2.0
nonlinearity = { kind = "nicholson_discrete", terms = [{ beta = 1.0, tau = 1.0 }] }
[[component]]
death = 2.0
nonlinearity = { kind = "nicholson_discrete", terms = [{ beta = 1.0, tau = 1.0 }] }
[[coupling]]
i = 1
j = 2
a = 1.0
[[coupling]]
i = 2
j = 1
a = 1.0
"#;
    let s = load_system(planar).unwrap();
    assert_eq!(s.n(), 2);
    s.check_h3().unwrap();
    let scalar = r#"
omega = 3.141592653589793
[[component]]
death = { mean = 0.5, cos = [-0.5] }
nonlinearity = { kind = "nicholson_discrete", terms = [{ beta = { mean = 1.5, cos = [1.5] }, tau = 1.0 }] }
"#;
    assert_eq!(load_system(scalar).unwrap().n(), 1);
}

fn expect_tag(text: &str, tag: Hypothesis) {
    let err = load_system(text).unwrap_err();
    assert_eq!(err.tag(), Some(tag), "{err}");
    assert!(err.to_string().contains(tag.tag()), "{err}");
}

#[test]
fn hypothesis_violations_are_tagged() {
    expect_tag(
        r#"
omega = 1.0
impulse_instants = [0.5]
[[component]]
death = 1.0
impulses = [{ kind = "bounded_slope", alpha = -1.5, eta = 0.5, table = [[0.0, 0.0], [1.0, 0.1]] }]
nonlinearity = { kind = "nicholson_discrete", terms = [{ beta = 2.0, tau = 0.5 }] }
"#,
        Hypothesis::H2,
    );
    expect_tag(
        r#"
omega = 1.0
impulse_instants = [0.5]
[[component]]
death = 1.0
impulses = [{ kind = "linear", eta = -1.5 }]
nonlinearity = { kind = "nicholson_discrete", terms = [{ beta = 2.0, tau = 0.5 }] }
"#,
        Hypothesis::H2,
    );
    expect_tag(
        r#"
omega = 1.0
[[component]]
death = { mean = 0.0, cos = [0.0] }
nonlinearity = { kind = "nicholson_discrete", terms = [{ beta = 2.0, tau = 0.5 }] }
"#,
        Hypothesis::H4,
    );
    // n > 1 with neither coupling nor g(t, 0) > 0
    expect_tag(
        r#"
omega = 1.0
[[component]]
death = 1.0
nonlinearity = { kind = "nicholson_discrete", terms = [{ beta = 2.0, tau = 0.5 }] }
[[component]]
death = 1.0
nonlinearity = { kind = "nicholson_discrete", terms = [{ beta = 2.0, tau = 0.5 }] }
"#,
        Hypothesis::H4,
    );
    // instants outside [0, omega)
    expect_tag(
        r#"
omega = 1.0
impulse_instants = [1.5]
[[component]]
death = 1.0
impulses = [{ kind = "linear", eta = 0.1 }]
nonlinearity = { kind = "nicholson_discrete", terms = [{ beta = 2.0, tau = 0.5 }] }
"#,
        Hypothesis::H1,
    );
}

#[test]
fn every_zoo_entry_round_trips() {
    for (id, spec) in common::zoo_specs() {
        let text = save_system(&spec);
        let again = load_system(&text).unwrap_or_else(|e| panic!("{id}: {e}"));
        assert_eq!(spec, again, "{id}");
        assert_eq!(text, save_system(&again), "{id}");
    }
}

#[test]
fn history_windows() {
    let g = Arc::new(Grid::uniform(1.0, 64));
    let c = GridFunction::constant(g, &[2.0]);
    for s in [-1.0, -0.25, 0.0] {
        assert_eq!(c.eval(0, 3.7 + s, Side::Left), 2.0);
    }

    // |sin t| with omega = pi; read at t - tau with t = pi, tau = pi/2
    let g = Arc::new(Grid::uniform(PI, 512));
    let x = GridFunction::from_fn(g, 1, |_, t, _| t.sin().abs());
    let v = x.eval(0, PI - PI / 2.0, Side::Left);
    assert!((v - 1.0).abs() < 1e-9, "{v}");
    for t in [0.1, 1.3, 2.2, -0.7, 5.0] {
        assert!((x.eval(0, t, Side::Left) - t.sin().abs()).abs() < 1e-8);
    }
}

#[test]
fn reads_at_impulse_instants_are_one_sided() {
    let spec = impdde::zoo::entry("planar_autonomous").unwrap().spec;
    let grid = Arc::new(Grid::for_spec(&spec, 64));
    let tk = spec.impulses().instants()[0];
    let x = GridFunction::from_fn(grid, 2, |_, t, side| if side == Side::Right && (t - tk).abs() < 1e-12 { 5.0 } else { 1.0 });
    assert_eq!(x.eval(0, tk, Side::Left), 1.0);
    assert_eq!(x.eval(0, tk, Side::Right), 5.0);
    assert_eq!(x.eval(0, tk + spec.omega(), Side::Left), 1.0);
}
