mod common;

use std::f64::consts::{LN_2, PI};

use impdde::config::load_system;
use impdde::history::ConstantHistory;
use impdde::impulse_algebra::{b_omega, b_window, bounds, d, gamma, j};
use impdde::{History, Hypothesis, ImpulseMap, Side, SystemSpec};
use proptest::prelude::*;

/// Piecewise constant and exactly periodic, so shifted reads agree bit for bit.
struct Steps {
    omega: f64,
    levels: Vec<Vec<f64>>,
}

impl Steps {
    fn new(omega: f64, n: usize, seeds: &[f64]) -> Steps {
        let m = seeds.len() / n;
        let levels = (0..n).map(|i| seeds[i * m..(i + 1) * m].iter().map(|s| 10f64.powf(6.0 * s - 3.0)).collect()).collect();
        Steps { omega, levels }
    }
}

impl History for Steps {
    fn dim(&self) -> usize {
        self.levels.len()
    }

    fn value(&self, i: usize, t: f64, _side: Side) -> f64 {
        let l = &self.levels[i];
        let u = (t / self.omega).rem_euclid(1.0);
        l[((u * l.len() as f64) as usize).min(l.len() - 1)]
    }

    fn integrate(&self, i: usize, a: f64, b: f64, f: &dyn Fn(f64, f64) -> f64) -> f64 {
        common::simpson(|s| f(s, self.value(i, s, Side::Left)), a, b, 2000)
    }
}

fn impulse_toml(kind: u8, eta: f64) -> String {
    match kind {
        0 => format!("{{ kind = \"linear\", eta = {eta} }}"),
        1 => format!("{{ kind = \"saturating\", eta = {eta}, scale = 0.7 }}"),
        _ => {
            let (a, e) = (eta.min(0.0) - 0.1, eta.max(0.0) + 0.1);
            format!(
                "{{ kind = \"bounded_slope\", alpha = {a}, eta = {e}, table = [[0.0, 0.0], [1.0, {}], [2.0, {}], [4.0, {}]] }}",
                e,
                e + a,
                e + a + 2.0 * e
            )
        }
    }
}

/// Scalar or planar system with `p` impulses of mixed kinds.
fn random_impulsive(n: usize, omega: f64, instants: &[f64], kinds: &[u8], etas: &[f64]) -> SystemSpec {
    let mut text = format!("omega = {omega}\nimpulse_instants = {instants:?}\n");
    for i in 0..n {
        let maps: Vec<String> = (0..instants.len()).map(|k| impulse_toml(kinds[i * 4 + k], etas[i * 4 + k])).collect();
        text += &format!(
            "[[component]]\ndeath = {{ mean = 2.0, cos = [0.5] }}\nimpulses = [{}]\nnonlinearity = {{ kind = \"nicholson_discrete\", terms = [{{ beta = 1.0, tau = 0.3 }}] }}\n",
            maps.join(", ")
        );
    }
    if n == 2 {
        text += "[[coupling]]\ni = 1\nj = 2\na = 0.5\n[[coupling]]\ni = 2\nj = 1\na = 0.5\n";
    }
    load_system(&text).unwrap()
}

fn sandwich(spec: &SystemSpec, h: &Steps, windows: &[(f64, f64)], us: &[f64]) -> Result<(), TestCaseError> {
    let bs = bounds(spec).unwrap();
    let sched = spec.impulses();
    for i in 0..spec.n() {
        let b = &bs[i];
        for k in 0..sched.p() {
            let m = sched.map(k, i);
            for &u in us {
                let v = j(m, u * 50.0);
                prop_assert!(m.j_lower() <= v && v <= m.j_upper(), "J = {v} outside [{}, {}]", m.j_lower(), m.j_upper());
            }
        }
        for &(from, len) in windows {
            let from = from * spec.omega();
            let w = b_window(spec, i, h, from, from + len * spec.omega());
            prop_assert!(b.b_lower <= w && w <= b.b_upper, "B~ = {w} outside [{}, {}]", b.b_lower, b.b_upper);
        }
        let g = gamma(spec, i, h).unwrap();
        prop_assert!(b.gamma_lower <= g && g <= b.gamma_upper, "Gamma = {g} outside [{}, {}]", b.gamma_lower, b.gamma_upper);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn sandwich_on_zoo(seeds in prop::collection::vec(0.0..1.0f64, 32), windows in prop::collection::vec((0.0..1.0f64, 0.0..=1.0f64), 4),
                       us in prop::collection::vec(0.0..1.0f64, 4)) {
        for (_, spec) in common::zoo_specs() {
            let h = Steps::new(spec.omega(), spec.n(), &seeds[..16 * spec.n()]);
            sandwich(&spec, &h, &windows, &us)?;
        }
    }

    #[test]
    fn sandwich_on_random_schedules(n in 1usize..=2, p in 1usize..=4, raw in prop::collection::vec(0.0..1.0f64, 4),
                                    kinds in prop::collection::vec(0u8..3, 8), etas in prop::collection::vec(-0.6..0.6f64, 8),
                                    seeds in prop::collection::vec(0.0..1.0f64, 32), windows in prop::collection::vec((0.0..1.0f64, 0.0..=1.0f64), 4),
                                    us in prop::collection::vec(0.0..1.0f64, 4)) {
        let omega = 1.3;
        let mut inst: Vec<f64> = raw[..p].iter().map(|r| (r * omega * 1e6).round() / 1e6).collect();
        inst.sort_by(f64::total_cmp);
        inst.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        if inst.last().copied().unwrap_or(0.0) >= omega { inst.pop(); }
        let spec = random_impulsive(n, omega, &inst, &kinds, &etas);
        let h = Steps::new(omega, n, &seeds[..16 * n]);
        sandwich(&spec, &h, &windows, &us)?;
    }

    #[test]
    fn cocycle_and_shift(raw in prop::collection::vec(0.0..1.0f64, 4), etas in prop::collection::vec(-0.6..0.6f64, 8),
                         seeds in prop::collection::vec(0.0..1.0f64, 16), a in 0.0..1.0f64, s1 in 0.0..1.0f64, s2 in 0.0..1.0f64) {
        let omega = 2.0;
        let mut inst: Vec<f64> = raw.iter().map(|r| (r * omega * 1e6).round() / 1e6).collect();
        inst.sort_by(f64::total_cmp);
        inst.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        let spec = random_impulsive(1, omega, &inst, &[0, 1, 2, 0, 1, 2, 0, 1], &etas);
        let h = Steps::new(omega, 1, &seeds);
        let t = a * omega - 3.0 * omega;
        let (lo, hi) = (s1.min(s2), s1.max(s2));
        let (s, r) = (t + lo * omega, t + hi * omega);
        let left = b_window(&spec, 0, &h, t, s) * b_window(&spec, 0, &h, s, r);
        let whole = b_window(&spec, 0, &h, t, r);
        prop_assert!((left - whole).abs() <= 1e-12 * whole, "{left} vs {whole}");
        for q in [1.0, 2.0, 7.0] {
            prop_assert_eq!(b_window(&spec, 0, &h, t + q * omega, s + q * omega), b_window(&spec, 0, &h, t, s));
        }
    }
}

#[test]
fn d_examples() {
    let two = common::linear_decay(2.0, 1.0, None);
    assert!((d(&two, 0, 1.0) - 2.0).abs() < 1e-15);
    assert_eq!(d(&two, 0, 0.0), 0.0);
    let sin2 = load_system(
        r#"
omega = 3.141592653589793
[[component]]
death = { mean = 0.5, cos = [-0.5] }
nonlinearity = { kind = "nicholson_discrete", terms = [{ beta = 1.0, tau = 1.0 }] }
"#,
    )
    .unwrap();
    assert!((d(&sin2, 0, PI) - PI / 2.0).abs() < 1e-14);
    assert_eq!(d(&sin2, 0, 0.0), 0.0);
    // t/2 - sin(2t)/4
    for t in [0.4, 1.7, 5.5, -2.0] {
        assert!((d(&sin2, 0, t) - (t / 2.0 - (2.0 * t).sin() / 4.0)).abs() < 1e-14);
    }
}

#[test]
fn j_examples() {
    assert_eq!(j(&ImpulseMap::linear(1.0).unwrap(), 3.0), 0.5);
    for u in [0.0, 0.5, 7.0] {
        assert_eq!(j(&ImpulseMap::none(), u), 1.0);
    }
    // u / (u + u/(1+u)) at u = 1
    let v = j(&ImpulseMap::saturating(1.0, 1.0).unwrap(), 1.0);
    assert!((v - 2.0 / 3.0).abs() < 1e-15, "{v}");
}

#[test]
fn b_window_examples() {
    let none = common::linear_decay(1.0, 1.0, None);
    let x = ConstantHistory(vec![3.0]);
    assert_eq!(b_window(&none, 0, &x, 0.2, 0.9), 1.0);
    let one = common::linear_decay(1.0, 1.0, Some((0.4, 1.0)));
    assert_eq!(b_window(&one, 0, &x, 0.2, 0.9), 0.5);
    assert_eq!(b_window(&one, 0, &x, 0.4, 0.9), 0.5);
    assert_eq!(b_window(&one, 0, &x, 0.2, 0.4), 1.0);
    assert_eq!(b_window(&one, 0, &x, 0.9, 1.3), 1.0);
    assert_eq!(b_window(&one, 0, &x, 0.9, 1.5), 0.5);
    assert_eq!(b_window(&one, 0, &x, 5.2, 5.9), 0.5);
}

#[test]
fn gamma_examples() {
    let x = ConstantHistory(vec![1.0]);
    let sin2 = load_system(
        r#"
omega = 3.141592653589793
[[component]]
death = { mean = 0.5, cos = [-0.5] }
nonlinearity = { kind = "nicholson_discrete", terms = [{ beta = 1.0, tau = 1.0 }] }
"#,
    )
    .unwrap();
    let g = gamma(&sin2, 0, &x).unwrap();
    assert!((g - 1.0 / ((PI / 2.0).exp() - 1.0)).abs() < 1e-14);
    assert!((g - 0.26243).abs() < 1e-5);

    // prod (1 + eta_k) = 1
    let spec = load_system(
        r#"
omega = 1.0
impulse_instants = [0.3, 0.6]
[[component]]
death = 1.5
impulses = [{ kind = "linear", eta = 1.0 }, { kind = "linear", eta = -0.5 }]
nonlinearity = { kind = "nicholson_discrete", terms = [{ beta = 1.0, tau = 1.0 }] }
"#,
    )
    .unwrap();
    let g = gamma(&spec, 0, &x).unwrap();
    assert!((g - 1.0 / (1.5f64.exp() - 1.0)).abs() < 1e-14);

    let omega = LN_2 / 2.0;
    for eta in [-0.5, 0.0, 0.1, 0.3, 0.9] {
        let spec = common::linear_decay(2.0, omega, Some((0.1, eta)));
        let g = gamma(&spec, 0, &x).unwrap();
        assert!(common::rel_err(g, (1.0 + eta) / (1.0 - eta)) < 1e-12, "eta {eta}: {g}");
    }
}

#[test]
fn planar_closed_forms() {
    let omega = LN_2 / 2.0;
    let e = (2.0 * omega).exp();
    for eta in [0.0, 0.1, 0.2, 0.3] {
        let spec = impdde::zoo::planar_autonomous(omega, [eta, eta]).unwrap().spec;
        for b in bounds(&spec).unwrap() {
            let m1 = (e - 1.0) / (e - (1.0 + eta));
            let m2 = (e - 1.0) / (e / (1.0 + eta) - 1.0);
            assert!((b.m1 - m1).abs() <= 1e-12, "eta {eta}: m1 {} vs {m1}", b.m1);
            assert!((b.m2 - m2).abs() <= 1e-12, "eta {eta}: m2 {} vs {m2}", b.m2);
        }
    }
}

#[test]
fn h3_refusal_names_the_product() {
    // e^(D(omega)) = 2, so eta = 1 sits on the boundary
    for eta in [1.0, 1.2] {
        let text = format!(
            "omega = {}\nimpulse_instants = [0.1]\n[[component]]\ndeath = 2.0\nimpulses = [{{ kind = \"linear\", eta = {eta} }}]\nnonlinearity = {{ kind = \"nicholson_discrete\", terms = [{{ beta = 1.0, tau = 1.0 }}] }}\n",
            LN_2 / 2.0
        );
        let err = load_system(&text).unwrap_err();
        assert_eq!(err.tag(), Some(Hypothesis::H3), "{err}");
        assert!(err.to_string().contains("e^(D(omega))"), "{err}");
    }
}

#[test]
fn no_impulses_collapse() {
    for (_, spec) in common::zoo_specs() {
        let plain = spec.without_impulses();
        let x = ConstantHistory(vec![0.7; plain.n()]);
        for (i, b) in bounds(&plain).unwrap().iter().enumerate() {
            let e = plain.d_omega(i).exp();
            assert_eq!((b.b_lower, b.b_upper), (1.0, 1.0));
            assert!(common::rel_err(b.gamma_lower, 1.0 / (e - 1.0)) < 1e-14);
            assert_eq!(b.gamma_lower, b.gamma_upper);
            assert!((b.m1 - 1.0).abs() < 1e-14 && (b.m2 - 1.0).abs() < 1e-14);
            assert!(common::rel_err(b.sigma, 1.0 / e) < 1e-14);
            assert_eq!(b_omega(&plain, i, &x), 1.0);
            assert_eq!(b_window(&plain, i, &x, 0.1, 0.1 + plain.omega()), 1.0);
            assert!(common::rel_err(gamma(&plain, i, &x).unwrap(), 1.0 / (e - 1.0)) < 1e-14);
        }
    }
}

#[test]
fn bounds_invariants() {
    for (id, spec) in common::zoo_specs() {
        for b in bounds(&spec).unwrap() {
            assert!(0.0 < b.b_lower && b.b_lower <= b.b_upper, "{id}");
            assert!(0.0 < b.gamma_lower && b.gamma_lower <= b.gamma_upper, "{id}");
            assert!(0.0 < b.sigma && b.sigma < 1.0, "{id}");
            let e = b.d_omega.exp();
            assert!(common::rel_err(b.n1, b.gamma_lower * b.b_lower) < 1e-14);
            assert!(common::rel_err(b.n2, b.gamma_upper * b.b_upper * e) < 1e-14);
            assert!(common::rel_err(b.m1, b.gamma_lower * b.b_lower * (e - 1.0)) < 1e-12, "{id}");
            assert!(common::rel_err(b.m2, b.gamma_upper * b.b_upper * (e - 1.0)) < 1e-12, "{id}");
        }
    }
}
