//! Built-in systems with expected quantities.

use std::f64::consts::PI;

use serde::Serialize;

use crate::config::load_system;
use crate::error::ModelError;
use crate::impulse_algebra;
use crate::periodic::PeriodicFn;
use crate::system::{EnvelopePair, SystemSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Source {
    /// Number printed in the source text.
    Published,
    /// Computed from a closed form by hand.
    Derived,
    /// Exact identity of the construction.
    Identity,
}

#[derive(Clone, Debug, Serialize)]
pub struct Expected {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub source: Source,
}

fn expect(name: &str, value: f64, tol: f64, source: Source) -> Expected {
    Expected { name: name.into(), value, tol, source }
}

#[derive(Clone, Debug)]
pub struct ZooEntry {
    pub id: &'static str,
    pub description: &'static str,
    pub spec: SystemSpec,
    pub expected: Vec<Expected>,
    pub metadata: Vec<String>,
}

impl ZooEntry {
    pub fn expected(&self, name: &str) -> Option<&Expected> {
        self.expected.iter().find(|e| e.name == name)
    }
}

pub const IDS: [&str; 7] = [
    "scalar_nicholson",
    "planar_autonomous",
    "hematopoiesis",
    "hematopoiesis_scalar",
    "nicholson_distributed",
    "nicholson_mixed",
    "mackey_glass",
];

/// `omega` with `e^{2 omega} = 2`.
pub fn planar_default_omega() -> f64 {
    2f64.ln() / 2.0
}

/// Impulse size of the default planar entry.
pub const PLANAR_DEFAULT_ETA: f64 = 0.2;

pub fn entry(id: &str) -> Option<ZooEntry> {
    let e = match id {
        "scalar_nicholson" => scalar_nicholson(),
        "planar_autonomous" => planar_autonomous(planar_default_omega(), [PLANAR_DEFAULT_ETA; 2]),
        "hematopoiesis" => hematopoiesis(),
        "hematopoiesis_scalar" => hematopoiesis_scalar(),
        "nicholson_distributed" => nicholson_distributed(),
        "nicholson_mixed" => nicholson_mixed(),
        "mackey_glass" => mackey_glass(),
        _ => return None,
    };
    Some(e.expect("built-in systems are valid"))
}

pub fn all() -> Vec<ZooEntry> {
    IDS.iter().map(|id| entry(id).expect("listed id")).collect()
}

/// `x' = -sin^2(t) x + 3 cos^2(t) x(t - 1) e^{-x(t - 1)}`, period `pi`.
pub fn scalar_nicholson() -> Result<ZooEntry, ModelError> {
    let text = format!(
        r#"
name = "scalar_nicholson"
omega = {PI:?}
[[component]]
death = {{ mean = 0.5, cos = [-0.5] }}
[component.nonlinearity]
kind = "nicholson_discrete"
terms = [{{ beta = {{ mean = 1.5, cos = [1.5] }}, tau = 1.0, c = 1.0 }}]
"#
    );
    let spec = load_system(&text)?;
    let e = (PI / 2.0).exp();
    let eps = 0.1;
    Ok(ZooEntry {
        id: "scalar_nicholson",
        description: "scalar Nicholson equation with d = sin^2 t, p = 3 cos^2 t, omega = pi",
        spec,
        expected: vec![
            expect("int_p", 4.712389, 5e-7, Source::Published),
            expect("int_p_exact", 3.0 * PI / 2.0, 1e-9, Source::Identity),
            expect("exp_D_minus_1", 3.81, 5e-3, Source::Published),
            expect("exp_D_minus_1_exact", e - 1.0, 1e-9, Source::Identity),
            expect("average_upper_eps_0.1", eps * PI * e / (e - 1.0), 1e-9, Source::Derived),
            expect("average_lower_eps_0.1", (1.0 - eps) * 1.5 * PI / (e - 1.0), 1e-9, Source::Derived),
        ],
        metadata: vec!["tau = 1 and c = 1 are fixed choices; the criterion does not depend on them".into()],
    })
}

/// Planar autonomous Nicholson system with `d = 2`, `a = beta = c = tau = 1`
/// and one linear impulse per period at `omega / 2` (none when `eta = 0`).
pub fn planar_autonomous(omega: f64, eta: [f64; 2]) -> Result<ZooEntry, ModelError> {
    let impulsive = eta.iter().any(|&e| e != 0.0);
    let (instants, imp) = if impulsive {
        (
            format!("impulse_instants = [{:?}]", omega / 2.0),
            eta.map(|e| format!("impulses = [{{ kind = \"linear\", eta = {e:?} }}]")),
        )
    } else {
        (String::new(), [String::new(), String::new()])
    };
    let text = format!(
        r#"
name = "planar_autonomous"
omega = {omega:?}
{instants}
[[component]]
death = 2.0
{i0}
nonlinearity = {{ kind = "nicholson_discrete", terms = [{{ beta = 1.0, tau = 1.0 }}] }}
[[component]]
death = 2.0
{i1}
nonlinearity = {{ kind = "nicholson_discrete", terms = [{{ beta = 1.0, tau = 1.0 }}] }}
[[coupling]]
i = 1
j = 2
a = 1.0
[[coupling]]
i = 2
j = 1
a = 1.0
"#,
        i0 = imp[0],
        i1 = imp[1]
    );
    let spec = load_system(&text)?;
    let e = (2.0 * omega).exp();
    let mut expected = vec![expect("threshold", (e - 1.0) / (e + 1.0), 1e-12, Source::Published)];
    for (i, &h) in eta.iter().enumerate() {
        expected.push(expect(&format!("m1_{}", i + 1), (e - 1.0) / (e - (1.0 + h)), 1e-12, Source::Published));
        expected.push(expect(&format!("m2_{}", i + 1), (e - 1.0) / (e / (1.0 + h) - 1.0), 1e-12, Source::Published));
    }
    Ok(ZooEntry {
        id: "planar_autonomous",
        description: "planar Nicholson system d = 2, a = beta = 1; extinct without impulses",
        spec,
        expected,
        metadata: vec!["impulse instant placed at omega/2".into()],
    })
}

fn with_constant_envelopes(spec: SystemSpec, b1: f64, b2: f64, r0: f64, big_r0: f64) -> Result<SystemSpec, ModelError> {
    let w = spec.omega();
    let n = spec.n();
    let env = EnvelopePair::new(vec![PeriodicFn::constant(w, b1); n], vec![PeriodicFn::constant(w, b2); n], r0, big_r0)?;
    spec.with_envelopes(env)
}

pub fn hematopoiesis() -> Result<ZooEntry, ModelError> {
    let text = r#"
name = "hematopoiesis"
omega = 1.0
impulse_instants = [0.5]
[[component]]
death = { mean = 1.0, cos = [0.3] }
impulses = [{ kind = "linear", eta = 0.1 }]
[component.nonlinearity]
kind = "hematopoiesis_distributed"
terms = [{ beta = { mean = 1.0, sin = [0.5] }, tau = 0.5, c = 1.0, exponent = 2.0 }]
[[component]]
death = { mean = 1.2, sin = [0.2] }
impulses = [{ kind = "linear", eta = -0.2 }]
[component.nonlinearity]
kind = "hematopoiesis_distributed"
terms = [{ beta = { mean = 1.0, sin = [0.5] }, tau = 0.5, c = 1.0, exponent = 2.0 }]
[[coupling]]
i = 1
j = 2
a = { mean = 0.2, cos = [0.1] }
[[coupling]]
i = 2
j = 1
a = 0.3
"#;
    let spec = with_constant_envelopes(load_system(text)?, 1e6, 0.01, 1e-8, 1e4)?;
    Ok(ZooEntry {
        id: "hematopoiesis",
        description: "two-compartment hematopoiesis model with distributed delay and linear impulses",
        expected: vec![
            expect("D_omega_1", 1.0, 1e-14, Source::Identity),
            expect("D_omega_2", 1.2, 1e-14, Source::Identity),
            expect("int_g0_1", 1.0, 1e-14, Source::Identity),
        ],
        spec,
        metadata: vec!["declared envelopes b1 = 1e6, b2 = 0.01".into()],
    })
}

pub fn hematopoiesis_scalar() -> Result<ZooEntry, ModelError> {
    let text = r#"
name = "hematopoiesis_scalar"
omega = 1.0
impulse_instants = [0.25, 0.75]
[[component]]
death = { mean = 1.0, cos = [0.5] }
impulses = [{ kind = "linear", eta = 0.3 }, { kind = "linear", eta = -0.2 }]
[component.nonlinearity]
kind = "hematopoiesis_discrete"
terms = [{ beta = { mean = 2.0, sin = [1.0] }, tau = 0.7, c = 1.0, exponent = 2.0 }]
"#;
    let spec = with_constant_envelopes(load_system(text)?, 1e6, 0.01, 1e-8, 1e4)?;
    Ok(ZooEntry {
        id: "hematopoiesis_scalar",
        description: "scalar hematopoiesis equation with a discrete delay and two linear impulses",
        expected: vec![
            expect("eta_product", 1.3 * 0.8, 1e-14, Source::Derived),
            expect("exp_D", 1f64.exp(), 1e-14, Source::Identity),
        ],
        spec,
        metadata: vec!["certifies when prod (1 + eta_k) < e^(int d)".into()],
    })
}

pub fn nicholson_distributed() -> Result<ZooEntry, ModelError> {
    let text = r#"
name = "nicholson_distributed"
omega = 1.0
impulse_instants = [0.3]
[[component]]
death = { mean = 1.0, cos = [0.2] }
impulses = [{ kind = "linear", eta = 0.2 }]
[component.nonlinearity]
kind = "nicholson_distributed"
terms = [{ beta = { mean = 3.0, sin = [1.0] }, tau = 0.6, c = 1.0, gamma = 1.0 }]
[[component]]
death = 0.8
impulses = [{ kind = "linear", eta = 0.1 }]
[component.nonlinearity]
kind = "nicholson_distributed"
terms = [{ beta = 2.5, tau = 0.4, c = 0.5, gamma = { mean = 1.0, cos = [0.3] } }]
[[coupling]]
i = 1
j = 2
a = 0.1
[[coupling]]
i = 2
j = 1
a = 0.15
"#;
    let spec = load_system(text)?;
    // b_2(t) = 2.5 * int_{t-0.4}^t (1 + 0.3 cos 2 pi s) ds
    let b2_at_zero = 2.5 * (0.4 + 0.3 * (2.0 * PI * 0.4).sin() / (2.0 * PI));
    Ok(ZooEntry {
        id: "nicholson_distributed",
        description: "two-patch Nicholson system with distributed delays and linear impulses",
        expected: vec![
            expect("b_1_at_0", 3.0 * 0.6, 1e-12, Source::Derived),
            expect("b_2_at_0", b2_at_zero, 1e-12, Source::Derived),
        ],
        spec,
        metadata: vec![],
    })
}

pub fn nicholson_mixed() -> Result<ZooEntry, ModelError> {
    let text = r#"
name = "nicholson_mixed"
omega = 1.0
[[component]]
death = 0.5
[component.nonlinearity]
kind = "nicholson_mixed"
terms = [{ beta = { mean = 2.0, cos = [0.5] }, tau = 0.3, theta = 0.2 }]
[[component]]
death = 0.6
[component.nonlinearity]
kind = "nicholson_mixed"
terms = [{ beta = 2.5, tau = 0.5, theta = 0.4 }]
[[coupling]]
i = 1
j = 2
a = 0.05
[[coupling]]
i = 2
j = 1
a = 0.05
"#;
    let spec = load_system(text)?;
    let bounds = impulse_algebra::bounds(&spec)?;
    let eps = 0.01;
    let b1: Vec<PeriodicFn> = (0..spec.n())
        .map(|i| {
            let beta = spec.nonlinearity()[i].terms().iter().fold(PeriodicFn::zero(1.0), |acc, t| acc.add(&t.beta));
            beta.scaled((1.0 - eps) * bounds[i].sigma)
        })
        .collect();
    let b2 = vec![PeriodicFn::constant(1.0, eps); spec.n()];
    let spec = spec.with_envelopes(EnvelopePair::new(b1, b2, 1e-3, 1e3)?)?;
    Ok(ZooEntry {
        id: "nicholson_mixed",
        description: "two-patch Nicholson system with mixed monotonicity delays",
        expected: vec![
            expect("sigma_1", (-0.5f64).exp(), 1e-15, Source::Identity),
            expect("sigma_2", (-0.6f64).exp(), 1e-15, Source::Identity),
        ],
        spec,
        metadata: vec!["declared envelopes b1 = (1 - eps) sigma_i b_i, b2 = eps with eps = 0.01".into()],
    })
}

pub fn mackey_glass() -> Result<ZooEntry, ModelError> {
    let text = r#"
name = "mackey_glass"
omega = 1.0
impulse_instants = [0.5]
[[component]]
death = 1.0
impulses = [{ kind = "saturating", eta = 0.3, scale = 2.0 }]
[component.nonlinearity]
kind = "mackey_glass_distributed"
terms = [{ beta = 3.0, tau = 0.5, c = 1.0, exponent = 2.0 }]
[[component]]
death = { mean = 1.5, sin = [0.3] }
[component.nonlinearity]
kind = "mackey_glass_distributed"
terms = [{ beta = 4.5, tau = 0.4, c = 1.0, exponent = 3.0 }]
[[coupling]]
i = 1
j = 2
a = 0.2
[[coupling]]
i = 2
j = 1
a = 0.1
"#;
    let spec = load_system(text)?;
    Ok(ZooEntry {
        id: "mackey_glass",
        description: "two-patch Mackey-Glass system with a saturating impulse on the first patch",
        expected: vec![
            expect("b_1", 3.0 * 0.5, 1e-14, Source::Derived),
            expect("b_2", 4.5 * 0.4, 1e-14, Source::Derived),
            expect("olB_1", 1.0, 1e-15, Source::Identity),
            expect("ulB_1", 1.0 / 1.3, 1e-15, Source::Identity),
        ],
        spec,
        metadata: vec![],
    })
}
