//! TOML system descriptions.
//!
//! ```toml
//! name = "example"
//! omega = 1.0
//! impulse_instants = [0.5]
//!
//! [[component]]
//! death = { mean = 1.0, cos = [0.3] }
//! impulses = [{ kind = "linear", eta = 0.1 }]
//! [component.nonlinearity]
//! kind = "nicholson_discrete"
//! terms = [{ beta = 2.0, tau = 0.5 }]
//!
//! [[coupling]]
//! i = 1
//! j = 2
//! a = 0.2
//! ```

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::impulse::{ImpulseKind, ImpulseMap, ImpulseSchedule};
use crate::nonlinearity::{Nonlinearity, NonlinearityKind, Term};
use crate::periodic::PeriodicFn;
use crate::system::{EnvelopePair, LimitProfile, SystemSpec};

/// A coefficient: a number, or a Fourier series `{ mean, cos, sin }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coeff {
    Const(f64),
    Series {
        #[serde(default)]
        mean: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        cos: Vec<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        sin: Vec<f64>,
    },
}

impl Coeff {
    pub fn to_fn(&self, omega: f64) -> Result<PeriodicFn, ModelError> {
        match self {
            Coeff::Const(v) => PeriodicFn::new(omega, *v, vec![], vec![]),
            Coeff::Series { mean, cos, sin } => PeriodicFn::new(omega, *mean, cos.clone(), sin.clone()),
        }
    }

    pub fn from_fn(f: &PeriodicFn) -> Self {
        // trailing zero harmonics carry no information
        let trim = |v: &[f64]| {
            let mut v = v.to_vec();
            while v.last() == Some(&0.0) {
                v.pop();
            }
            v
        };
        let (cos, sin) = (trim(f.cos_coeffs()), trim(f.sin_coeffs()));
        if cos.is_empty() && sin.is_empty() {
            Coeff::Const(f.mean())
        } else {
            Coeff::Series { mean: f.mean(), cos, sin }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub beta: Coeff,
    pub tau: Coeff,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Coeff>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Coeff>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Coeff>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub kind: NonlinearityKind,
    #[serde(default)]
    pub terms: Vec<TermConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ImpulseConfig {
    None,
    Linear {
        eta: f64,
    },
    Saturating {
        eta: f64,
        scale: f64,
    },
    BoundedSlope {
        alpha: f64,
        eta: f64,
        table: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        j0: Option<f64>,
    },
}

impl ImpulseConfig {
    fn to_map(&self) -> Result<ImpulseMap, ModelError> {
        match self {
            ImpulseConfig::None => Ok(ImpulseMap::none()),
            ImpulseConfig::Linear { eta } => ImpulseMap::linear(*eta),
            ImpulseConfig::Saturating { eta, scale } => ImpulseMap::saturating(*eta, *scale),
            ImpulseConfig::BoundedSlope { alpha, eta, table, j0 } => {
                ImpulseMap::bounded_slope(*alpha, *eta, table.iter().map(|p| (p[0], p[1])).collect(), *j0)
            }
        }
    }

    fn from_map(m: &ImpulseMap) -> Self {
        match m.kind() {
            ImpulseKind::None => ImpulseConfig::None,
            ImpulseKind::Linear => ImpulseConfig::Linear { eta: m.eta() },
            ImpulseKind::Saturating { scale } => ImpulseConfig::Saturating { eta: m.alpha() + m.eta(), scale: *scale },
            ImpulseKind::BoundedSlope { table } => ImpulseConfig::BoundedSlope {
                alpha: m.alpha(),
                eta: m.eta(),
                table: table.iter().map(|&(u, i)| [u, i]).collect(),
                j0: None,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub death: Coeff,
    pub nonlinearity: NonlinearityConfig,
    /// One entry per impulse instant; omitted means no jumps.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub impulses: Vec<ImpulseConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub i: usize,
    pub j: usize,
    pub a: Coeff,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub b1: Vec<Coeff>,
    pub b2: Vec<Coeff>,
    pub r0: f64,
    #[serde(rename = "R0")]
    pub big_r0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsConfig {
    pub f0: Vec<f64>,
    #[serde(rename = "F0")]
    pub big_f0: Vec<f64>,
    pub finf: Vec<f64>,
    #[serde(rename = "Finf")]
    pub big_finf: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default)]
    pub name: String,
    pub omega: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default)]
    pub impulse_instants: Vec<f64>,
    pub component: Vec<ComponentConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coupling: Vec<CouplingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<LimitsConfig>,
}

impl SystemConfig {
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        toml::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("system config serializes")
    }

    /// Builds the system, checking (H1), (H2) and (H4); (H3) is left to the caller.
    pub fn build(&self) -> Result<SystemSpec, ModelError> {
        let w = self.omega;
        if !(w > 0.0 && w.is_finite()) {
            return Err(ModelError::Invalid(format!("omega must be positive, got {w}")));
        }
        let n = self.component.len();
        if let Some(d) = self.dimension {
            if d != n {
                return Err(ModelError::Invalid(format!("dimension = {d} but {n} components are given")));
            }
        }
        let p = self.impulse_instants.len();
        let mut maps = vec![vec![ImpulseMap::none(); n]; p];
        let mut death = Vec::with_capacity(n);
        let mut nonlin = Vec::with_capacity(n);
        for (i, c) in self.component.iter().enumerate() {
            death.push(c.death.to_fn(w)?);
            if !c.impulses.is_empty() && c.impulses.len() != p {
                return Err(ModelError::Invalid(format!(
                    "component {} lists {} impulses for {p} instants",
                    i + 1,
                    c.impulses.len()
                )));
            }
            for (k, imp) in c.impulses.iter().enumerate() {
                maps[k][i] = imp.to_map()?;
            }
            let mut terms = Vec::with_capacity(c.nonlinearity.terms.len());
            for t in &c.nonlinearity.terms {
                let tau = t.tau.to_fn(w)?;
                let mut term = Term::new(t.beta.to_fn(w)?, tau);
                if let Some(cc) = &t.c {
                    term = term.with_c(cc.to_fn(w)?);
                }
                if let Some(g) = &t.gamma {
                    term = term.with_gamma(g.to_fn(w)?);
                }
                if let Some(th) = &t.theta {
                    term = term.with_theta(th.to_fn(w)?);
                }
                if let Some(e) = t.exponent {
                    term = term.with_exponent(e);
                }
                term = term.with_table(t.table.iter().map(|p| (p[0], p[1])).collect());
                terms.push(term);
            }
            nonlin.push(Nonlinearity::new(i, c.nonlinearity.kind, terms, w)?);
        }
        let mut coupling = vec![vec![PeriodicFn::zero(w); n]; n];
        for c in &self.coupling {
            if c.i == 0 || c.j == 0 || c.i > n || c.j > n {
                return Err(ModelError::Invalid(format!("coupling index ({}, {}) out of range 1..={n}", c.i, c.j)));
            }
            let slot = &mut coupling[c.i - 1][c.j - 1];
            if !slot.is_zero() {
                return Err(ModelError::Invalid(format!("coupling a_{}{} given twice", c.i, c.j)));
            }
            *slot = c.a.to_fn(w)?;
        }
        let sched = ImpulseSchedule::new(w, self.impulse_instants.clone(), maps)?;
        let mut spec = SystemSpec::new(self.name.clone(), death, coupling, nonlin, sched)?;
        if let Some(e) = &self.envelope {
            let conv = |v: &[Coeff]| v.iter().map(|c| c.to_fn(w)).collect::<Result<Vec<_>, _>>();
            let env = EnvelopePair::new(conv(&e.b1)?, conv(&e.b2)?, e.r0, e.big_r0)?;
            spec = spec.with_envelopes(env)?;
        }
        if let Some(l) = &self.limits {
            let lim = LimitProfile::new(l.f0.clone(), l.big_f0.clone(), l.finf.clone(), l.big_finf.clone())?;
            spec = spec.with_limits(lim)?;
        }
        Ok(spec)
    }

    pub fn from_spec(spec: &SystemSpec) -> Self {
        let n = spec.n();
        let sched = spec.impulses();
        let component = (0..n)
            .map(|i| {
                let g = &spec.nonlinearity()[i];
                let kind = g.kind();
                let terms = g
                    .terms()
                    .iter()
                    .map(|t| {
                        let default_one = |f: &PeriodicFn| f.is_constant() && f.mean() == 1.0;
                        TermConfig {
                            beta: Coeff::from_fn(&t.beta),
                            tau: Coeff::from_fn(&t.tau),
                            c: (!default_one(&t.c)).then(|| Coeff::from_fn(&t.c)),
                            gamma: (!default_one(&t.gamma)).then(|| Coeff::from_fn(&t.gamma)),
                            theta: (!same_series(&t.theta, &t.tau)).then(|| Coeff::from_fn(&t.theta)),
                            exponent: (t.exponent != 1.0).then_some(t.exponent),
                            table: t.table.iter().map(|&(u, h)| [u, h]).collect(),
                        }
                    })
                    .collect();
                let impulses = if sched.inert_for(i) {
                    Vec::new()
                } else {
                    (0..sched.p()).map(|k| ImpulseConfig::from_map(sched.map(k, i))).collect()
                };
                ComponentConfig {
                    death: Coeff::from_fn(&spec.death()[i]),
                    nonlinearity: NonlinearityConfig { kind, terms },
                    impulses,
                }
            })
            .collect();
        let mut coupling = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let a = spec.a(i, j);
                if !a.is_zero() {
                    coupling.push(CouplingConfig { i: i + 1, j: j + 1, a: Coeff::from_fn(a) });
                }
            }
        }
        SystemConfig {
            name: spec.name.clone(),
            omega: spec.omega(),
            dimension: Some(n),
            impulse_instants: sched.instants().to_vec(),
            component,
            coupling,
            envelope: spec.envelopes().map(|e| EnvelopeConfig {
                b1: e.b1.iter().map(Coeff::from_fn).collect(),
                b2: e.b2.iter().map(Coeff::from_fn).collect(),
                r0: e.r0,
                big_r0: e.big_r0,
            }),
            limits: spec.limits().map(|l| LimitsConfig {
                f0: l.f0.clone(),
                big_f0: l.big_f0.clone(),
                finf: l.finf.clone(),
                big_finf: l.big_finf.clone(),
            }),
        }
    }
}

fn same_series(a: &PeriodicFn, b: &PeriodicFn) -> bool {
    a.mean() == b.mean() && a.cos_coeffs() == b.cos_coeffs() && a.sin_coeffs() == b.sin_coeffs()
}

/// Parses and validates a system, including (H3).
pub fn load_system(text: &str) -> Result<SystemSpec, ModelError> {
    let spec = SystemConfig::parse(text)?.build()?;
    spec.check_h3()?;
    Ok(spec)
}

pub fn load_system_file(path: &std::path::Path) -> Result<SystemSpec, ModelError> {
    load_system(&std::fs::read_to_string(path)?)
}

pub fn save_system(spec: &SystemSpec) -> String {
    SystemConfig::from_spec(spec).to_toml()
}
