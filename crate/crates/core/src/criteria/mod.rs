//! Sufficient conditions for a positive periodic solution, evaluated on a grid.

mod checks;
mod envelopes;
mod kernel;
mod search;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

pub use checks::evaluate;
pub use envelopes::{derive_envelopes, derived_b, EnvelopeSet, HEMATOPOIESIS_M};
pub use kernel::{kernel_direct, KernelProfile};
pub use search::{certify, search_v, CertifyOptions, EPSILON_SWEEP};

use crate::error::CriteriaError;
use crate::grid::{Grid, DEFAULT_NODES};
use crate::impulse_algebra::{self, ImpulseBounds};
use crate::periodic::Profile;
use crate::system::SystemSpec;

/// Width of the band in which equalities count as satisfied.
pub const EQ_BAND: f64 = 1e-9;
/// Minimum slack for a strict inequality to count as satisfied.
pub const STRICT_MARGIN: f64 = 1e-12;
/// `<=` part of `<= not identically`.
pub const NOT_EQUIV_SLACK: f64 = 1e-12;
/// Required strictness somewhere for `<= not identically`.
pub const NOT_EQUIV_STRICT: f64 = 1e-9;
/// Points of the local refinement around a grid extremizer.
pub const REFINE_POINTS: usize = 21;

#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum TheoremId {
    T3_1,
    T3_2_sublinear,
    T3_2_superlinear,
    T3_3_pointwise,
    T3_3_average,
    C3_1_nonimpulsive,
    C_scalar,
    T3_6_limits,
    T3_4_bounded,
    C3_4_gamma,
    T4_1_hematopoiesis,
    T_N1_nicholson,
    T4_4_mixed,
    T4_2_planar,
}

impl TheoremId {
    pub const ALL: [TheoremId; 14] = [
        TheoremId::T3_1,
        TheoremId::T3_2_sublinear,
        TheoremId::T3_2_superlinear,
        TheoremId::T3_3_pointwise,
        TheoremId::T3_3_average,
        TheoremId::C3_1_nonimpulsive,
        TheoremId::C_scalar,
        TheoremId::T3_6_limits,
        TheoremId::T3_4_bounded,
        TheoremId::C3_4_gamma,
        TheoremId::T4_1_hematopoiesis,
        TheoremId::T_N1_nicholson,
        TheoremId::T4_4_mixed,
        TheoremId::T4_2_planar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TheoremId::T3_1 => "T3_1",
            TheoremId::T3_2_sublinear => "T3_2_sublinear",
            TheoremId::T3_2_superlinear => "T3_2_superlinear",
            TheoremId::T3_3_pointwise => "T3_3_pointwise",
            TheoremId::T3_3_average => "T3_3_average",
            TheoremId::C3_1_nonimpulsive => "C3_1_nonimpulsive",
            TheoremId::C_scalar => "C_scalar",
            TheoremId::T3_6_limits => "T3_6_limits",
            TheoremId::T3_4_bounded => "T3_4_bounded",
            TheoremId::C3_4_gamma => "C3_4_gamma",
            TheoremId::T4_1_hematopoiesis => "T4_1_hematopoiesis",
            TheoremId::T_N1_nicholson => "T_N1_nicholson",
            TheoremId::T4_4_mixed => "T4_4_mixed",
            TheoremId::T4_2_planar => "T4_2_planar",
        }
    }

    /// Criteria stated in terms of an envelope pair `(b1, b2)`.
    pub fn needs_envelopes(self) -> bool {
        matches!(
            self,
            TheoremId::T3_1
                | TheoremId::T3_2_sublinear
                | TheoremId::T3_2_superlinear
                | TheoremId::T3_3_pointwise
                | TheoremId::T3_3_average
                | TheoremId::C3_1_nonimpulsive
                | TheoremId::C_scalar
        )
    }

    /// Whether the criterion depends on the scaling vector at all.
    pub fn uses_v(self) -> bool {
        !matches!(self, TheoremId::T3_1 | TheoremId::C_scalar)
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TheoremId::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let ids: Vec<_> = TheoremId::ALL.iter().map(|t| t.as_str()).collect();
                format!("unknown theorem `{s}`; expected one of {}", ids.join(", "))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
    /// `<=` everywhere and `<` somewhere.
    #[serde(rename = "<=!=")]
    LeNotEquiv,
}

/// One scalar inequality `lhs REL rhs`, already normalized by `v_i`.
///
/// `margin` is the signed slack (positive when satisfied). For pointwise
/// conditions `lhs`, `rhs` and `t` are taken at the worst point and
/// `best_slack` is the largest slack over the period.
#[derive(Clone, Debug, Serialize)]
pub struct Condition {
    pub label: String,
    pub component: usize,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_slack: Option<f64>,
    pub pass: bool,
}

impl Condition {
    pub fn scalar(label: impl Into<String>, component: usize, lhs: f64, relation: Relation, rhs: f64) -> Self {
        let margin = match relation {
            Relation::Le | Relation::Lt | Relation::LeNotEquiv => rhs - lhs,
            Relation::Ge | Relation::Gt => lhs - rhs,
        };
        let margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        let pass = match relation {
            Relation::Le | Relation::Ge => margin >= -EQ_BAND,
            Relation::Lt | Relation::Gt => margin > STRICT_MARGIN,
            Relation::LeNotEquiv => margin >= -NOT_EQUIV_SLACK,
        };
        Condition { label: label.into(), component: component + 1, relation, lhs, rhs, t: None, margin, best_slack: None, pass }
    }

    fn with_t(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Branch {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
    pub conditions: Vec<Condition>,
}

impl Branch {
    pub fn new(name: impl Into<String>, conditions: Vec<Condition>) -> Self {
        let pass = !conditions.is_empty() && conditions.iter().all(|c| c.pass);
        let margin = conditions.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
        Branch { name: name.into(), pass, margin, conditions }
    }

    /// Branch that could not be evaluated (e.g. unsupported infinite limits).
    pub fn skipped(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Branch {
            name: format!("{} (not evaluated: {})", name.into(), reason.into()),
            pass: false,
            margin: f64::NEG_INFINITY,
            conditions: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Tolerances {
    pub equality_band: f64,
    pub strict_margin: f64,
    pub not_equiv_slack: f64,
    pub not_equiv_strict: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            equality_band: EQ_BAND,
            strict_margin: STRICT_MARGIN,
            not_equiv_slack: NOT_EQUIV_SLACK,
            not_equiv_strict: NOT_EQUIV_STRICT,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepEntry {
    pub epsilon: f64,
    pub pass: bool,
    pub margin: f64,
    pub v: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub theorem: TheoremId,
    pub v: Option<Vec<f64>>,
    pub grid_nodes: usize,
    pub refined: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Computed quantities per component (1-based order).
    pub quantities: Vec<BTreeMap<String, f64>>,
    pub branches: Vec<Branch>,
    pub pass: bool,
    pub margin: f64,
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CriterionReport {
    fn assemble(theorem: TheoremId, v: &[f64], ctx: &Evaluator, refined: bool, quantities: Vec<BTreeMap<String, f64>>, branches: Vec<Branch>) -> Self {
        let pass = branches.iter().any(|b| b.pass);
        let margin = if pass {
            branches.iter().filter(|b| b.pass).map(|b| b.margin).fold(f64::NEG_INFINITY, f64::max)
        } else {
            branches.iter().map(|b| b.margin).fold(f64::NEG_INFINITY, f64::max)
        };
        CriterionReport {
            theorem,
            v: Some(v.to_vec()),
            grid_nodes: ctx.grid.len(),
            refined,
            envelope: None,
            epsilon: None,
            quantities,
            branches,
            pass,
            margin,
            tolerances: Tolerances::default(),
            sweep: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn branch(&self, name: &str) -> Option<&Branch> {
        self.branches.iter().find(|b| b.name == name)
    }

    /// Components whose conditions fail in every branch.
    pub fn failing_components(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .branches
            .iter()
            .flat_map(|b| b.conditions.iter().filter(|c| !c.pass).map(|c| c.component))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Shared precomputation for evaluating criteria on one system.
pub struct Evaluator<'a> {
    spec: &'a SystemSpec,
    bounds: Vec<ImpulseBounds>,
    grid: Grid,
    coupling_kernels: Vec<Vec<Option<KernelProfile>>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(spec: &'a SystemSpec) -> Result<Self, CriteriaError> {
        Self::with_nodes(spec, DEFAULT_NODES)
    }

    pub fn with_nodes(spec: &'a SystemSpec, nodes: usize) -> Result<Self, CriteriaError> {
        let bounds = impulse_algebra::bounds(spec)?;
        let grid = Grid::for_spec(spec, nodes);
        let n = spec.n();
        let coupling_kernels = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let a = spec.a(i, j);
                        (i != j && !a.is_zero()).then(|| KernelProfile::new(spec, i, &grid, Profile::Fourier(a.clone())))
                    })
                    .collect()
            })
            .collect();
        Ok(Evaluator { spec, bounds, grid, coupling_kernels })
    }

    pub fn spec(&self) -> &SystemSpec {
        self.spec
    }

    pub fn bounds(&self) -> &[ImpulseBounds] {
        &self.bounds
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kernel(&self, i: usize, w: Profile) -> KernelProfile {
        KernelProfile::new(self.spec, i, &self.grid, w)
    }

    /// `K_i(t; sum_j (v_j/v_i) a_ij + extra)` over the grid, minimized or
    /// maximized, with optional local refinement by direct quadrature.
    pub fn kernel_extremum(&self, i: usize, v: &[f64], extra: Option<&KernelProfile>, maximize: bool, refine: bool) -> (f64, f64) {
        let m = self.grid.len();
        let ratios: Vec<f64> = (0..v.len()).map(|j| v[j] / v[i]).collect();
        let combined = |node: usize| {
            let mut acc = extra.map_or(0.0, |k| k.values[node]);
            for (j, kj) in self.coupling_kernels[i].iter().enumerate() {
                if let Some(kj) = kj {
                    acc += ratios[j] * kj.values[node];
                }
            }
            acc
        };
        let sign = if maximize { -1.0 } else { 1.0 };
        let mut best = (0.0, combined(0));
        for node in 1..m {
            let val = combined(node);
            if sign * val < sign * best.1 {
                best = (self.grid.times()[node], val);
            }
        }
        if !refine {
            return best;
        }
        let direct = |t: f64| {
            let mut acc = extra.map_or(0.0, |k| k.direct(self.spec, i, t));
            for (j, kj) in self.coupling_kernels[i].iter().enumerate() {
                if let Some(kj) = kj {
                    acc += ratios[j] * kj.direct(self.spec, i, t);
                }
            }
            acc
        };
        let node = self.grid.locate(best.0).1 as isize;
        let (lo, hi) = (self.grid.node_time(node - 1), self.grid.node_time(node + 1));
        for k in 0..REFINE_POINTS {
            let t = lo + (hi - lo) * k as f64 / (REFINE_POINTS - 1) as f64;
            let val = direct(t);
            if sign * val < sign * best.1 {
                best = (t.rem_euclid(self.spec.omega()), val);
            }
        }
        best
    }

    /// `min_t f(t)` over the grid with local refinement, as `(t, value)`.
    pub fn pointwise_min(&self, f: impl Fn(f64) -> f64, refine: bool) -> (f64, f64) {
        let times = self.grid.times();
        let mut best = (times[0], f(times[0]));
        for &t in &times[1..] {
            let val = f(t);
            if val < best.1 || val.is_nan() {
                best = (t, val);
            }
        }
        if refine {
            let node = self.grid.locate(best.0).1 as isize;
            let (lo, hi) = (self.grid.node_time(node - 1), self.grid.node_time(node + 1));
            for k in 0..REFINE_POINTS {
                let t = lo + (hi - lo) * k as f64 / (REFINE_POINTS - 1) as f64;
                let val = f(t);
                if val < best.1 {
                    best = (t.rem_euclid(self.spec.omega()), val);
                }
            }
        }
        best
    }

    pub fn pointwise_max(&self, f: impl Fn(f64) -> f64, refine: bool) -> (f64, f64) {
        let (t, v) = self.pointwise_min(|t| -f(t), refine);
        (t, -v)
    }

    /// `sum_{j != i} (v_j / v_i) a_ij(t)`.
    pub fn coupling_at(&self, i: usize, v: &[f64], t: f64) -> f64 {
        (0..self.spec.n()).filter(|&j| j != i).map(|j| v[j] / v[i] * self.spec.a(i, j).eval(t)).sum()
    }

    /// `int_0^omega sum_{j != i} (v_j / v_i) a_ij`, exact.
    pub fn coupling_integral(&self, i: usize, v: &[f64]) -> f64 {
        (0..self.spec.n())
            .filter(|&j| j != i)
            .map(|j| v[j] / v[i] * self.spec.a(i, j).integral_over_period())
            .sum()
    }
}

/// Pointwise `lhs(t) <= rhs(t)` (or strict / not-identically variants).
pub(crate) fn pointwise_condition(
    ctx: &Evaluator,
    label: &str,
    i: usize,
    lhs: impl Fn(f64) -> f64,
    relation: Relation,
    rhs: impl Fn(f64) -> f64,
    refine: bool,
) -> Condition {
    let slack = |t: f64| {
        let s = match relation {
            Relation::Ge | Relation::Gt => lhs(t) - rhs(t),
            _ => rhs(t) - lhs(t),
        };
        if s.is_nan() {
            f64::NEG_INFINITY
        } else {
            s
        }
    };
    let (t, worst) = ctx.pointwise_min(slack, refine);
    let mut c = Condition::scalar(label, i, lhs(t), relation, rhs(t)).with_t(t);
    c.margin = worst;
    if relation == Relation::LeNotEquiv {
        let (_, best) = ctx.pointwise_max(slack, refine);
        c.best_slack = Some(best);
        c.pass = worst >= -NOT_EQUIV_SLACK && best > NOT_EQUIV_STRICT;
    } else {
        c.pass = match relation {
            Relation::Le | Relation::Ge => worst >= -EQ_BAND,
            _ => worst > STRICT_MARGIN,
        };
    }
    c
}

pub(crate) fn check_v(spec: &SystemSpec, v: &[f64]) -> Result<(), CriteriaError> {
    if v.len() != spec.n() || v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(CriteriaError::BadScaling { expected: spec.n(), got: v.to_vec() });
    }
    Ok(())
}
