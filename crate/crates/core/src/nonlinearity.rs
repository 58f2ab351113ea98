//! Birth functions `g_i(t, x_it)` of the supported model families.

use serde::{Deserialize, Serialize};

use crate::error::{Hypothesis, ModelError};
use crate::history::{History, Side};
use crate::periodic::PeriodicFn;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityKind {
    /// `beta(t) x(t-tau) exp(-c(t) x(t-tau))`
    NicholsonDiscrete,
    /// `beta(t) int_{t-tau}^t gamma(s) x(s) exp(-c(s) x(s)) ds`
    NicholsonDistributed,
    /// `beta(t) x(t-tau) exp(-c(t) x(t-theta))`
    NicholsonMixed,
    /// `beta(t) / (1 + c(t) X^alpha)`, `X = int_{t-tau}^t x`
    HematopoiesisDistributed,
    /// `beta(t) / (1 + c(t) x(t-tau)^alpha)`
    HematopoiesisDiscrete,
    /// `beta(t) X / (1 + c(t) X^alpha)`, `X = int_{t-tau}^t x`
    MackeyGlassDistributed,
    /// `beta(t) h(x(t-tau))` with `h` a piecewise-linear table
    CustomTable,
}

impl NonlinearityKind {
    pub const ALL: [NonlinearityKind; 7] = [
        NonlinearityKind::NicholsonDiscrete,
        NonlinearityKind::NicholsonDistributed,
        NonlinearityKind::NicholsonMixed,
        NonlinearityKind::HematopoiesisDistributed,
        NonlinearityKind::HematopoiesisDiscrete,
        NonlinearityKind::MackeyGlassDistributed,
        NonlinearityKind::CustomTable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NonlinearityKind::NicholsonDiscrete => "nicholson_discrete",
            NonlinearityKind::NicholsonDistributed => "nicholson_distributed",
            NonlinearityKind::NicholsonMixed => "nicholson_mixed",
            NonlinearityKind::HematopoiesisDistributed => "hematopoiesis_distributed",
            NonlinearityKind::HematopoiesisDiscrete => "hematopoiesis_discrete",
            NonlinearityKind::MackeyGlassDistributed => "mackey_glass_distributed",
            NonlinearityKind::CustomTable => "custom_table",
        }
    }

    pub fn is_distributed(self) -> bool {
        matches!(
            self,
            NonlinearityKind::NicholsonDistributed
                | NonlinearityKind::HematopoiesisDistributed
                | NonlinearityKind::MackeyGlassDistributed
        )
    }

    pub fn is_hematopoiesis(self) -> bool {
        matches!(self, NonlinearityKind::HematopoiesisDistributed | NonlinearityKind::HematopoiesisDiscrete)
    }

    /// Kinds of the form `sum_l f_l(t, x(t - tau_l(t)))`.
    pub fn is_single_delay_family(self) -> bool {
        matches!(
            self,
            NonlinearityKind::NicholsonDiscrete | NonlinearityKind::HematopoiesisDiscrete | NonlinearityKind::CustomTable
        )
    }

    pub fn uses_gamma(self) -> bool {
        self == NonlinearityKind::NicholsonDistributed
    }

    pub fn uses_theta(self) -> bool {
        self == NonlinearityKind::NicholsonMixed
    }

    pub fn uses_exponent(self) -> bool {
        matches!(
            self,
            NonlinearityKind::HematopoiesisDistributed
                | NonlinearityKind::HematopoiesisDiscrete
                | NonlinearityKind::MackeyGlassDistributed
        )
    }

    pub fn uses_c(self) -> bool {
        self != NonlinearityKind::CustomTable
    }
}

impl std::fmt::Display for NonlinearityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for NonlinearityKind {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NonlinearityKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ModelError::Invalid(format!("unknown nonlinearity kind `{s}`")))
    }
}

/// One delayed term. Fields not used by the kind keep their defaults
/// (`c = gamma = 1`, `theta = tau`, `exponent = 1`, empty table).
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub beta: PeriodicFn,
    pub tau: PeriodicFn,
    pub c: PeriodicFn,
    pub gamma: PeriodicFn,
    pub theta: PeriodicFn,
    pub exponent: f64,
    pub table: Vec<(f64, f64)>,
}

impl Term {
    pub fn new(beta: PeriodicFn, tau: PeriodicFn) -> Self {
        let w = beta.period();
        Term {
            beta,
            theta: tau.clone(),
            tau,
            c: PeriodicFn::constant(w, 1.0),
            gamma: PeriodicFn::constant(w, 1.0),
            exponent: 1.0,
            table: Vec::new(),
        }
    }

    pub fn with_c(mut self, c: PeriodicFn) -> Self {
        self.c = c;
        self
    }

    pub fn with_gamma(mut self, gamma: PeriodicFn) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_theta(mut self, theta: PeriodicFn) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_exponent(mut self, exponent: f64) -> Self {
        self.exponent = exponent;
        self
    }

    pub fn with_table(mut self, table: Vec<(f64, f64)>) -> Self {
        self.table = table;
        self
    }

    fn h(&self, u: f64) -> f64 {
        table_value(&self.table, u)
    }
}

/// Piecewise-linear interpolation, constant beyond the last abscissa.
fn table_value(table: &[(f64, f64)], u: f64) -> f64 {
    let n = table.len();
    if u <= table[0].0 {
        return table[0].1;
    }
    if u >= table[n - 1].0 {
        return table[n - 1].1;
    }
    let k = table.partition_point(|&(x, _)| x <= u) - 1;
    let (u0, h0) = table[k];
    let (u1, h1) = table[k + 1];
    h0 + (u - u0) * (h1 - h0) / (u1 - u0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Nonlinearity {
    kind: NonlinearityKind,
    terms: Vec<Term>,
    max_delay: f64,
}

/// Side from which a delayed argument `t - lag(t)` approaches its limit.
fn read_side(lag: &PeriodicFn, t: f64, side: Side) -> Side {
    let rate = 1.0 - lag.derivative(t);
    if rate < 0.0 {
        side.flip()
    } else if rate == 0.0 {
        Side::Left
    } else {
        side
    }
}

impl Nonlinearity {
    /// Validates term coefficients for component `i` (0-based) and flags them nonnegative.
    pub fn new(i: usize, kind: NonlinearityKind, terms: Vec<Term>, omega: f64) -> Result<Self, ModelError> {
        let mut checked = Vec::with_capacity(terms.len());
        for (l, t) in terms.into_iter().enumerate() {
            let tag = |name: &str| format!("{name}_{}{}", i + 1, l + 1);
            let same_period = |f: &PeriodicFn, name: &str| {
                if (f.period() - omega).abs() > 1e-12 * omega {
                    Err(ModelError::Invalid(format!(
                        "coefficient {} has period {} but the system period is {omega}",
                        tag(name),
                        f.period()
                    )))
                } else {
                    Ok(())
                }
            };
            for (f, name) in [(&t.beta, "beta"), (&t.tau, "tau"), (&t.c, "c"), (&t.gamma, "gamma"), (&t.theta, "theta")] {
                same_period(f, name)?;
            }
            let beta = t.beta.into_nonneg(tag("beta"))?;
            let tau = t.tau.into_nonneg(tag("tau"))?;
            let c = t.c.into_nonneg(tag("c"))?;
            let gamma = t.gamma.into_nonneg(tag("gamma"))?;
            let theta = t.theta.into_nonneg(tag("theta"))?;
            if kind.uses_exponent() && !(t.exponent > 0.0 && t.exponent.is_finite()) {
                return Err(ModelError::Invalid(format!("exponent {} must be positive, got {}", tag("alpha"), t.exponent)));
            }
            if kind == NonlinearityKind::CustomTable {
                if t.table.len() < 2 || t.table[0].0 != 0.0 {
                    return Err(ModelError::Invalid(format!(
                        "custom table of term {} needs at least two points starting at u = 0",
                        tag("h")
                    )));
                }
                if t.table.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(ModelError::Invalid("custom table abscissae must increase strictly".into()));
                }
                if t.table.iter().any(|&(_, h)| !(h >= 0.0) || !h.is_finite()) {
                    return Err(ModelError::hypothesis(Hypothesis::H4, "custom table values must be nonnegative"));
                }
            }
            checked.push(Term { beta, tau, c, gamma, theta, exponent: t.exponent, table: t.table });
        }
        let max_delay = checked
            .iter()
            .map(|t| {
                let th = if kind.uses_theta() { t.theta.max() } else { 0.0 };
                t.tau.max().max(th)
            })
            .fold(0.0, f64::max);
        Ok(Nonlinearity { kind, terms: checked, max_delay })
    }

    pub fn zero(omega: f64) -> Self {
        let _ = omega;
        Nonlinearity { kind: NonlinearityKind::NicholsonDiscrete, terms: Vec::new(), max_delay: 0.0 }
    }

    pub fn kind(&self) -> NonlinearityKind {
        self.kind
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn max_delay(&self) -> f64 {
        self.max_delay
    }

    /// Lag functions whose images propagate breakpoints.
    pub fn lags(&self) -> Vec<&PeriodicFn> {
        let mut out = Vec::new();
        for t in &self.terms {
            out.push(&t.tau);
            if self.kind.uses_theta() && t.theta != t.tau {
                out.push(&t.theta);
            }
        }
        out
    }

    /// Integrand `f(s, x)` of the window integral of term `l`, for the
    /// distributed kinds.
    pub fn window_integrand(&self, l: usize) -> Option<Box<dyn Fn(f64, f64) -> f64 + Send + Sync + '_>> {
        let term = &self.terms[l];
        match self.kind {
            NonlinearityKind::NicholsonDistributed => Some(Box::new(move |s: f64, x: f64| {
                let x = x.max(0.0);
                term.gamma.eval(s) * x * (-term.c.eval(s) * x).exp()
            })),
            NonlinearityKind::HematopoiesisDistributed | NonlinearityKind::MackeyGlassDistributed => {
                Some(Box::new(|_s: f64, x: f64| x))
            }
            _ => None,
        }
    }

    /// `g_i(t, x_it)` read from `hist` component `i`.
    pub fn eval(&self, i: usize, t: f64, side: Side, hist: &dyn History) -> f64 {
        let mut acc = 0.0;
        for (l, term) in self.terms.iter().enumerate() {
            let beta = term.beta.eval(t);
            if beta == 0.0 {
                continue;
            }
            let delayed = |lag: &PeriodicFn| hist.value(i, t - lag.eval(t), read_side(lag, t, side)).max(0.0);
            let window = || {
                let tau = term.tau.eval(t);
                let f = self.window_integrand(l).expect("distributed kind");
                hist.integrate_term(i, l, t - tau, t, &*f)
            };
            acc += match self.kind {
                NonlinearityKind::NicholsonDiscrete => {
                    let u = delayed(&term.tau);
                    beta * u * (-term.c.eval(t) * u).exp()
                }
                NonlinearityKind::NicholsonMixed => {
                    let u = delayed(&term.tau);
                    let w = delayed(&term.theta);
                    beta * u * (-term.c.eval(t) * w).exp()
                }
                NonlinearityKind::NicholsonDistributed => beta * window(),
                NonlinearityKind::HematopoiesisDistributed | NonlinearityKind::MackeyGlassDistributed => {
                    let x = window().max(0.0);
                    let den = 1.0 + term.c.eval(t) * x.powf(term.exponent);
                    if self.kind == NonlinearityKind::MackeyGlassDistributed {
                        beta * x / den
                    } else {
                        beta / den
                    }
                }
                NonlinearityKind::HematopoiesisDiscrete => {
                    let u = delayed(&term.tau);
                    beta / (1.0 + term.c.eval(t) * u.powf(term.exponent))
                }
                NonlinearityKind::CustomTable => beta * term.h(delayed(&term.tau)),
            };
        }
        acc
    }

    /// `g_i(t, 0)`.
    pub fn at_zero(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| {
                let beta = term.beta.eval(t);
                match self.kind {
                    NonlinearityKind::HematopoiesisDistributed | NonlinearityKind::HematopoiesisDiscrete => beta,
                    NonlinearityKind::CustomTable => beta * term.table[0].1,
                    _ => 0.0,
                }
            })
            .sum()
    }

    /// Exact `int_0^omega g_i(s, 0) ds`.
    pub fn integral_at_zero(&self) -> f64 {
        self.terms
            .iter()
            .map(|term| {
                let b = term.beta.integral_over_period();
                match self.kind {
                    NonlinearityKind::HematopoiesisDistributed | NonlinearityKind::HematopoiesisDiscrete => b,
                    NonlinearityKind::CustomTable => b * term.table[0].1,
                    _ => 0.0,
                }
            })
            .sum()
    }

    /// `sum_l beta_l(t)`.
    pub fn beta_sum(&self, t: f64) -> f64 {
        self.terms.iter().map(|term| term.beta.eval(t)).sum()
    }

    /// Whether `g` is bounded on the positive cone.
    pub fn is_bounded(&self) -> bool {
        match self.kind {
            NonlinearityKind::MackeyGlassDistributed => self.terms.iter().all(|t| t.exponent >= 1.0 && t.c.min() > 0.0),
            NonlinearityKind::NicholsonDiscrete
            | NonlinearityKind::NicholsonDistributed
            | NonlinearityKind::NicholsonMixed => self.terms.iter().all(|t| t.c.min() > 0.0),
            _ => true,
        }
    }

    /// The linearization weight `b_i(t)` at zero for the sublinear bounded
    /// families: `g_i(t, x_t) ~ b_i(t) u` for small constant `u`.
    /// `None` when `g(t, 0) > 0` or the family has no such weight.
    pub fn linear_weight(&self, t: f64) -> Option<f64> {
        let mut acc = 0.0;
        for term in &self.terms {
            let beta = term.beta.eval(t);
            acc += match self.kind {
                NonlinearityKind::NicholsonDiscrete | NonlinearityKind::NicholsonMixed => beta,
                NonlinearityKind::NicholsonDistributed => {
                    let tau = term.tau.eval(t);
                    beta * term.gamma.integral(t - tau, t)
                }
                NonlinearityKind::MackeyGlassDistributed => beta * term.tau.eval(t),
                NonlinearityKind::CustomTable => {
                    if term.table[0].1 != 0.0 {
                        return None;
                    }
                    beta * term.table[1].1 / term.table[1].0
                }
                NonlinearityKind::HematopoiesisDiscrete | NonlinearityKind::HematopoiesisDistributed => return None,
            };
        }
        Some(acc)
    }

    pub fn has_linear_weight(&self) -> bool {
        self.linear_weight(0.0).is_some()
    }

    /// Pointwise limit `lim F(t,u)/u` of the single-delay family, at `0`
    /// (`zero = true`) or at infinity, as a function of `t` (`+inf` allowed).
    pub fn ratio_limit(&self, t: f64, zero: bool) -> Option<f64> {
        if !self.kind.is_single_delay_family() {
            return None;
        }
        let mut acc = 0.0;
        for term in &self.terms {
            let beta = term.beta.eval(t);
            if beta == 0.0 {
                continue;
            }
            let c = term.c.eval(t);
            acc += match (self.kind, zero) {
                (NonlinearityKind::NicholsonDiscrete, true) => beta,
                (NonlinearityKind::NicholsonDiscrete, false) => {
                    if c > 0.0 {
                        0.0
                    } else {
                        beta
                    }
                }
                (NonlinearityKind::HematopoiesisDiscrete, true) => f64::INFINITY,
                (NonlinearityKind::HematopoiesisDiscrete, false) => 0.0,
                (NonlinearityKind::CustomTable, true) => {
                    if term.table[0].1 > 0.0 {
                        f64::INFINITY
                    } else {
                        beta * term.table[1].1 / term.table[1].0
                    }
                }
                (NonlinearityKind::CustomTable, false) => 0.0,
                _ => unreachable!(),
            };
        }
        Some(acc)
    }
}
