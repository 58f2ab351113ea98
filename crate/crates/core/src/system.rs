//! The full description of an n-dimensional periodic impulsive delay system.

use crate::error::{Hypothesis, ModelError};
use crate::impulse::ImpulseSchedule;
use crate::nonlinearity::Nonlinearity;
use crate::periodic::PeriodicFn;

/// Comparison functions `b_1`, `b_2` with an annulus `r0 < R0`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopePair {
    pub b1: Vec<PeriodicFn>,
    pub b2: Vec<PeriodicFn>,
    pub r0: f64,
    pub big_r0: f64,
}

impl EnvelopePair {
    pub fn new(b1: Vec<PeriodicFn>, b2: Vec<PeriodicFn>, r0: f64, big_r0: f64) -> Result<Self, ModelError> {
        if b1.len() != b2.len() {
            return Err(ModelError::Invalid("envelopes b1 and b2 need the same length".into()));
        }
        if !(r0 > 0.0 && big_r0 > r0) {
            return Err(ModelError::hypothesis(
                Hypothesis::H6,
                format!("envelope radii need 0 < r0 < R0, got r0 = {r0}, R0 = {big_r0}"),
            ));
        }
        let flag = |v: Vec<PeriodicFn>, q: usize| -> Result<Vec<PeriodicFn>, ModelError> {
            v.into_iter()
                .enumerate()
                .map(|(i, b)| {
                    let b = b.into_nonneg(format!("b{q}_{}", i + 1))?;
                    if !(b.integral_over_period() > 0.0) {
                        return Err(ModelError::hypothesis(
                            Hypothesis::H6,
                            format!("envelope b{q}_{} has zero mean", i + 1),
                        ));
                    }
                    Ok(b)
                })
                .collect()
        };
        let b1 = flag(b1, 1)?;
        let b2 = flag(b2, 2)?;
        Ok(EnvelopePair { b1, b2, r0, big_r0 })
    }
}

/// Declared limits of `F_i(t,u) / (d_i(t) u)` at zero and infinity.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitProfile {
    pub f0: Vec<f64>,
    pub big_f0: Vec<f64>,
    pub finf: Vec<f64>,
    pub big_finf: Vec<f64>,
}

impl LimitProfile {
    pub fn new(f0: Vec<f64>, big_f0: Vec<f64>, finf: Vec<f64>, big_finf: Vec<f64>) -> Result<Self, ModelError> {
        let n = f0.len();
        if big_f0.len() != n || finf.len() != n || big_finf.len() != n {
            return Err(ModelError::Invalid("limit profile vectors need equal lengths".into()));
        }
        for i in 0..n {
            let vals = [f0[i], big_f0[i], finf[i], big_finf[i]];
            if vals.iter().any(|v| v.is_nan() || *v < 0.0) {
                return Err(ModelError::Invalid(format!("limits of component {} must lie in [0, inf]", i + 1)));
            }
            if f0[i] > big_f0[i] || finf[i] > big_finf[i] {
                return Err(ModelError::Invalid(format!(
                    "limits of component {} need f0 <= F0 and finf <= Finf",
                    i + 1
                )));
            }
        }
        Ok(LimitProfile { f0, big_f0, finf, big_finf })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    pub name: String,
    omega: f64,
    death: Vec<PeriodicFn>,
    coupling: Vec<Vec<PeriodicFn>>,
    nonlinearity: Vec<Nonlinearity>,
    impulses: ImpulseSchedule,
    envelopes: Option<EnvelopePair>,
    limits: Option<LimitProfile>,
}

impl SystemSpec {
    /// Builds and checks (H1), (H2), (H4). (H3) is checked separately by
    /// [`SystemSpec::check_h3`] so that systems violating it can still be
    /// inspected.
    pub fn new(
        name: impl Into<String>,
        death: Vec<PeriodicFn>,
        coupling: Vec<Vec<PeriodicFn>>,
        nonlinearity: Vec<Nonlinearity>,
        impulses: ImpulseSchedule,
    ) -> Result<Self, ModelError> {
        let n = death.len();
        if n == 0 {
            return Err(ModelError::Invalid("system needs at least one component".into()));
        }
        let omega = impulses.omega();
        if nonlinearity.len() != n {
            return Err(ModelError::Invalid(format!("expected {n} nonlinearities, got {}", nonlinearity.len())));
        }
        if coupling.len() != n || coupling.iter().any(|r| r.len() != n) {
            return Err(ModelError::Invalid(format!("coupling must be {n}x{n}")));
        }
        if impulses.maps().iter().any(|row| row.len() != n) {
            return Err(ModelError::Invalid(format!("impulse maps must have {n} columns")));
        }
        let same = |f: &PeriodicFn| (f.period() - omega).abs() <= 1e-12 * omega;
        let mut d_checked = Vec::with_capacity(n);
        for (i, d) in death.into_iter().enumerate() {
            if !same(&d) {
                return Err(ModelError::Invalid(format!("d_{} does not have period {omega}", i + 1)));
            }
            let d = d.into_nonneg(format!("d_{}", i + 1))?;
            if !(d.integral_over_period() > 0.0) {
                return Err(ModelError::hypothesis(
                    Hypothesis::H4,
                    format!("int_0^omega d_{} = {} must be positive", i + 1, d.integral_over_period()),
                ));
            }
            d_checked.push(d);
        }
        let mut a_checked = Vec::with_capacity(n);
        for (i, row) in coupling.into_iter().enumerate() {
            let mut out = Vec::with_capacity(n);
            for (j, a) in row.into_iter().enumerate() {
                if !same(&a) {
                    return Err(ModelError::Invalid(format!("a_{}{} does not have period {omega}", i + 1, j + 1)));
                }
                if i == j && !a.is_zero() {
                    return Err(ModelError::Invalid(format!("a_{}{} must vanish (fold it into d_{})", i + 1, i + 1, i + 1)));
                }
                out.push(a.into_nonneg(format!("a_{}{}", i + 1, j + 1))?);
            }
            a_checked.push(out);
        }
        for (i, g) in nonlinearity.iter().enumerate() {
            for t in g.terms() {
                if !same(&t.beta) {
                    return Err(ModelError::Invalid(format!("nonlinearity {} does not have period {omega}", i + 1)));
                }
            }
        }
        if n > 1 {
            for i in 0..n {
                let coupled = (0..n).filter(|&j| j != i).all(|j| a_checked[i][j].integral_over_period() > 0.0);
                let fed = nonlinearity[i].integral_at_zero() > 0.0;
                if !coupled && !fed {
                    return Err(ModelError::hypothesis(
                        Hypothesis::H4,
                        format!(
                            "component {} needs int a_{}j > 0 for every j != {} or int g_{}(s, 0) ds > 0",
                            i + 1,
                            i + 1,
                            i + 1,
                            i + 1
                        ),
                    ));
                }
            }
        }
        Ok(SystemSpec {
            name: name.into(),
            omega,
            death: d_checked,
            coupling: a_checked,
            nonlinearity,
            impulses,
            envelopes: None,
            limits: None,
        })
    }

    pub fn with_envelopes(mut self, env: EnvelopePair) -> Result<Self, ModelError> {
        if env.b1.len() != self.n() {
            return Err(ModelError::Invalid(format!("envelopes need {} components", self.n())));
        }
        self.envelopes = Some(env);
        Ok(self)
    }

    pub fn with_limits(mut self, limits: LimitProfile) -> Result<Self, ModelError> {
        if limits.f0.len() != self.n() {
            return Err(ModelError::Invalid(format!("limits need {} components", self.n())));
        }
        self.limits = Some(limits);
        Ok(self)
    }

    /// `prod_k (1 + eta_ik) < e^{D_i(omega)}` for every component.
    pub fn check_h3(&self) -> Result<(), ModelError> {
        for i in 0..self.n() {
            let prod = self.impulses.eta_product(i);
            let e = self.d_omega(i).exp();
            if !(prod < e) {
                return Err(ModelError::hypothesis(
                    Hypothesis::H3,
                    format!(
                        "component {}: prod (1 + eta_k) = {prod:.12e} is not below e^(D(omega)) = {e:.12e}",
                        i + 1
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.death.len()
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn death(&self) -> &[PeriodicFn] {
        &self.death
    }

    pub fn coupling(&self) -> &[Vec<PeriodicFn>] {
        &self.coupling
    }

    pub fn a(&self, i: usize, j: usize) -> &PeriodicFn {
        &self.coupling[i][j]
    }

    pub fn nonlinearity(&self) -> &[Nonlinearity] {
        &self.nonlinearity
    }

    pub fn impulses(&self) -> &ImpulseSchedule {
        &self.impulses
    }

    pub fn envelopes(&self) -> Option<&EnvelopePair> {
        self.envelopes.as_ref()
    }

    pub fn limits(&self) -> Option<&LimitProfile> {
        self.limits.as_ref()
    }

    pub fn max_delay(&self) -> f64 {
        self.nonlinearity.iter().map(|g| g.max_delay()).fold(0.0, f64::max)
    }

    /// `D_i(t) = int_0^t d_i`.
    pub fn d_primitive(&self, i: usize, t: f64) -> f64 {
        self.death[i].primitive(t)
    }

    pub fn d_omega(&self, i: usize) -> f64 {
        self.death[i].integral_over_period()
    }

    pub fn is_impulsive(&self) -> bool {
        (0..self.n()).any(|i| !self.impulses.inert_for(i))
    }

    /// Same system with the impulses removed.
    pub fn without_impulses(&self) -> SystemSpec {
        let mut s = self.clone();
        s.impulses = ImpulseSchedule::empty(self.omega);
        s
    }
}
