//! Envelope pairs `(b1, b2)` with `b1 u <= g <= b2 u` near zero and infinity.

use crate::error::{CriteriaError, Hypothesis, ModelError};
use crate::impulse_algebra::ImpulseBounds;
use crate::nonlinearity::NonlinearityKind;
use crate::periodic::Profile;
use crate::system::SystemSpec;

/// Multiplier for `b1 = M g(t, 0)` when `g(t, 0) > 0` (no linear weight).
pub const HEMATOPOIESIS_M: f64 = 1e6;

#[derive(Clone, Debug)]
pub struct EnvelopeSet {
    pub b1: Vec<Profile>,
    pub b2: Vec<Profile>,
    pub source: String,
    pub epsilon: Option<f64>,
}

impl EnvelopeSet {
    pub fn declared(spec: &SystemSpec) -> Option<EnvelopeSet> {
        spec.envelopes().map(|e| EnvelopeSet {
            b1: e.b1.iter().cloned().map(Profile::Fourier).collect(),
            b2: e.b2.iter().cloned().map(Profile::Fourier).collect(),
            source: "declared".into(),
            epsilon: None,
        })
    }
}

/// The weight `b_i(t)` with `g_i(t, u) ~ b_i(t) u` as `u -> 0`, if the
/// nonlinearity has one.
pub fn derived_b(spec: &SystemSpec, i: usize) -> Option<Profile> {
    let g = spec.nonlinearity()[i].clone();
    if !g.has_linear_weight() {
        return None;
    }
    let label = format!("b_{}", i + 1);
    Some(Profile::derived(spec.omega(), label, move |t| g.linear_weight(t).unwrap_or(0.0)))
}

/// The epsilon family. With a linear weight `b`, it is `b1 = (1 - eps) b`
/// (times `sigma` for mixed delays), and otherwise `b1 = M g(t, 0)`.
/// In both cases `b2 = eps`.
pub fn derive_envelopes(spec: &SystemSpec, bounds: &[ImpulseBounds], eps: f64) -> Result<EnvelopeSet, CriteriaError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(CriteriaError::Model(ModelError::Invalid(format!("epsilon must lie in (0, 1), got {eps}"))));
    }
    let omega = spec.omega();
    let mut b1 = Vec::with_capacity(spec.n());
    let mut b2 = Vec::with_capacity(spec.n());
    for i in 0..spec.n() {
        let g = &spec.nonlinearity()[i];
        let unbounded_linear = matches!(
            g.kind(),
            NonlinearityKind::NicholsonDiscrete | NonlinearityKind::NicholsonDistributed | NonlinearityKind::NicholsonMixed
        ) && !g.is_bounded();
        let mg_linear = g.kind() == NonlinearityKind::MackeyGlassDistributed && g.terms().iter().any(|t| t.c.min() <= 0.0);
        if unbounded_linear || mg_linear {
            return Err(CriteriaError::EnvelopesRequired(format!(
                "component {} (c must be positive for the derived envelopes)",
                i + 1
            )));
        }
        let lower = if let Some(b) = derived_b(spec, i) {
            let k = if g.kind() == NonlinearityKind::NicholsonMixed { (1.0 - eps) * bounds[i].sigma } else { 1.0 - eps };
            b.scaled(k)
        } else {
            let g = g.clone();
            Profile::derived(omega, format!("M*g_{}(t,0)", i + 1), move |t| HEMATOPOIESIS_M * g.at_zero(t))
        };
        if !(lower.integral_over_period() > 0.0) {
            return Err(ModelError::hypothesis(Hypothesis::H6, format!("derived b1_{} has zero mean", i + 1)).into());
        }
        b1.push(lower);
        b2.push(Profile::constant(omega, eps));
    }
    Ok(EnvelopeSet { b1, b2, source: format!("epsilon={eps}"), epsilon: Some(eps) })
}
