//! Auxiliary quantities D, J, B, B~, Gamma and their state-independent bounds.

use serde::Serialize;

use crate::error::{Hypothesis, ModelError};
use crate::history::{History, Side};
use crate::impulse::ImpulseMap;
use crate::system::SystemSpec;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImpulseBounds {
    pub b_lower: f64,
    pub b_upper: f64,
    pub gamma_lower: f64,
    pub gamma_upper: f64,
    pub d_omega: f64,
    pub sigma: f64,
    pub m1: f64,
    pub m2: f64,
    pub n1: f64,
    pub n2: f64,
}

/// `D_i(t) = int_0^t d_i`.
pub fn d(spec: &SystemSpec, i: usize, t: f64) -> f64 {
    spec.d_primitive(i, t)
}

pub fn j(map: &ImpulseMap, u: f64) -> f64 {
    map.j(u.max(0.0))
}

/// `prod J_ik(x_i(t_k))` over the instants in `[from, to)`, chronologically.
pub fn b_window(spec: &SystemSpec, i: usize, x: &dyn History, from: f64, to: f64) -> f64 {
    let sched = spec.impulses();
    let mut acc = 1.0;
    for (k, t) in sched.instants_in(from, to) {
        acc *= sched.map(k, i).j(x.value(i, t, Side::Left));
    }
    acc
}

/// `B_i(omega; x_i) = prod_{k=1}^p J_ik(x_i(t_k))`.
pub fn b_omega(spec: &SystemSpec, i: usize, x: &dyn History) -> f64 {
    let sched = spec.impulses();
    let mut acc = 1.0;
    for (k, &t) in sched.instants().iter().enumerate() {
        acc *= sched.map(k, i).j(x.value(i, t, Side::Left));
    }
    acc
}

pub fn gamma(spec: &SystemSpec, i: usize, x: &dyn History) -> Result<f64, ModelError> {
    let b = b_omega(spec, i, x);
    let e = spec.d_omega(i).exp();
    let den = b * e - 1.0;
    if !(den > 0.0) {
        return Err(ModelError::hypothesis(
            Hypothesis::H3,
            format!("component {}: B(omega) e^(D(omega)) = {:.12e} is not above 1", i + 1, b * e),
        ));
    }
    Ok(1.0 / den)
}

/// Window extremes `(ulB_i, olB_i)` over `j = 1..p`, `l = 0..p` with cyclic wrap.
pub fn window_extremes(spec: &SystemSpec, i: usize) -> (f64, f64) {
    let sched = spec.impulses();
    let p = sched.p();
    let mut lo: f64 = 1.0;
    let mut hi: f64 = 1.0;
    for j0 in 0..p {
        let mut plo = 1.0;
        let mut phi = 1.0;
        for l in 0..p {
            let m = sched.map(j0 + l, i);
            plo *= m.j_lower();
            phi *= m.j_upper();
            lo = lo.min(plo);
            hi = hi.max(phi);
        }
    }
    (lo, hi)
}

/// `(prod (1+alpha_k)^-1, prod (1+eta_k)^-1)` over one period from `k = 1`.
fn period_products(spec: &SystemSpec, i: usize) -> (f64, f64) {
    let sched = spec.impulses();
    let mut pa = 1.0;
    let mut pe = 1.0;
    for k in 0..sched.p() {
        let m = sched.map(k, i);
        pa *= m.j_upper();
        pe *= m.j_lower();
    }
    (pa, pe)
}

pub fn bounds_for(spec: &SystemSpec, i: usize) -> Result<ImpulseBounds, ModelError> {
    let d_omega = spec.d_omega(i);
    let e = d_omega.exp();
    let em1 = e - 1.0;
    let (pa, pe) = period_products(spec, i);
    let den_hi = pe * e - 1.0;
    if !(den_hi > 0.0) {
        return Err(ModelError::hypothesis(
            Hypothesis::H3,
            format!(
                "component {}: prod (1 + eta_k) = {:.12e} is not below e^(D(omega)) = {:.12e}",
                i + 1,
                1.0 / pe,
                e
            ),
        ));
    }
    let den_lo = pa * e - 1.0;
    let (b_lower, b_upper) = window_extremes(spec, i);
    let gamma_lower = 1.0 / den_lo;
    let gamma_upper = 1.0 / den_hi;
    Ok(ImpulseBounds {
        b_lower,
        b_upper,
        gamma_lower,
        gamma_upper,
        d_omega,
        sigma: b_lower / b_upper * (-d_omega).exp(),
        m1: b_lower * em1 / den_lo,
        m2: b_upper * em1 / den_hi,
        n1: gamma_lower * b_lower,
        n2: gamma_upper * b_upper * e,
    })
}

/// Bounds for every component; fails with (H3) naming the offending product.
pub fn bounds(spec: &SystemSpec) -> Result<Vec<ImpulseBounds>, ModelError> {
    (0..spec.n()).map(|i| bounds_for(spec, i)).collect()
}

pub fn sigma(bounds: &[ImpulseBounds]) -> Vec<f64> {
    bounds.iter().map(|b| b.sigma).collect()
}
