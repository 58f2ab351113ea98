use std::collections::BTreeMap;

use super::envelopes::{derived_b, EnvelopeSet};
use super::{check_v, pointwise_condition, Branch, Condition, CriterionReport, Evaluator, Relation, TheoremId};
use crate::error::CriteriaError;
use crate::nonlinearity::NonlinearityKind;
use crate::periodic::Profile;

/// Evaluates one criterion at a fixed scaling vector `v`.
///
/// `env` is required exactly when [`TheoremId::needs_envelopes`] holds.
pub fn evaluate(ctx: &Evaluator, theorem: TheoremId, v: &[f64], env: Option<&EnvelopeSet>, refine: bool) -> Result<CriterionReport, CriteriaError> {
    check_v(ctx.spec(), v)?;
    let need_env = || env.ok_or_else(|| CriteriaError::EnvelopesRequired(theorem.to_string()));
    let mut report = match theorem {
        TheoremId::T3_1 => {
            let ones = vec![1.0; v.len()];
            kernel_pair(ctx, theorem, &ones, need_env()?, false, refine)
        }
        TheoremId::T3_2_sublinear => kernel_pair(ctx, theorem, v, need_env()?, false, refine),
        TheoremId::T3_2_superlinear => kernel_pair(ctx, theorem, v, need_env()?, true, refine),
        TheoremId::T3_3_pointwise => pointwise_envelopes(ctx, v, need_env()?, refine),
        TheoremId::T3_3_average => average_envelopes(ctx, v, need_env()?),
        TheoremId::C3_1_nonimpulsive => nonimpulsive(ctx, v, need_env()?, refine)?,
        TheoremId::C_scalar => scalar(ctx, need_env()?, refine)?,
        TheoremId::T3_6_limits => limits(ctx, v, refine)?,
        TheoremId::T3_4_bounded => {
            let b = bounded_weights(ctx, theorem, None)?;
            bounded(ctx, theorem, v, &b, refine, ["kernel", "pointwise", "average"])
        }
        TheoremId::T_N1_nicholson => {
            let b = bounded_weights(ctx, theorem, Some(NonlinearityKind::NicholsonDistributed))?;
            bounded(ctx, theorem, v, &b, refine, ["kernel", "pointwise", "average"])
        }
        TheoremId::T4_4_mixed => {
            let b = bounded_weights(ctx, theorem, Some(NonlinearityKind::NicholsonMixed))?;
            let b: Vec<Profile> = b.iter().zip(ctx.bounds()).map(|(b, bd)| b.scaled(bd.sigma)).collect();
            bounded(ctx, theorem, v, &b, refine, ["kernel", "pointwise", "average"])
        }
        TheoremId::C3_4_gamma => gamma(ctx, v, refine)?,
        TheoremId::T4_1_hematopoiesis => hematopoiesis(ctx, v, refine)?,
        TheoremId::T4_2_planar => planar(ctx, v, refine)?,
    };
    if let Some(env) = env.filter(|_| theorem.needs_envelopes()) {
        report.envelope = Some(env.source.clone());
        report.epsilon = env.epsilon;
    }
    Ok(report)
}

fn base_quantities(ctx: &Evaluator) -> Vec<BTreeMap<String, f64>> {
    ctx.bounds()
        .iter()
        .map(|b| {
            BTreeMap::from([
                ("ulB".to_string(), b.b_lower),
                ("olB".to_string(), b.b_upper),
                ("ulGamma".to_string(), b.gamma_lower),
                ("olGamma".to_string(), b.gamma_upper),
                ("D_omega".to_string(), b.d_omega),
                ("sigma".to_string(), b.sigma),
                ("m1".to_string(), b.m1),
                ("m2".to_string(), b.m2),
                ("n1".to_string(), b.n1),
                ("n2".to_string(), b.n2),
            ])
        })
        .collect()
}

fn not_applicable(theorem: TheoremId, reason: impl Into<String>) -> CriteriaError {
    CriteriaError::NotApplicable { theorem: theorem.to_string(), reason: reason.into() }
}

/// Kernel-integral inequalities, sublinear (`c_i^0 >= 1 >= C_i^inf`) or
/// superlinear (`C_i^0 <= 1 <= c_i^inf`).
fn kernel_pair(ctx: &Evaluator, theorem: TheoremId, v: &[f64], env: &EnvelopeSet, superlinear: bool, refine: bool) -> CriterionReport {
    let mut q = base_quantities(ctx);
    let mut conds = Vec::new();
    for (i, b) in ctx.bounds().iter().enumerate() {
        let k1 = ctx.kernel(i, env.b1[i].clone());
        let k2 = ctx.kernel(i, env.b2[i].clone());
        let lower = b.gamma_lower * b.b_lower;
        let upper = b.gamma_upper * b.b_upper;
        if superlinear {
            let (t0, big0) = ctx.kernel_extremum(i, v, Some(&k1), true, refine);
            let (ti, small_inf) = ctx.kernel_extremum(i, v, Some(&k2), false, refine);
            q[i].insert("C0".into(), upper * big0);
            q[i].insert("c_inf".into(), lower * small_inf);
            conds.push(Condition::scalar("C_i^0 <= 1", i, upper * big0, Relation::Le, 1.0).with_t(t0));
            conds.push(Condition::scalar("c_i^inf >= 1", i, lower * small_inf, Relation::Ge, 1.0).with_t(ti));
        } else {
            let (t0, small0) = ctx.kernel_extremum(i, v, Some(&k1), false, refine);
            let (ti, big_inf) = ctx.kernel_extremum(i, v, Some(&k2), true, refine);
            q[i].insert("c0".into(), lower * small0);
            q[i].insert("C_inf".into(), upper * big_inf);
            conds.push(Condition::scalar("c_i^0 >= 1", i, lower * small0, Relation::Ge, 1.0).with_t(t0));
            conds.push(Condition::scalar("C_i^inf <= 1", i, upper * big_inf, Relation::Le, 1.0).with_t(ti));
        }
    }
    let name = if superlinear { "superlinear" } else { "sublinear" };
    CriterionReport::assemble(theorem, v, ctx, refine, q, vec![Branch::new(name, conds)])
}

/// `M2 [B2 + A] v <= D v <= M1 [B1 + A] v`.
fn pointwise_envelopes(ctx: &Evaluator, v: &[f64], env: &EnvelopeSet, refine: bool) -> CriterionReport {
    let spec = ctx.spec();
    let mut conds = Vec::new();
    for (i, b) in ctx.bounds().iter().enumerate() {
        let d = &spec.death()[i];
        conds.push(pointwise_condition(
            ctx,
            "M2 [B2 + A] v <= D v",
            i,
            |t| b.m2 * (env.b2[i].eval(t) + ctx.coupling_at(i, v, t)),
            Relation::Le,
            |t| d.eval(t),
            refine,
        ));
        conds.push(pointwise_condition(
            ctx,
            "D v <= M1 [B1 + A] v",
            i,
            |t| d.eval(t),
            Relation::Le,
            |t| b.m1 * (env.b1[i].eval(t) + ctx.coupling_at(i, v, t)),
            refine,
        ));
    }
    CriterionReport::assemble(TheoremId::T3_3_pointwise, v, ctx, refine, base_quantities(ctx), vec![Branch::new("pointwise", conds)])
}

/// `int N2 [B2 + A] v <= v <= int N1 [B1 + A] v`.
fn average_envelopes(ctx: &Evaluator, v: &[f64], env: &EnvelopeSet) -> CriterionReport {
    let mut q = base_quantities(ctx);
    let mut conds = Vec::new();
    for (i, b) in ctx.bounds().iter().enumerate() {
        let ci = ctx.coupling_integral(i, v);
        let upper = b.n2 * (env.b2[i].integral_over_period() + ci);
        let lower = b.n1 * (env.b1[i].integral_over_period() + ci);
        q[i].insert("int_N2".into(), upper);
        q[i].insert("int_N1".into(), lower);
        conds.push(Condition::scalar("int N2 [B2 + A] v <= v", i, upper, Relation::Le, 1.0));
        conds.push(Condition::scalar("v <= int N1 [B1 + A] v", i, 1.0, Relation::Le, lower));
    }
    CriterionReport::assemble(TheoremId::T3_3_average, v, ctx, false, q, vec![Branch::new("average", conds)])
}

/// Direct nonimpulsive form, evaluated without the impulse bounds.
fn nonimpulsive(ctx: &Evaluator, v: &[f64], env: &EnvelopeSet, refine: bool) -> Result<CriterionReport, CriteriaError> {
    let spec = ctx.spec();
    let theorem = TheoremId::C3_1_nonimpulsive;
    if spec.is_impulsive() {
        return Err(not_applicable(theorem, "the system has impulses"));
    }
    let mut a = Vec::new();
    let mut bb = Vec::new();
    for i in 0..spec.n() {
        let d = &spec.death()[i];
        let net = |t: f64| d.eval(t) - ctx.coupling_at(i, v, t);
        a.push(pointwise_condition(ctx, "b2 v <= (D - A) v", i, |t| env.b2[i].eval(t), Relation::Le, net, refine));
        a.push(pointwise_condition(ctx, "(D - A) v <= b1 v", i, net, Relation::Le, |t| env.b1[i].eval(t), refine));
        let e = spec.d_omega(i).exp();
        let ci = ctx.coupling_integral(i, v);
        bb.push(Condition::scalar("int (B2 + A) v <= (1 - e^-D) v", i, env.b2[i].integral_over_period() + ci, Relation::Le, 1.0 - 1.0 / e));
        bb.push(Condition::scalar("int (B1 + A) v >= (e^D - 1) v", i, env.b1[i].integral_over_period() + ci, Relation::Ge, e - 1.0));
    }
    let q = base_quantities(ctx);
    Ok(CriterionReport::assemble(theorem, v, ctx, refine, q, vec![Branch::new("(a)", a), Branch::new("(b)", bb)]))
}

fn scalar(ctx: &Evaluator, env: &EnvelopeSet, refine: bool) -> Result<CriterionReport, CriteriaError> {
    let spec = ctx.spec();
    if spec.n() != 1 {
        return Err(not_applicable(TheoremId::C_scalar, "the system is not scalar"));
    }
    let b = &ctx.bounds()[0];
    let d = &spec.death()[0];
    let a = vec![
        pointwise_condition(ctx, "M2 b2 <= d", 0, |t| b.m2 * env.b2[0].eval(t), Relation::Le, |t| d.eval(t), refine),
        pointwise_condition(ctx, "d <= M1 b1", 0, |t| d.eval(t), Relation::Le, |t| b.m1 * env.b1[0].eval(t), refine),
    ];
    let bb = vec![
        Condition::scalar("N2 int b2 <= 1", 0, b.n2 * env.b2[0].integral_over_period(), Relation::Le, 1.0),
        Condition::scalar("1 <= N1 int b1", 0, 1.0, Relation::Le, b.n1 * env.b1[0].integral_over_period()),
    ];
    Ok(CriterionReport::assemble(TheoremId::C_scalar, &[1.0], ctx, refine, base_quantities(ctx), vec![Branch::new("(a)", a), Branch::new("(b)", bb)]))
}

/// `x / d` with `x / 0 = inf` for `x > 0` and `0 / 0 = 0`.
fn ratio(x: f64, d: f64) -> f64 {
    if d > 0.0 {
        x / d
    } else if x > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// `l * d` with `inf * 0 = 0`.
fn times(l: f64, d: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        l * d
    }
}

struct Limits {
    f0: Vec<f64>,
    big_f0: Vec<f64>,
    finf: Vec<f64>,
    big_finf: Vec<f64>,
    source: &'static str,
}

fn limit_profile(ctx: &Evaluator, refine: bool) -> Result<Limits, CriteriaError> {
    let spec = ctx.spec();
    if let Some(l) = spec.limits() {
        return Ok(Limits { f0: l.f0.clone(), big_f0: l.big_f0.clone(), finf: l.finf.clone(), big_finf: l.big_finf.clone(), source: "declared" });
    }
    let mut out = Limits { f0: vec![], big_f0: vec![], finf: vec![], big_finf: vec![], source: "analytic" };
    for i in 0..spec.n() {
        let g = &spec.nonlinearity()[i];
        if !g.kind().is_single_delay_family() {
            return Err(not_applicable(
                TheoremId::T3_6_limits,
                format!("component {} ({}) has no analytic limits; declare [limits]", i + 1, g.kind()),
            ));
        }
        let d = &spec.death()[i];
        let q0 = |t: f64| ratio(g.ratio_limit(t, true).unwrap_or(0.0), d.eval(t));
        let qi = |t: f64| ratio(g.ratio_limit(t, false).unwrap_or(0.0), d.eval(t));
        out.f0.push(ctx.pointwise_min(q0, refine).1);
        out.big_f0.push(ctx.pointwise_max(q0, refine).1);
        out.finf.push(ctx.pointwise_min(qi, refine).1);
        out.big_finf.push(ctx.pointwise_max(qi, refine).1);
    }
    Ok(out)
}

fn limits(ctx: &Evaluator, v: &[f64], refine: bool) -> Result<CriterionReport, CriteriaError> {
    let spec = ctx.spec();
    let lim = limit_profile(ctx, refine)?;
    let mut q = base_quantities(ctx);
    for i in 0..spec.n() {
        q[i].insert("f0".into(), lim.f0[i]);
        q[i].insert("F0".into(), lim.big_f0[i]);
        q[i].insert("finf".into(), lim.finf[i]);
        q[i].insert("Finf".into(), lim.big_finf[i]);
    }
    let sub_ok = lim.big_finf.iter().all(|x| x.is_finite());
    let sup_ok = lim.big_f0.iter().all(|x| x.is_finite());
    if !sub_ok && !sup_ok {
        return Err(CriteriaError::UnsupportedLimit(
            "both F^inf and F^0 are infinite for some component; neither branch can be evaluated".into(),
        ));
    }
    let mut branches = Vec::new();
    let build = |sub: bool| {
        let mut conds = Vec::new();
        for (i, b) in ctx.bounds().iter().enumerate() {
            let d = &spec.death()[i];
            let a = |t: f64| ctx.coupling_at(i, v, t);
            if sub {
                let (big, small) = (lim.big_finf[i], lim.f0[i]);
                conds.push(pointwise_condition(ctx, "M2 [F^inf D + A] v < D v", i, |t| b.m2 * (times(big, d.eval(t)) + a(t)), Relation::Lt, |t| d.eval(t), refine));
                conds.push(pointwise_condition(ctx, "D v < M1 [f^0 D + A] v", i, |t| d.eval(t), Relation::Lt, |t| b.m1 * (times(small, d.eval(t)) + a(t)), refine));
            } else {
                let (small, big) = (lim.finf[i], lim.big_f0[i]);
                conds.push(pointwise_condition(ctx, "M1 [f^inf D + A] v > D v", i, |t| b.m1 * (times(small, d.eval(t)) + a(t)), Relation::Gt, |t| d.eval(t), refine));
                conds.push(pointwise_condition(ctx, "D v > M2 [F^0 D + A] v", i, |t| d.eval(t), Relation::Gt, |t| b.m2 * (times(big, d.eval(t)) + a(t)), refine));
            }
        }
        conds
    };
    branches.push(if sub_ok { Branch::new("sublinear", build(true)) } else { Branch::skipped("sublinear", "F^inf is infinite") });
    branches.push(if sup_ok { Branch::new("superlinear", build(false)) } else { Branch::skipped("superlinear", "F^0 is infinite") });
    let mut r = CriterionReport::assemble(TheoremId::T3_6_limits, v, ctx, refine, q, branches);
    r.notes.push(format!("limits: {}", lim.source));
    Ok(r)
}

fn bounded_weights(ctx: &Evaluator, theorem: TheoremId, kind: Option<NonlinearityKind>) -> Result<Vec<Profile>, CriteriaError> {
    let spec = ctx.spec();
    (0..spec.n())
        .map(|i| {
            let g = &spec.nonlinearity()[i];
            if let Some(k) = kind {
                if g.kind() != k {
                    return Err(not_applicable(theorem, format!("component {} is {}, expected {}", i + 1, g.kind(), k)));
                }
            }
            if !g.is_bounded() {
                return Err(not_applicable(theorem, format!("nonlinearity of component {} is unbounded", i + 1)));
            }
            derived_b(spec, i).ok_or_else(|| not_applicable(theorem, format!("component {} has no linear weight b_i", i + 1)))
        })
        .collect()
}

/// Bounded-nonlinearity criterion with weights `b`: kernel form, pointwise
/// form and averaged form; passes if any of them holds.
fn bounded(ctx: &Evaluator, theorem: TheoremId, v: &[f64], b: &[Profile], refine: bool, names: [&str; 3]) -> CriterionReport {
    let spec = ctx.spec();
    let mut q = base_quantities(ctx);
    let (mut kern, mut pw, mut avg) = (Vec::new(), Vec::new(), Vec::new());
    for (i, bd) in ctx.bounds().iter().enumerate() {
        let kb = ctx.kernel(i, b[i].clone());
        let (ta, big) = ctx.kernel_extremum(i, v, None, true, refine);
        let (tb, small) = ctx.kernel_extremum(i, v, Some(&kb), false, refine);
        let upper = bd.gamma_upper * bd.b_upper * big;
        let lower = bd.gamma_lower * bd.b_lower * small;
        q[i].insert("kernel_A".into(), upper);
        q[i].insert("kernel_BA".into(), lower);
        kern.push(Condition::scalar("olGamma olB max K(A v) < 1", i, upper, Relation::Lt, 1.0).with_t(ta));
        kern.push(Condition::scalar("ulGamma ulB min K((B + A) v) > 1", i, lower, Relation::Gt, 1.0).with_t(tb));

        let d = &spec.death()[i];
        pw.push(pointwise_condition(ctx, "M2 A v <=!= D v", i, |t| bd.m2 * ctx.coupling_at(i, v, t), Relation::LeNotEquiv, |t| d.eval(t), refine));
        pw.push(pointwise_condition(
            ctx,
            "D v <=!= M1 [B + A] v",
            i,
            |t| d.eval(t),
            Relation::LeNotEquiv,
            |t| bd.m1 * (b[i].eval(t) + ctx.coupling_at(i, v, t)),
            refine,
        ));

        let ci = ctx.coupling_integral(i, v);
        avg.push(Condition::scalar("int N2 A v <= v", i, bd.n2 * ci, Relation::Le, 1.0));
        avg.push(Condition::scalar("v <= int N1 [B + A] v", i, 1.0, Relation::Le, bd.n1 * (b[i].integral_over_period() + ci)));
    }
    let branches = vec![Branch::new(names[0], kern), Branch::new(names[1], pw), Branch::new(names[2], avg)];
    CriterionReport::assemble(theorem, v, ctx, refine, q, branches)
}

fn gamma(ctx: &Evaluator, v: &[f64], refine: bool) -> Result<CriterionReport, CriteriaError> {
    let spec = ctx.spec();
    let theorem = TheoremId::C3_4_gamma;
    if spec.is_impulsive() {
        return Err(not_applicable(theorem, "the system has impulses"));
    }
    let b = bounded_weights(ctx, theorem, None)?;
    let mut q = base_quantities(ctx);
    let (mut a, mut bb) = (Vec::new(), Vec::new());
    for i in 0..spec.n() {
        let d = &spec.death()[i];
        let den = |t: f64| d.eval(t) - ctx.coupling_at(i, v, t);
        let (t_min, den_min) = ctx.pointwise_min(den, refine);
        if !(den_min > 0.0) {
            return Err(CriteriaError::Precondition {
                component: i + 1,
                t: t_min,
                message: format!("d_i v_i - sum_j v_j a_ij = {den_min:e} is not positive"),
            });
        }
        let g = |t: f64| b[i].eval(t) / den(t);
        q[i].insert("gamma_min".into(), ctx.pointwise_min(g, refine).1);
        q[i].insert("gamma_max".into(), ctx.pointwise_max(g, refine).1);
        a.push(Condition::scalar("A v < D v", i, 0.0, Relation::Lt, den_min).with_t(t_min));
        a.push(pointwise_condition(ctx, "gamma_i >=!= 1", i, |_| 1.0, Relation::LeNotEquiv, g, refine));

        let e = spec.d_omega(i).exp();
        let ci = ctx.coupling_integral(i, v);
        bb.push(Condition::scalar("e^D int A v <= v (e^D - 1)", i, e * ci, Relation::Le, e - 1.0));
        bb.push(Condition::scalar("v (e^D - 1) <= int (B + A) v", i, e - 1.0, Relation::Le, b[i].integral_over_period() + ci));
    }
    Ok(CriterionReport::assemble(theorem, v, ctx, refine, q, vec![Branch::new("(a)", a), Branch::new("(b)", bb)]))
}

fn hematopoiesis(ctx: &Evaluator, v: &[f64], refine: bool) -> Result<CriterionReport, CriteriaError> {
    let spec = ctx.spec();
    let theorem = TheoremId::T4_1_hematopoiesis;
    if let Some(i) = (0..spec.n()).find(|&i| !spec.nonlinearity()[i].kind().is_hematopoiesis()) {
        return Err(not_applicable(theorem, format!("component {} is not a hematopoiesis nonlinearity", i + 1)));
    }
    let mut q = base_quantities(ctx);
    let (mut main, mut pw, mut avg) = (Vec::new(), Vec::new(), Vec::new());
    for (i, bd) in ctx.bounds().iter().enumerate() {
        let (t, big) = ctx.kernel_extremum(i, v, None, true, refine);
        let val = bd.gamma_upper * bd.b_upper * big;
        q[i].insert("kernel_A".into(), val);
        main.push(Condition::scalar("olGamma olB max K(A v) < 1", i, val, Relation::Lt, 1.0).with_t(t));
        let d = &spec.death()[i];
        pw.push(pointwise_condition(ctx, "M2 A v <=!= D v", i, |t| bd.m2 * ctx.coupling_at(i, v, t), Relation::LeNotEquiv, |t| d.eval(t), refine));
        avg.push(Condition::scalar("N2 int A v <= v", i, bd.n2 * ctx.coupling_integral(i, v), Relation::Le, 1.0));
    }
    let branches = vec![Branch::new("kernel", main), Branch::new("pointwise", pw), Branch::new("average", avg)];
    Ok(CriterionReport::assemble(theorem, v, ctx, refine, q, branches))
}

fn planar(ctx: &Evaluator, v: &[f64], refine: bool) -> Result<CriterionReport, CriteriaError> {
    let spec = ctx.spec();
    let theorem = TheoremId::T4_2_planar;
    if spec.n() != 2 {
        return Err(not_applicable(theorem, "the system is not planar"));
    }
    let b = bounded_weights(ctx, theorem, Some(NonlinearityKind::NicholsonDiscrete))?;
    let mut q = base_quantities(ctx);
    let mut conds = Vec::new();
    for (i, bd) in ctx.bounds().iter().enumerate() {
        let d = &spec.death()[i];
        let (t_min, d_min) = ctx.pointwise_min(|t| d.eval(t), refine);
        if !(d_min > 0.0) {
            return Err(CriteriaError::Precondition { component: i + 1, t: t_min, message: format!("d_i = {d_min:e} must be positive") });
        }
        let (t_hi, hi) = ctx.pointwise_max(|t| ctx.coupling_at(i, v, t) / d.eval(t), refine);
        let (t_lo, lo) = ctx.pointwise_min(|t| (b[i].eval(t) + ctx.coupling_at(i, v, t)) / d.eval(t), refine);
        q[i].insert("m2_max_a_over_d".into(), bd.m2 * hi);
        q[i].insert("m1_min_ba_over_d".into(), bd.m1 * lo);
        conds.push(Condition::scalar("M2 max (v_j a_ij)/(v_i d_i) < 1", i, bd.m2 * hi, Relation::Lt, 1.0).with_t(t_hi));
        conds.push(Condition::scalar("M1 min (b_i + v_j a_ij / v_i)/d_i > 1", i, bd.m1 * lo, Relation::Gt, 1.0).with_t(t_lo));
    }
    Ok(CriterionReport::assemble(theorem, v, ctx, refine, q, vec![Branch::new("planar", conds)]))
}
