use std::cmp::Ordering;

use rayon::prelude::*;

use super::envelopes::{derive_envelopes, EnvelopeSet};
use super::{evaluate, CriterionReport, Evaluator, SweepEntry, TheoremId};
use crate::error::CriteriaError;
use crate::grid::DEFAULT_NODES;
use crate::system::SystemSpec;

/// Values of epsilon tried when no envelopes are declared or pinned.
pub const EPSILON_SWEEP: [f64; 5] = [0.2, 0.1, 0.05, 0.01, 0.001];

const AXIS_POINTS: usize = 21;
const MAX_CANDIDATES: usize = 4000;
const VERIFY_TOP: usize = 10;

#[derive(Clone, Debug)]
pub struct CertifyOptions {
    pub v: Option<Vec<f64>>,
    pub search_v: bool,
    pub epsilon: Option<f64>,
    pub nodes: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { v: None, search_v: false, epsilon: None, nodes: DEFAULT_NODES }
    }
}

fn rank(a: &CriterionReport, b: &CriterionReport) -> Ordering {
    b.pass.cmp(&a.pass).then(b.margin.partial_cmp(&a.margin).unwrap_or(Ordering::Equal))
}

/// Cartesian product of per-axis values for `v_2..v_n`, with `v_1 = 1`.
fn lattice(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![1.0]];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&x| {
                    let mut v = prefix.clone();
                    v.push(x);
                    v
                })
            })
            .collect();
    }
    out
}

fn log_axis(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points).map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp()).collect()
}

/// Grid search over `v` with `v_1 = 1` on a log lattice in `[1e-3, 1e3]`,
/// one factor-2 refinement around the best point, and refined
/// re-evaluation of the best candidates.
pub fn search_v(ctx: &Evaluator, theorem: TheoremId, env: Option<&EnvelopeSet>) -> Result<CriterionReport, CriteriaError> {
    let n = ctx.spec().n();
    if n == 1 || !theorem.uses_v() {
        return evaluate(ctx, theorem, &vec![1.0; n], env, true);
    }
    let dims = n - 1;
    let per_axis = ((MAX_CANDIDATES as f64).powf(1.0 / dims as f64).floor() as usize).clamp(3, AXIS_POINTS);
    let scan = |cands: Vec<Vec<f64>>| -> Vec<Result<CriterionReport, CriteriaError>> {
        cands.into_par_iter().map(|v| evaluate(ctx, theorem, &v, env, false)).collect()
    };
    let coarse = lattice(&vec![log_axis(1e-3, 1e3, per_axis); dims]);
    let mut results = scan(coarse);
    let mut ok: Vec<CriterionReport> = Vec::new();
    let mut first_err = None;
    for r in results.drain(..) {
        match r {
            Ok(r) => ok.push(r),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if ok.is_empty() {
        return Err(first_err.expect("lattice is never empty"));
    }
    ok.sort_by(rank);
    let best = ok[0].v.clone().expect("search reports carry v");
    let axes: Vec<Vec<f64>> = best[1..].iter().map(|&c| log_axis(c / 2.0, c * 2.0, per_axis)).collect();
    ok.extend(scan(lattice(&axes)).into_iter().flatten());
    ok.sort_by(rank);
    let mut verified: Vec<CriterionReport> = ok
        .iter()
        .take(VERIFY_TOP)
        .filter_map(|r| r.v.as_ref())
        .collect::<Vec<_>>()
        .into_par_iter()
        .filter_map(|v| evaluate(ctx, theorem, v, env, true).ok())
        .collect();
    verified.sort_by(rank);
    let mut report = verified.into_iter().next().ok_or_else(|| first_err.unwrap_or(CriteriaError::BadScaling { expected: n, got: vec![] }))?;
    report.notes.push(format!("v found by lattice search ({per_axis} points per axis, refined)"));
    Ok(report)
}

fn run(ctx: &Evaluator, theorem: TheoremId, env: Option<&EnvelopeSet>, opts: &CertifyOptions) -> Result<CriterionReport, CriteriaError> {
    if opts.search_v {
        search_v(ctx, theorem, env)
    } else {
        let v = opts.v.clone().unwrap_or_else(|| vec![1.0; ctx.spec().n()]);
        evaluate(ctx, theorem, &v, env, true)
    }
}

/// Evaluates `theorem` on `spec`, choosing envelopes as follows: a pinned
/// epsilon first, then declared envelopes, then the epsilon sweep.
pub fn certify(spec: &SystemSpec, theorem: TheoremId, opts: &CertifyOptions) -> Result<CriterionReport, CriteriaError> {
    let ctx = Evaluator::with_nodes(spec, opts.nodes)?;
    if !theorem.needs_envelopes() {
        return run(&ctx, theorem, None, opts);
    }
    let superlinear = theorem == TheoremId::T3_2_superlinear;
    if let Some(eps) = opts.epsilon {
        if superlinear {
            return Err(CriteriaError::EnvelopesRequired(theorem.to_string()));
        }
        let env = derive_envelopes(spec, ctx.bounds(), eps)?;
        return run(&ctx, theorem, Some(&env), opts);
    }
    if let Some(env) = EnvelopeSet::declared(spec) {
        return run(&ctx, theorem, Some(&env), opts);
    }
    if superlinear {
        return Err(CriteriaError::EnvelopesRequired(theorem.to_string()));
    }
    let mut best: Option<CriterionReport> = None;
    let mut sweep = Vec::new();
    for eps in EPSILON_SWEEP {
        let env = derive_envelopes(spec, ctx.bounds(), eps)?;
        let r = run(&ctx, theorem, Some(&env), opts)?;
        sweep.push(SweepEntry { epsilon: eps, pass: r.pass, margin: r.margin, v: r.v.clone() });
        if best.as_ref().is_none_or(|b| rank(&r, b) == Ordering::Less) {
            best = Some(r);
        }
    }
    let mut best = best.expect("sweep is not empty");
    best.sweep = sweep;
    Ok(best)
}
