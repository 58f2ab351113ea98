//! The fixed-point operator
//! `(Phi_i x)(t) = Gamma_i(x_i) int_t^{t+omega} B~_i(s,t; x_i) e^{D_i(s)-D_i(t)} (sum_j a_ij x_j + g_i(s, x_is)) ds`
//! on grid functions, and a damped iteration for its fixed points.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Hypothesis, ModelError, SolveError};
use crate::grid::{Grid, GridFunction, PrimitiveHistory, DEFAULT_NODES};
use crate::history::Side;
use crate::impulse::SNAP;
use crate::impulse_algebra;
use crate::system::SystemSpec;

/// `sum_j a_ij(s) x_j(s) + g_i(s, x_is)`.
fn forcing(spec: &SystemSpec, x: &GridFunction, hist: &PrimitiveHistory, i: usize, s: f64, side: Side) -> f64 {
    let mut acc = spec.nonlinearity()[i].eval(i, s, side, hist);
    for j in 0..spec.n() {
        if j != i {
            let a = spec.a(i, j);
            if !a.is_zero() {
                acc += a.eval(s) * x.eval(j, s, side);
            }
        }
    }
    acc
}

/// `J_ik(x_i(t_k))` for every instant, from the left values of `x`.
fn jump_factors(spec: &SystemSpec, x: &GridFunction, i: usize) -> Vec<f64> {
    let sched = spec.impulses();
    sched.instants().iter().enumerate().map(|(k, &t)| sched.map(k, i).j(x.eval(i, t, Side::Left))).collect()
}

fn gamma_of(spec: &SystemSpec, i: usize, b_omega: f64) -> Result<f64, ModelError> {
    let prod = b_omega * spec.d_omega(i).exp();
    if !(prod > 1.0) {
        return Err(ModelError::hypothesis(
            Hypothesis::H3,
            format!("component {}: B(omega) e^(D(omega)) = {prod:.12e} is not above 1", i + 1),
        ));
    }
    Ok(1.0 / (prod - 1.0))
}

/// One component of `Phi x` on the grid of `x`, left values only.
fn phi_component(spec: &SystemSpec, x: &GridFunction, i: usize) -> Result<Vec<f64>, ModelError> {
    let grid = x.grid();
    let t = grid.times();
    let m = t.len();
    let factors = jump_factors(spec, x, i);
    let hist = PrimitiveHistory::new(x, &spec.nonlinearity()[i], i);
    let b_omega: f64 = factors.iter().product();
    let gamma = gamma_of(spec, i, b_omega)?;
    // B_L(t_j): product over instants in [0, t_j); B_R adds the instant at t_j
    let mut b_left = vec![1.0; m + 1];
    let mut b_right = vec![1.0; m];
    let mut acc = 1.0;
    for j in 0..m {
        b_left[j] = acc;
        if let crate::grid::NodeKind::Jump(k) = grid.kind(j) {
            acc *= factors[k];
        }
        b_right[j] = acc;
    }
    b_left[m] = acc;
    let e = |s: f64| spec.d_primitive(i, s).exp();
    let panels: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|j| {
            let (a, b) = (t[j], grid.panel_end(j));
            let mid = 0.5 * (a + b);
            let wl = b_right[j] * e(a) * forcing(spec, x, &hist, i, a, Side::Right);
            let wm = b_right[j] * e(mid) * forcing(spec, x, &hist, i, mid, Side::Left);
            let wr = b_left[j + 1] * e(b) * forcing(spec, x, &hist, i, b, Side::Left);
            (wl + 4.0 * wm + wr) * (b - a) / 6.0
        })
        .collect();
    let mut cum = vec![0.0; m + 1];
    for j in 0..m {
        cum[j + 1] = cum[j] + panels[j];
    }
    let total = cum[m];
    let wrap = b_omega * spec.d_omega(i).exp();
    Ok((0..m)
        .map(|j| gamma * (-spec.d_primitive(i, t[j])).exp() / b_left[j] * (total - cum[j] + wrap * cum[j]))
        .collect())
}

/// `B~_i(s, t)`: product of `J` over instants in `[t, s)`, with the given
/// one-sided conventions at both ends.
fn b_tilde(spec: &SystemSpec, factors: &[f64], t: f64, side_t: Side, s: f64, side_s: Side) -> f64 {
    let tol = SNAP * spec.omega();
    let mut acc = 1.0;
    for (k, tk) in spec.impulses().instants_in(t - 2.0 * tol, s + 2.0 * tol) {
        if (tk - t).abs() <= tol && side_t == Side::Right {
            continue;
        }
        if (tk - s).abs() <= tol && side_s == Side::Left {
            continue;
        }
        acc *= factors[k];
    }
    acc
}

/// Direct quadrature of `(Phi_i x)(t)` (either one-sided value) over the
/// grid panels between `t` and `t + omega`.
pub fn phi_direct(spec: &SystemSpec, x: &GridFunction, i: usize, t: f64, side: Side) -> Result<f64, ModelError> {
    let grid = x.grid();
    let factors = jump_factors(spec, x, i);
    let gamma = gamma_of(spec, i, factors.iter().product())?;
    let hist = PrimitiveHistory::new(x, &spec.nonlinearity()[i], i);
    let omega = spec.omega();
    let tol = SNAP * omega;
    let mut nodes = vec![t];
    let (q, j) = grid.locate(t);
    let mut node = q * grid.len() as isize + j as isize + 1;
    loop {
        let s = grid.node_time(node);
        if s >= t + omega - tol {
            break;
        }
        if s > t + tol {
            nodes.push(s);
        }
        node += 1;
    }
    nodes.push(t + omega);
    let d = &spec.death()[i];
    let w = |s: f64, s_side: Side, x_side: Side| {
        b_tilde(spec, &factors, t, side, s, s_side) * d.integral(t, s).exp() * forcing(spec, x, &hist, i, s, x_side)
    };
    let mut acc = 0.0;
    for pair in nodes.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let mid = 0.5 * (a + b);
        let fa = w(a, Side::Right, Side::Right);
        let fm = w(mid, Side::Left, Side::Left);
        let fb = w(b, Side::Left, Side::Left);
        acc += (fa + 4.0 * fm + fb) * (b - a) / 6.0;
    }
    Ok(gamma * acc)
}

/// `Phi x` on the grid of `x`. Right values at impulse instants come from an
/// independent direct quadrature.
pub fn apply_phi(spec: &SystemSpec, x: &GridFunction) -> Result<GridFunction, ModelError> {
    let n = spec.n();
    let grid = x.grid().clone();
    let m = grid.len();
    let comps: Vec<Vec<f64>> = (0..n).into_par_iter().map(|i| phi_component(spec, x, i)).collect::<Result<_, _>>()?;
    let left: Vec<f64> = comps.concat();
    let mut right = left.clone();
    let jumps = grid.jump_nodes();
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| jumps.iter().map(move |&(j, _)| (i, j))).collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| phi_direct(spec, x, i, grid.times()[j], Side::Right))
        .collect::<Result<_, _>>()?;
    for (&(i, j), v) in cells.iter().zip(values) {
        right[i * m + j] = v;
    }
    Ok(GridFunction::from_parts(grid, n, left, right))
}

/// Largest `|y_i(t_k+) - J_ik(x_i(t_k))^{-1} y_i(t_k)| / (1 + |y_i(t_k)|)`.
pub fn jump_identity_check(spec: &SystemSpec, x: &GridFunction, y: &GridFunction) -> f64 {
    let grid = y.grid();
    let mut worst: f64 = 0.0;
    for i in 0..spec.n() {
        let factors = jump_factors(spec, x, i);
        for (j, k) in grid.jump_nodes() {
            let left = y.left(i, j);
            let expected = left / factors[k];
            worst = worst.max((y.right(i, j) - expected).abs() / (1.0 + left.abs()));
        }
    }
    worst
}

/// Default cone parameters `sigma_i = ulB_i / olB_i e^{-D_i(omega)}`.
pub fn cone_sigma(spec: &SystemSpec) -> Result<Vec<f64>, ModelError> {
    Ok(impulse_algebra::sigma(&impulse_algebra::bounds(spec)?))
}

pub fn cone_membership(x: &GridFunction, sigma: &[f64]) -> (bool, f64) {
    x.cone_membership(sigma)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    /// The iterates decay toward zero.
    Collapsed,
    /// The residual stopped improving.
    Stagnated,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub nodes: usize,
    pub initial: Option<GridFunction>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { damping: 0.5, tol: 1e-8, max_iter: 2000, nodes: DEFAULT_NODES, initial: None }
    }
}

pub const MIN_DAMPING: f64 = 1.0 / 64.0;
const STAGNATION_WINDOW: usize = 200;
const COLLAPSE_WINDOW: usize = 50;

#[derive(Clone, Debug, Serialize)]
pub struct FixedPointResult {
    #[serde(skip)]
    pub solution: GridFunction,
    pub status: SolveStatus,
    pub converged: bool,
    /// `sup |Phi x - x|`.
    pub residual: f64,
    /// `residual / sup |x|`.
    pub relative_residual: f64,
    pub iterations: usize,
    pub cone_check: bool,
    pub cone_margin: f64,
    pub positivity_floor: f64,
    pub sup_norm: f64,
    pub jump_identity: f64,
    pub final_damping: f64,
}

/// Constant initial iterate: `sqrt(r0 R0)` when envelopes are declared, else 1.
pub fn default_initial(spec: &SystemSpec, grid: Arc<Grid>) -> GridFunction {
    let level = spec.envelopes().map_or(1.0, |e| (e.r0 * e.big_r0).sqrt());
    GridFunction::constant(grid, &vec![level; spec.n()])
}

/// Damped iteration `x <- (1 - lambda) x + lambda Phi x`.
pub fn solve_fixed_point(spec: &SystemSpec, opts: &SolveOptions) -> Result<FixedPointResult, SolveError> {
    let grid = match &opts.initial {
        Some(x) => x.grid().clone(),
        None => Arc::new(Grid::for_spec(spec, opts.nodes)),
    };
    let mut x = opts.initial.clone().unwrap_or_else(|| default_initial(spec, grid.clone()));
    if x.n() != spec.n() || !x.is_finite() || x.min_value() < 0.0 {
        return Err(SolveError::BadInitial);
    }
    let sigma = cone_sigma(spec)?;
    let mut lambda = opts.damping.clamp(MIN_DAMPING, 1.0);
    let x0_norm = x.sup_norm();
    let mut best: Option<(f64, GridFunction, GridFunction)> = None;
    let mut best_iter = 0;
    let mut prev_res = f64::INFINITY;
    let mut norms: Vec<f64> = Vec::new();
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;
    for it in 0..opts.max_iter.max(1) {
        iterations = it + 1;
        let y = apply_phi(spec, &x)?;
        if !y.is_finite() {
            let comp = (0..spec.n()).find(|&i| !(y.sup(i).is_finite() && y.inf(i).is_finite())).unwrap_or(0);
            return Err(SolveError::NonFinite { iteration: iterations, component: comp + 1 });
        }
        let res = y.distance(&x);
        let norm = x.sup_norm();
        let rel = res / norm.max(f64::MIN_POSITIVE);
        if best.as_ref().is_none_or(|b| rel < b.0) {
            best = Some((rel, x.clone(), y.clone()));
            best_iter = it;
        }
        if rel <= opts.tol {
            status = SolveStatus::Converged;
            break;
        }
        norms.push(norm);
        if norm < 1e-12 {
            status = SolveStatus::Collapsed;
            break;
        }
        if norms.len() > COLLAPSE_WINDOW && norm < x0_norm / 100.0 && rel > 100.0 * opts.tol {
            let tail = &norms[norms.len() - COLLAPSE_WINDOW - 1..];
            if tail.windows(2).all(|w| w[1] < w[0]) {
                status = SolveStatus::Collapsed;
                break;
            }
        }
        if it - best_iter > STAGNATION_WINDOW {
            status = SolveStatus::Stagnated;
            break;
        }
        if res > prev_res {
            lambda = (lambda / 2.0).max(MIN_DAMPING);
        }
        prev_res = res;
        x = x.blend(&y, lambda);
    }
    let (rel, x, y) = best.expect("at least one iteration");
    let residual = y.distance(&x);
    let (cone_check, cone_margin) = x.cone_membership(&sigma);
    let floor = x.min_value();
    let converged = status == SolveStatus::Converged && cone_check && floor > 0.0;
    let jump = jump_identity_check(spec, &x, &y);
    Ok(FixedPointResult {
        sup_norm: x.sup_norm(),
        solution: x,
        status,
        converged,
        residual,
        relative_residual: rel,
        iterations,
        cone_check,
        cone_margin,
        positivity_floor: floor,
        jump_identity: jump,
        final_damping: lambda,
    })
}
