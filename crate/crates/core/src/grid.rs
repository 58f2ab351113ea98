//! Breakpoint-aligned grids on one period and sampled periodic vector functions.

use std::sync::Arc;

use crate::history::{History, Side};
use crate::impulse::SNAP;
use crate::nonlinearity::Nonlinearity;
use crate::periodic::PeriodicFn;
use crate::system::SystemSpec;

pub const DEFAULT_NODES: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Regular,
    /// Impulse instant with index `k` in the schedule.
    Jump(usize),
    /// Image of an impulse instant under a delay map; the sampled functions
    /// are continuous here but not smooth.
    Kink,
}

/// Nodes in `[0, omega)`; node `m` is identified with node 0 shifted by `omega`.
#[derive(Clone, Debug)]
pub struct Grid {
    omega: f64,
    t: Vec<f64>,
    kind: Vec<NodeKind>,
}

impl Grid {
    pub fn uniform(omega: f64, nodes: usize) -> Self {
        let nodes = nodes.max(4);
        let h = omega / nodes as f64;
        Grid {
            omega,
            t: (0..nodes).map(|j| j as f64 * h).collect(),
            kind: vec![NodeKind::Regular; nodes],
        }
    }

    /// Uniform grid merged with impulse instants and their delay images (depth 2).
    pub fn for_spec(spec: &SystemSpec, nodes: usize) -> Self {
        let omega = spec.omega();
        let nodes = nodes.max(4);
        let h = omega / nodes as f64;
        let mut breaks: Vec<(f64, NodeKind)> =
            spec.impulses().instants().iter().enumerate().map(|(k, &t)| (t, NodeKind::Jump(k))).collect();
        if !breaks.is_empty() {
            let lags: Vec<&PeriodicFn> = spec.nonlinearity().iter().flat_map(|g| g.lags()).collect();
            let mut targets: Vec<f64> = breaks.iter().map(|b| b.0).collect();
            for _depth in 0..2 {
                let mut next = Vec::new();
                for lag in &lags {
                    for &target in &targets {
                        for s in delay_preimages(lag, target, omega) {
                            next.push(s);
                        }
                    }
                }
                breaks.extend(next.iter().map(|&s| (s, NodeKind::Kink)));
                targets = next;
            }
        }
        for b in &mut breaks {
            b.0 = b.0.rem_euclid(omega);
            if omega - b.0 <= SNAP * omega {
                b.0 = 0.0;
            }
        }
        // jumps first so that they win deduplication
        breaks.sort_by(|a, b| {
            let pa = matches!(a.1, NodeKind::Jump(_));
            let pb = matches!(b.1, NodeKind::Jump(_));
            pb.cmp(&pa).then(a.0.total_cmp(&b.0))
        });
        let mut kept: Vec<(f64, NodeKind)> = Vec::new();
        for b in breaks {
            let close = |x: f64, y: f64| {
                let d = (x - y).abs();
                d <= SNAP * omega || omega - d <= SNAP * omega
            };
            if !kept.iter().any(|k| close(k.0, b.0)) {
                kept.push(b);
            }
        }
        let mut all = kept.clone();
        for j in 0..nodes {
            let t = j as f64 * h;
            let near = kept.iter().any(|k| {
                let d = (k.0 - t).abs();
                d < 0.25 * h || omega - d < 0.25 * h
            });
            if !near {
                all.push((t, NodeKind::Regular));
            }
        }
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        // node 0 must exist; if a break sits near 0 it has been snapped there
        if all[0].0 != 0.0 {
            all.insert(0, (0.0, NodeKind::Regular));
        }
        Grid { omega, t: all.iter().map(|a| a.0).collect(), kind: all.iter().map(|a| a.1).collect() }
    }

    /// Same breakpoints with `factor` times as many uniform nodes.
    pub fn refined(spec: &SystemSpec, nodes: usize, factor: usize) -> Self {
        Grid::for_spec(spec, nodes * factor.max(1))
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn kind(&self, j: usize) -> NodeKind {
        self.kind[j]
    }

    pub fn is_break(&self, j: usize) -> bool {
        self.kind[j.rem_euclid(self.len())] != NodeKind::Regular
    }

    pub fn is_jump(&self, j: usize) -> bool {
        matches!(self.kind[j % self.len()], NodeKind::Jump(_))
    }

    /// Nodes that carry a jump, with their schedule index.
    pub fn jump_nodes(&self) -> Vec<(usize, usize)> {
        self.kind
            .iter()
            .enumerate()
            .filter_map(|(j, k)| if let NodeKind::Jump(k) = k { Some((j, *k)) } else { None })
            .collect()
    }

    /// Time of global node `j` (any integer) of the periodic extension.
    pub fn node_time(&self, j: isize) -> f64 {
        let m = self.len() as isize;
        let q = j.div_euclid(m);
        self.t[j.rem_euclid(m) as usize] + q as f64 * self.omega
    }

    /// Right end of panel `j`: `t[j+1]`, or `omega` for the last panel.
    pub fn panel_end(&self, j: usize) -> f64 {
        if j + 1 < self.len() {
            self.t[j + 1]
        } else {
            self.omega
        }
    }

    /// Global node index if `t` coincides with a node.
    pub fn snap(&self, t: f64) -> Option<isize> {
        let (q, j) = self.locate(t);
        let m = self.len() as isize;
        let base = q * m;
        let tol = SNAP * self.omega;
        let tj = self.node_time(base + j as isize);
        if (t - tj).abs() <= tol {
            return Some(base + j as isize);
        }
        let tn = self.node_time(base + j as isize + 1);
        if (tn - t).abs() <= tol {
            return Some(base + j as isize + 1);
        }
        None
    }

    /// `(q, j)` such that `node_time(q m + j) <= t < node_time(q m + j + 1)`.
    pub fn locate(&self, t: f64) -> (isize, usize) {
        let q = (t / self.omega).floor();
        let mut r = t - q * self.omega;
        let mut q = q as isize;
        if r >= self.omega {
            r -= self.omega;
            q += 1;
        }
        let j = self.t.partition_point(|&x| x <= r).saturating_sub(1);
        (q, j)
    }

    /// Process all periods' worth of weights for composite Simpson: panel
    /// `j` spans `[t_j, t_{j+1}]`.
    pub fn panel_width(&self, j: usize) -> f64 {
        self.panel_end(j) - self.t[j]
    }
}

/// Solutions `s` in `[0, omega)` of `s - lag(s) = target (mod omega)`.
pub fn delay_preimages(lag: &PeriodicFn, target: f64, omega: f64) -> Vec<f64> {
    if lag.is_constant() {
        return vec![(target + lag.eval(0.0)).rem_euclid(omega)];
    }
    const SAMPLES: usize = 2048;
    let u = |s: f64| s - lag.eval(s);
    let h = omega / SAMPLES as f64;
    let vals: Vec<f64> = (0..=SAMPLES).map(|k| u(k as f64 * h)).collect();
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let m_lo = ((lo - target) / omega).floor() as i64;
    let m_hi = ((hi - target) / omega).ceil() as i64;
    let mut out = Vec::new();
    for m in m_lo..=m_hi {
        let c = target + m as f64 * omega;
        for k in 0..SAMPLES {
            let (fa, fb) = (vals[k] - c, vals[k + 1] - c);
            if fa == 0.0 {
                out.push(k as f64 * h);
            } else if fa * fb < 0.0 {
                let (mut a, mut b) = (k as f64 * h, (k + 1) as f64 * h);
                let mut fa = fa;
                for _ in 0..80 {
                    let mid = 0.5 * (a + b);
                    let fm = u(mid) - c;
                    if fm == 0.0 {
                        a = mid;
                        b = mid;
                        break;
                    }
                    if (fm < 0.0) == (fa < 0.0) {
                        a = mid;
                        fa = fm;
                    } else {
                        b = mid;
                    }
                }
                out.push(0.5 * (a + b));
            }
        }
    }
    out.iter().map(|s| s.rem_euclid(omega)).collect()
}

/// A sampled `omega`-periodic vector function with left and right values at
/// every node (distinct only at jump nodes).
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Arc<Grid>,
    n: usize,
    left: Vec<f64>,
    right: Vec<f64>,
}

/// Slack used by cone membership checks.
pub const CONE_SLACK: f64 = 1e-12;

impl GridFunction {
    pub fn constant(grid: Arc<Grid>, values: &[f64]) -> Self {
        let m = grid.len();
        let data: Vec<f64> = values.iter().flat_map(|&v| std::iter::repeat(v).take(m)).collect();
        GridFunction { grid, n: values.len(), left: data.clone(), right: data }
    }

    /// Samples `f(i, t, side)` at every node.
    pub fn from_fn(grid: Arc<Grid>, n: usize, f: impl Fn(usize, f64, Side) -> f64) -> Self {
        let m = grid.len();
        let mut left = vec![0.0; n * m];
        let mut right = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                let t = grid.t[j];
                left[i * m + j] = f(i, t, Side::Left);
                right[i * m + j] = if grid.is_jump(j) { f(i, t, Side::Right) } else { left[i * m + j] };
            }
        }
        GridFunction { grid, n, left, right }
    }

    pub fn from_parts(grid: Arc<Grid>, n: usize, left: Vec<f64>, right: Vec<f64>) -> Self {
        assert_eq!(left.len(), n * grid.len());
        assert_eq!(right.len(), n * grid.len());
        GridFunction { grid, n, left, right }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn left(&self, i: usize, j: usize) -> f64 {
        self.left[i * self.grid.len() + j]
    }

    pub fn right(&self, i: usize, j: usize) -> f64 {
        self.right[i * self.grid.len() + j]
    }

    pub fn left_values(&self) -> &[f64] {
        &self.left
    }

    pub fn right_values(&self) -> &[f64] {
        &self.right
    }

    fn node_value(&self, i: usize, j: isize, side: Side) -> f64 {
        let m = self.grid.len() as isize;
        let jj = (i as isize) * m + j.rem_euclid(m);
        match side {
            Side::Left => self.left[jj as usize],
            Side::Right => self.right[jj as usize],
        }
    }

    /// Sup of component `i` over both one-sided values.
    pub fn sup(&self, i: usize) -> f64 {
        let m = self.grid.len();
        self.left[i * m..(i + 1) * m]
            .iter()
            .chain(self.right[i * m..(i + 1) * m].iter())
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self, i: usize) -> f64 {
        let m = self.grid.len();
        self.left[i * m..(i + 1) * m]
            .iter()
            .chain(self.right[i * m..(i + 1) * m].iter())
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.left.iter().chain(self.right.iter()).fold(0.0, |a, &b| a.max(b.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.left.iter().chain(self.right.iter()).all(|v| v.is_finite())
    }

    pub fn min_value(&self) -> f64 {
        (0..self.n).map(|i| self.inf(i)).fold(f64::INFINITY, f64::min)
    }

    /// `sup |self - other|` over both sides; grids must coincide.
    pub fn distance(&self, other: &GridFunction) -> f64 {
        self.left
            .iter()
            .zip(&other.left)
            .chain(self.right.iter().zip(&other.right))
            .fold(0.0, |a, (x, y)| a.max((x - y).abs()))
    }

    /// `(1 - lambda) self + lambda other`.
    pub fn blend(&self, other: &GridFunction, lambda: f64) -> GridFunction {
        let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (1.0 - lambda) * x + lambda * y).collect();
        GridFunction { grid: self.grid.clone(), n: self.n, left: mix(&self.left, &other.left), right: mix(&self.right, &other.right) }
    }

    pub fn map(&self, f: impl Fn(usize, f64) -> f64) -> GridFunction {
        let m = self.grid.len();
        let apply = |v: &[f64]| v.iter().enumerate().map(|(k, &x)| f(k / m, x)).collect();
        GridFunction { grid: self.grid.clone(), n: self.n, left: apply(&self.left), right: apply(&self.right) }
    }

    /// Cone test `x_i(t) >= sigma_i sup x_i - CONE_SLACK` on all node values.
    /// Returns membership and the worst margin `min (x_i - sigma_i sup x_i)`.
    pub fn cone_membership(&self, sigma: &[f64]) -> (bool, f64) {
        let mut worst = f64::INFINITY;
        for i in 0..self.n {
            let floor = sigma[i] * self.sup(i);
            worst = worst.min(self.inf(i) - floor);
        }
        (worst >= -CONE_SLACK, worst)
    }

    /// Stencil of up to four nodes around panel `[j, j+1]` (global indices)
    /// that does not cross a break.
    fn stencil(&self, j: isize) -> ([isize; 4], usize) {
        let g = &*self.grid;
        let m = g.len() as isize;
        let brk = |k: isize| g.is_break(k.rem_euclid(m) as usize);
        let mut lo = j;
        let mut hi = j + 1;
        let mut toggle = true;
        while hi - lo < 3 {
            let can_left = !brk(lo) && hi - lo + 1 < m;
            let can_right = !brk(hi) && hi - lo + 1 < m;
            if toggle && can_left {
                lo -= 1;
            } else if can_right {
                hi += 1;
            } else if can_left {
                lo -= 1;
            } else {
                break;
            }
            toggle = !toggle;
        }
        let mut idx = [0isize; 4];
        let len = (hi - lo + 1) as usize;
        for (k, slot) in idx.iter_mut().enumerate().take(len) {
            *slot = lo + k as isize;
        }
        (idx, len)
    }

    /// Value of component `i` at `t` with one-sided limits at nodes.
    pub fn eval(&self, i: usize, t: f64, side: Side) -> f64 {
        let g = &*self.grid;
        if let Some(j) = g.snap(t) {
            return self.node_value(i, j, side);
        }
        let (q, j) = g.locate(t);
        let j = q * g.len() as isize + j as isize;
        let (idx, len) = self.stencil(j);
        let (lo, hi) = (idx[0], idx[len - 1]);
        let mut xs = [0.0; 4];
        let mut ys = [0.0; 4];
        let mut all_nonneg = true;
        for k in 0..len {
            let node = idx[k];
            xs[k] = g.node_time(node);
            // the panel's own ends use the one-sided value facing into it
            let s = if node == lo && g.is_jump(node.rem_euclid(g.len() as isize) as usize) {
                Side::Right
            } else if node == hi {
                Side::Left
            } else {
                Side::Right
            };
            ys[k] = self.node_value(i, node, s);
            all_nonneg &= ys[k] >= 0.0;
        }
        let mut acc = 0.0;
        for a in 0..len {
            let mut w = 1.0;
            for b in 0..len {
                if a != b {
                    w *= (t - xs[b]) / (xs[a] - xs[b]);
                }
            }
            acc += w * ys[a];
        }
        if all_nonneg {
            acc.max(0.0)
        } else {
            acc
        }
    }

    /// Component `i` at every node, left values.
    pub fn component_left(&self, i: usize) -> &[f64] {
        let m = self.grid.len();
        &self.left[i * m..(i + 1) * m]
    }

    pub fn component_right(&self, i: usize) -> &[f64] {
        let m = self.grid.len();
        &self.right[i * m..(i + 1) * m]
    }
}

impl History for GridFunction {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, i: usize, t: f64, side: Side) -> f64 {
        self.eval(i, t, side)
    }

    fn integrate(&self, i: usize, a: f64, b: f64, f: &dyn Fn(f64, f64) -> f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        let g = &*self.grid;
        let m = g.len() as isize;
        let tol = SNAP * g.omega;
        let (q, j) = g.locate(a);
        let mut node = q * m + j as isize + 1;
        let mut left = a;
        let mut acc = 0.0;
        loop {
            let mut right = g.node_time(node);
            if right - left <= tol {
                node += 1;
                continue;
            }
            let last = right >= b - tol;
            if last {
                right = b;
            }
            let mid = 0.5 * (left + right);
            let fl = f(left, self.eval(i, left, Side::Right));
            let fm = f(mid, self.eval(i, mid, Side::Left));
            let fr = f(right, self.eval(i, right, Side::Left));
            acc += (right - left) / 6.0 * (fl + 4.0 * fm + fr);
            if last {
                break;
            }
            left = right;
            node += 1;
        }
        acc
    }
}

/// Component `i` of a grid function together with cumulative primitives of
/// the window integrands of `g`, so a window integral costs two partial
/// panels instead of a pass over the window.
pub struct PrimitiveHistory<'a> {
    x: &'a GridFunction,
    i: usize,
    // cum[l][j] = int_0^{t_j} f_l, cum[l][m] the period total
    cum: Vec<Option<Vec<f64>>>,
}

impl<'a> PrimitiveHistory<'a> {
    pub fn new(x: &'a GridFunction, g: &Nonlinearity, i: usize) -> Self {
        let grid = &*x.grid;
        let m = grid.len();
        let cum = (0..g.terms().len())
            .map(|l| {
                g.window_integrand(l).map(|f| {
                    let mut c = Vec::with_capacity(m + 1);
                    let mut acc = 0.0;
                    c.push(0.0);
                    for j in 0..m {
                        let (a, b) = (grid.t[j], grid.panel_end(j));
                        let mid = 0.5 * (a + b);
                        let fa = f(a, x.right(i, j));
                        let fm = f(mid, x.eval(i, mid, Side::Left));
                        let fb = f(b, x.eval(i, b, Side::Left));
                        acc += (b - a) / 6.0 * (fa + 4.0 * fm + fb);
                        c.push(acc);
                    }
                    c
                })
            })
            .collect();
        PrimitiveHistory { x, i, cum }
    }

    fn primitive(&self, cum: &[f64], u: f64, f: &dyn Fn(f64, f64) -> f64) -> f64 {
        let grid = &*self.x.grid;
        let m = grid.len();
        let tol = SNAP * grid.omega;
        let (q, j) = grid.locate(u);
        let base = q as f64 * cum[m];
        let tj = grid.node_time(q * m as isize + j as isize);
        let tn = grid.node_time(q * m as isize + j as isize + 1);
        if u - tj <= tol {
            return base + cum[j];
        }
        if tn - u <= tol {
            return base + cum[j + 1];
        }
        let i = self.i;
        let mid = 0.5 * (tj + u);
        let fa = f(tj, self.x.right(i, j));
        let fm = f(mid, self.x.eval(i, mid, Side::Left));
        let fb = f(u, self.x.eval(i, u, Side::Left));
        base + cum[j] + (u - tj) / 6.0 * (fa + 4.0 * fm + fb)
    }
}

impl History for PrimitiveHistory<'_> {
    fn dim(&self) -> usize {
        self.x.n
    }

    fn value(&self, i: usize, t: f64, side: Side) -> f64 {
        self.x.eval(i, t, side)
    }

    fn integrate(&self, i: usize, a: f64, b: f64, f: &dyn Fn(f64, f64) -> f64) -> f64 {
        self.x.integrate(i, a, b, f)
    }

    fn integrate_term(&self, i: usize, term: usize, a: f64, b: f64, f: &dyn Fn(f64, f64) -> f64) -> f64 {
        match self.cum.get(term) {
            Some(Some(cum)) if i == self.i && b > a => self.primitive(cum, b, f) - self.primitive(cum, a, f),
            _ => self.x.integrate(i, a, b, f),
        }
    }
}
