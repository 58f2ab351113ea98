//! Fixed-step RK4 method of steps with exact impulses and cubic Hermite
//! dense output.

use serde::Serialize;

use crate::error::SimError;
use crate::grid::{delay_preimages, Grid, GridFunction};
use crate::history::{History, Side};
use crate::impulse::SNAP;
use crate::periodic::simpson;
use crate::system::SystemSpec;

pub const DEFAULT_STEP: f64 = 1e-2;
/// States below this are reported as positivity violations.
pub const NEGATIVE_TOL: f64 = -1e-10;
const OVERFLOW: f64 = 1e150;
const PROBES: usize = 512;

/// State on `[-tau, 0]`.
#[derive(Clone, Debug)]
pub enum InitialHistory {
    Constant(Vec<f64>),
    /// An `omega`-periodic grid function, read on `(-inf, 0]`.
    Periodic(GridFunction),
}

impl InitialHistory {
    fn dim(&self) -> usize {
        match self {
            InitialHistory::Constant(c) => c.len(),
            InitialHistory::Periodic(x) => x.n(),
        }
    }

    fn value(&self, i: usize, t: f64, side: Side) -> f64 {
        match self {
            InitialHistory::Constant(c) => c[i],
            InitialHistory::Periodic(x) => x.eval(i, t, side),
        }
    }

    fn integrate(&self, i: usize, a: f64, b: f64, f: &dyn Fn(f64, f64) -> f64) -> f64 {
        match self {
            InitialHistory::Constant(c) => {
                let panels = (((b - a) / 0.005).ceil() as usize).clamp(2, 1_000_000);
                simpson(|s| f(s, c[i]), a, b, panels)
            }
            InitialHistory::Periodic(x) => x.integrate(i, a, b, f),
        }
    }

    fn min_value(&self) -> f64 {
        match self {
            InitialHistory::Constant(c) => c.iter().cloned().fold(f64::INFINITY, f64::min),
            InitialHistory::Periodic(x) => x.min_value(),
        }
    }
}

/// One RK4 step with Hermite data at both ends. `x0` is the value just after
/// `t0` (after any jump), `x1` the value just before `t1`.
#[derive(Clone, Debug, Serialize)]
pub struct Step {
    pub t0: f64,
    pub t1: f64,
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
}

impl Step {
    fn eval(&self, i: usize, t: f64) -> f64 {
        let h = self.t1 - self.t0;
        let s = ((t - self.t0) / h).clamp(0.0, 1.0);
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.x0[i] + h10 * h * self.f0[i] + h01 * self.x1[i] + h11 * h * self.f1[i]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ImpulseEvent {
    pub t: f64,
    /// Index of the instant within one period.
    pub k: usize,
    /// 1-based.
    pub component: usize,
    pub before: f64,
    pub jump: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    n: usize,
    omega: f64,
    history: InitialHistory,
    steps: Vec<Step>,
    events: Vec<ImpulseEvent>,
    // cum[i][l][k]: integral of the window integrand of term l of g_i over
    // [0, steps[k].t1]
    cum: Vec<Vec<Option<Vec<f64>>>>,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t_end(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.t1)
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn events(&self) -> &[ImpulseEvent] {
        &self.events
    }

    /// Index of the step containing `t`, preferring the one that ends at
    /// `t` for `Side::Left`. Times within `SNAP * omega` of a step end are
    /// treated as that end.
    fn step_at(&self, t: f64, side: Side) -> usize {
        let tol = SNAP * self.omega;
        let k = match side {
            Side::Left => self.steps.partition_point(|s| s.t1 < t - tol),
            Side::Right => self.steps.partition_point(|s| s.t1 <= t + tol),
        };
        k.min(self.steps.len() - 1)
    }

    /// `x_i(t)`, the `side` limit at impulse instants.
    pub fn value(&self, i: usize, t: f64, side: Side) -> f64 {
        if self.steps.is_empty() || t < 0.0 || (t == 0.0 && side == Side::Left) {
            return self.history.value(i, t.min(0.0), side);
        }
        self.steps[self.step_at(t, side)].eval(i, t)
    }

    pub fn state(&self, t: f64, side: Side) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i, t, side)).collect()
    }

    /// Step end points with both one-sided values at events:
    /// `(t, x(t-), x(t+))`.
    pub fn nodes(&self) -> Vec<(f64, Vec<f64>, Vec<f64>)> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        if let Some(first) = self.steps.first() {
            let before: Vec<f64> = (0..self.n).map(|i| self.history.value(i, 0.0, Side::Left)).collect();
            out.push((first.t0, before, first.x0.clone()));
        }
        for (k, s) in self.steps.iter().enumerate() {
            let after = self.steps.get(k + 1).map_or_else(|| s.x1.clone(), |next| next.x0.clone());
            out.push((s.t1, s.x1.clone(), after));
        }
        out
    }
}

/// `x'` as seen during integration: completed steps plus the step being
/// built, extrapolated from its start by the quadratic through `(t_n, x_n)`
/// with slope `f_n` and the current stage value.
struct Reader<'a> {
    traj: &'a Trajectory,
    head: Option<Head<'a>>,
}

struct Head<'a> {
    t: f64,
    x: &'a [f64],
    f: &'a [f64],
    stage_t: f64,
    stage_x: &'a [f64],
}

impl Head<'_> {
    fn eval(&self, i: usize, s: f64) -> f64 {
        let u = s - self.t;
        let w = self.stage_t - self.t;
        let lin = self.x[i] + self.f[i] * u;
        if w <= 0.0 {
            return lin;
        }
        let c = (self.stage_x[i] - self.x[i] - self.f[i] * w) / (w * w);
        lin + c * u * u
    }
}

impl Reader<'_> {
    fn last_time(&self) -> f64 {
        self.traj.t_end()
    }

    fn at(&self, i: usize, s: f64) -> f64 {
        self.value(i, s, Side::Left)
    }

    /// `int_0^u f` (negative for `u < 0`) from the step primitives.
    fn primitive(&self, i: usize, cum: &[f64], u: f64, f: &dyn Fn(f64, f64) -> f64) -> f64 {
        let traj = self.traj;
        if u <= 0.0 {
            return -traj.history.integrate(i, u, 0.0, f);
        }
        let last = self.last_time();
        if u > last {
            let base = cum.last().copied().unwrap_or(0.0);
            return base + self.panel(i, last, u, f);
        }
        let k = traj.step_at(u, Side::Left);
        let step = &traj.steps[k];
        let before = if k == 0 { 0.0 } else { cum[k - 1] };
        if u >= step.t1 {
            return cum[k];
        }
        let mid = 0.5 * (step.t0 + u);
        let fa = f(step.t0, step.x0[i]);
        let fm = f(mid, step.eval(i, mid));
        let fb = f(u, step.eval(i, u));
        before + (u - step.t0) / 6.0 * (fa + 4.0 * fm + fb)
    }

    /// Simpson over `[a, b]` beyond the completed steps.
    fn panel(&self, i: usize, a: f64, b: f64, f: &dyn Fn(f64, f64) -> f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mid = 0.5 * (a + b);
        let fa = f(a, self.value(i, a, Side::Right));
        let fm = f(mid, self.at(i, mid));
        let fb = f(b, self.at(i, b));
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
}

impl History for Reader<'_> {
    fn dim(&self) -> usize {
        self.traj.n
    }

    fn value(&self, i: usize, t: f64, side: Side) -> f64 {
        if let Some(h) = &self.head {
            if t > h.t || (t == h.t && side == Side::Right) {
                return h.eval(i, t);
            }
        }
        self.traj.value(i, t, side)
    }

    fn integrate(&self, i: usize, a: f64, b: f64, f: &dyn Fn(f64, f64) -> f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        let mut acc = 0.0;
        let mut a = a;
        if a < 0.0 {
            acc += self.traj.history.integrate(i, a, b.min(0.0), f);
            a = 0.0;
        }
        if b <= a {
            return acc;
        }
        let last = self.last_time();
        if a < last {
            let k0 = self.traj.step_at(a, Side::Right);
            for step in &self.traj.steps[k0..] {
                if step.t0 >= b {
                    break;
                }
                let (lo, hi) = (step.t0.max(a), step.t1.min(b));
                if hi > lo {
                    let mid = 0.5 * (lo + hi);
                    let x_lo = if lo == step.t0 { step.x0[i] } else { step.eval(i, lo) };
                    acc += (hi - lo) / 6.0 * (f(lo, x_lo) + 4.0 * f(mid, step.eval(i, mid)) + f(hi, step.eval(i, hi)));
                }
            }
        }
        acc + self.panel(i, a.max(last), b, f)
    }

    fn integrate_term(&self, i: usize, term: usize, a: f64, b: f64, f: &dyn Fn(f64, f64) -> f64) -> f64 {
        match self.traj.cum[i].get(term) {
            Some(Some(cum)) if b > a => self.primitive(i, cum, b, f) - self.primitive(i, cum, a, f),
            _ => self.integrate(i, a, b, f),
        }
    }
}

fn rhs(spec: &SystemSpec, hist: &dyn History, t: f64, y: &[f64], side: Side, out: &mut [f64]) {
    let n = spec.n();
    for i in 0..n {
        let mut acc = -spec.death()[i].eval(t) * y[i] + spec.nonlinearity()[i].eval(i, t, side, hist);
        for (j, &yj) in y.iter().enumerate() {
            if j != i {
                let a = spec.a(i, j);
                if !a.is_zero() {
                    acc += a.eval(t) * yj;
                }
            }
        }
        out[i] = acc;
    }
}

/// Solutions of `s - lag(s) = target` in `(target, target + max lag]`.
fn forward_images(spec: &SystemSpec, target: f64) -> Vec<f64> {
    let omega = spec.omega();
    let mut out = Vec::new();
    for g in spec.nonlinearity() {
        for lag in g.lags() {
            let (lo, hi) = (lag.min(), lag.max());
            for s in delay_preimages(lag, target, omega) {
                let first = ((target + lo - s) / omega).floor() as i64 - 1;
                let last = ((target + hi - s) / omega).ceil() as i64 + 1;
                for q in first..=last {
                    let c = s + q as f64 * omega;
                    if c > target && (c - lag.eval(c) - target).abs() <= 1e-9 * (1.0 + c.abs()) {
                        out.push(c);
                    }
                }
            }
        }
    }
    out
}

/// Step boundaries on `(0, t_end]`: impulse instants and their delay images
/// (periodic, depth 2), images of `t = 0` (depth 2) and `t_end`.
pub fn breakpoints(spec: &SystemSpec, t_end: f64) -> Vec<f64> {
    let omega = spec.omega();
    let grid = Grid::for_spec(spec, 4);
    let base: Vec<f64> =
        (0..grid.len()).filter(|&j| grid.is_break(j) || grid.is_jump(j)).map(|j| grid.times()[j]).collect();
    let mut pts = vec![t_end];
    let periods = (t_end / omega).ceil() as i64;
    for q in 0..=periods {
        for &b in &base {
            let t = b + q as f64 * omega;
            if t > 0.0 && t < t_end {
                pts.push(t);
            }
        }
    }
    let mut level = vec![0.0];
    for _ in 0..2 {
        let next: Vec<f64> = level.iter().flat_map(|&t| forward_images(spec, t)).collect();
        pts.extend(next.iter().copied().filter(|&t| t > 0.0 && t < t_end));
        level = next;
    }
    pts.sort_by(f64::total_cmp);
    let tol = SNAP * omega;
    let mut out: Vec<f64> = Vec::with_capacity(pts.len());
    for t in pts {
        match out.last_mut() {
            Some(last) if t - *last <= tol => *last = last.max(t).min(t_end),
            _ => out.push(t),
        }
    }
    if let Some(last) = out.last_mut() {
        *last = t_end;
    }
    out
}

fn check_state(t: f64, x: &[f64]) -> Result<(), SimError> {
    for (i, &v) in x.iter().enumerate() {
        if !v.is_finite() || v.abs() > OVERFLOW {
            return Err(SimError::NonFinite { t, component: i + 1 });
        }
        if v < NEGATIVE_TOL {
            return Err(SimError::Positivity { t, component: i + 1, value: v });
        }
    }
    Ok(())
}

/// Integrates the system on `[0, t_end]` with steps of at most `max_step`
/// that land on every impulse instant and propagated breakpoint.
pub fn integrate(spec: &SystemSpec, history: InitialHistory, t_end: f64, max_step: f64) -> Result<Trajectory, SimError> {
    let n = spec.n();
    if history.dim() != n {
        return Err(SimError::Invalid(format!("history has {} components, system has {n}", history.dim())));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(SimError::Invalid(format!("t_end must be positive, got {t_end}")));
    }
    if !(max_step > 0.0 && max_step.is_finite()) {
        return Err(SimError::Invalid(format!("step must be positive, got {max_step}")));
    }
    if !(history.min_value() >= 0.0) {
        return Err(SimError::Invalid("initial history must be nonnegative".into()));
    }
    let mut x: Vec<f64> = (0..n).map(|i| history.value(i, 0.0, Side::Left)).collect();
    let cum = spec
        .nonlinearity()
        .iter()
        .map(|g| (0..g.terms().len()).map(|l| g.window_integrand(l).map(|_| Vec::new())).collect())
        .collect();
    let mut traj = Trajectory { n, omega: spec.omega(), history, steps: Vec::new(), events: Vec::new(), cum };
    let sched = spec.impulses();
    let tol = SNAP * spec.omega();
    let apply_events = |traj: &mut Trajectory, t: f64, x: &mut [f64]| {
        for (k, _) in sched.instants_in(t, t + 2.0 * tol) {
            for (i, xi) in x.iter_mut().enumerate() {
                let map = sched.map(k, i);
                if map.is_none() {
                    continue;
                }
                let jump = map.apply(*xi);
                traj.events.push(ImpulseEvent { t, k, component: i + 1, before: *xi, jump });
                *xi += jump;
            }
        }
    };
    apply_events(&mut traj, 0.0, &mut x);
    check_state(0.0, &x)?;

    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut stage = vec![0.0; n];
    let mut t_prev = 0.0;
    let mut carried: Option<Vec<f64>> = None;
    for seg_end in breakpoints(spec, t_end) {
        let len = seg_end - t_prev;
        let count = ((len / max_step).ceil() as usize).max(1);
        let h = len / count as f64;
        for s in 0..count {
            let t0 = t_prev + s as f64 * h;
            let t1 = if s + 1 == count { seg_end } else { t_prev + (s + 1) as f64 * h };
            let h = t1 - t0;
            match carried.take() {
                Some(f) => k[0] = f,
                None => rhs(spec, &Reader { traj: &traj, head: None }, t0, &x, Side::Right, &mut k[0]),
            }
            let f0 = k[0].clone();
            for (idx, (c, side)) in [(0.5, Side::Left), (0.5, Side::Left), (1.0, Side::Left)].into_iter().enumerate() {
                for i in 0..n {
                    stage[i] = x[i] + c * h * k[idx][i];
                }
                let ts = t0 + c * h;
                let reader = Reader {
                    traj: &traj,
                    head: Some(Head { t: t0, x: &x, f: &f0, stage_t: ts, stage_x: &stage }),
                };
                let mut out = vec![0.0; n];
                rhs(spec, &reader, ts, &stage, side, &mut out);
                k[idx + 1] = out;
            }
            let x1: Vec<f64> = (0..n).map(|i| x[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i])).collect();
            check_state(t1, &x1)?;
            let mut f1 = vec![0.0; n];
            {
                let reader = Reader { traj: &traj, head: Some(Head { t: t0, x: &x, f: &f0, stage_t: t1, stage_x: &x1 }) };
                rhs(spec, &reader, t1, &x1, Side::Left, &mut f1);
            }
            let step = Step { t0, t1, x0: x.clone(), x1: x1.clone(), f0, f1: f1.clone() };
            push_step(spec, &mut traj, step);
            x = x1;
            if s + 1 < count {
                carried = Some(f1);
            }
        }
        t_prev = seg_end;
        if seg_end < t_end {
            apply_events(&mut traj, seg_end, &mut x);
            check_state(seg_end, &x)?;
        }
    }
    Ok(traj)
}

fn push_step(spec: &SystemSpec, traj: &mut Trajectory, step: Step) {
    let mid = 0.5 * (step.t0 + step.t1);
    let h = step.t1 - step.t0;
    for (i, g) in spec.nonlinearity().iter().enumerate() {
        for l in 0..g.terms().len() {
            let Some(f) = g.window_integrand(l) else { continue };
            let cum = traj.cum[i][l].as_mut().expect("allocated for distributed terms");
            let prev = cum.last().copied().unwrap_or(0.0);
            let v = h / 6.0 * (f(step.t0, step.x0[i]) + 4.0 * f(mid, step.eval(i, mid)) + f(step.t1, step.x1[i]));
            cum.push(prev + v);
        }
    }
    traj.steps.push(step);
}

/// Sup over probes `t` in `[t_probe, t_probe + omega]` of `|x(t + omega) - x(t)|`.
/// The probe window is moved back if it would run past the end.
pub fn periodicity_residual(traj: &Trajectory, omega: f64, t_probe: f64) -> f64 {
    let start = t_probe.min(traj.t_end() - 2.0 * omega).max(0.0);
    let mut worst: f64 = 0.0;
    for p in 0..=PROBES {
        let t = start + omega * p as f64 / PROBES as f64;
        for i in 0..traj.n {
            let d = (traj.value(i, t + omega, Side::Left) - traj.value(i, t, Side::Left)).abs();
            worst = worst.max(d);
        }
    }
    worst
}

/// Per-component minimum over `[t_end - window, t_end]`.
pub fn long_run_floor(traj: &Trajectory, window: f64) -> Vec<f64> {
    let from = traj.t_end() - window;
    let mut floor = vec![f64::INFINITY; traj.n];
    for step in traj.steps.iter().filter(|s| s.t1 >= from) {
        let mid = 0.5 * (step.t0 + step.t1);
        for (i, m) in floor.iter_mut().enumerate() {
            let mut v = step.x1[i].min(step.eval(i, mid));
            if step.t0 >= from {
                v = v.min(step.x0[i]);
            }
            *m = m.min(v);
        }
    }
    floor
}

/// `sup |x(t) - reference(t)|` over probes in `[0, t_to]`.
pub fn deviation_from(traj: &Trajectory, reference: &GridFunction, t_to: f64) -> f64 {
    let count = ((t_to / traj.omega).ceil() as usize * PROBES).max(PROBES);
    let mut worst: f64 = 0.0;
    for p in 0..=count {
        let t = t_to * p as f64 / count as f64;
        for i in 0..traj.n {
            worst = worst.max((traj.value(i, t, Side::Left) - reference.eval(i, t, Side::Left)).abs());
        }
    }
    worst
}
