//! Command-line front end. `run` returns the exit status so that tests can
//! drive it in-process.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{load_system_file, save_system};
use crate::criteria::{certify, CertifyOptions, CriterionReport, TheoremId};
use crate::error::{CriteriaError, ModelError, SimError, SolveError};
use crate::grid::{GridFunction, DEFAULT_NODES};
use crate::history::Side;
use crate::impulse_algebra;
use crate::nonlinearity::NonlinearityKind;
use crate::phi::{solve_fixed_point, FixedPointResult, SolveOptions};
use crate::simulator::{self, InitialHistory, Trajectory, DEFAULT_STEP};
use crate::system::SystemSpec;
use crate::zoo;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Sup deviation allowed between a fixed point and the simulation started
/// from it, over three periods.
pub const CROSS_CHECK_TOL: f64 = 1e-4;

#[derive(Parser, Debug)]
#[command(name = "impdde", version, about = "Positive periodic solutions of impulsive periodic delay systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// System: a TOML path or `zoo:ID`.
    #[arg(value_name = "SPEC")]
    pub spec: Option<String>,
    /// Same as the positional SPEC.
    #[arg(long, value_name = "PATH|zoo:ID")]
    pub config: Option<String>,
    /// Impulse sizes for `zoo:planar_autonomous` (one value or one per component).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub eta: Option<Vec<f64>>,
    /// Period for `zoo:planar_autonomous`.
    #[arg(long)]
    pub omega: Option<f64>,
    /// Uniform nodes per period of the evaluation grid.
    #[arg(long, default_value_t = DEFAULT_NODES)]
    pub grid: usize,
    /// Print the run report as JSON on stdout.
    #[arg(long)]
    #[serde(skip)]
    pub json: bool,
    /// Directory for report.json and CSV output.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Write CSV data for plotting (into --out, or the current directory).
    #[arg(long)]
    #[serde(skip)]
    pub emit_plot_data: bool,
    /// Include wall time in the report (makes the JSON run-dependent).
    #[arg(long)]
    #[serde(skip)]
    pub timing: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CertifyArgs {
    #[arg(long)]
    pub theorem: String,
    /// Scaling vector, e.g. "1,0.5".
    #[arg(long, value_delimiter = ',')]
    pub v: Option<Vec<f64>>,
    #[arg(long)]
    pub search_v: bool,
    /// Use the derived envelope family with this epsilon.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SolveArgs {
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0.5)]
    pub damping: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SimulateArgs {
    /// End time; defaults to 20 periods.
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    /// `constant:X` (one value or comma list) or `fixed-point`.
    #[arg(long, default_value = "constant:1")]
    pub history: String,
    /// Window for the long-run floor; defaults to one period.
    #[arg(long)]
    pub window: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse a system and check the standing hypotheses.
    Validate(Common),
    /// Impulse-algebra bounds per component.
    Bounds(Common),
    /// Evaluate one existence criterion.
    Certify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: CertifyArgs,
    },
    /// Compute a positive periodic solution by damped fixed-point iteration.
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: SolveArgs,
    },
    /// Integrate the system forward from a history.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: SimulateArgs,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Bounds, best criterion, fixed point and simulation cross-check.
    #[command(alias = "pipeline")]
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Built-in examples.
    Zoo {
        #[command(subcommand)]
        action: ZooAction,
    },
}

#[derive(Subcommand, Debug)]
pub enum ZooAction {
    List {
        #[arg(long)]
        json: bool,
    },
    /// Print (or write into --out) the TOML of an entry.
    Emit {
        id: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        eta: Option<Vec<f64>>,
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub spec_name: Option<String>,
    /// sha256 of the canonical TOML of the system.
    pub spec_digest: String,
    pub subcommand: &'static str,
    pub inputs: Value,
    pub outputs: Value,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

/// A failure that ends the run, with its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub stage: &'static str,
    pub tag: Option<String>,
    pub message: String,
}

impl Failure {
    fn input(stage: &'static str, message: impl Into<String>) -> Self {
        Failure { code: EXIT_INPUT, stage, tag: None, message: message.into() }
    }

    fn model(stage: &'static str, e: &ModelError) -> Self {
        Failure { code: EXIT_INPUT, stage, tag: e.tag().map(|h| h.tag().to_string()), message: e.to_string() }
    }

    fn criteria(stage: &'static str, e: &CriteriaError) -> Self {
        match e {
            CriteriaError::Model(m) => Failure::model(stage, m),
            CriteriaError::Precondition { .. } => Failure { code: EXIT_FAIL, stage, tag: None, message: e.to_string() },
            _ => Failure::input(stage, e.to_string()),
        }
    }

    fn solve(stage: &'static str, e: &SolveError) -> Self {
        match e {
            SolveError::Model(m) => Failure::model(stage, m),
            SolveError::NonFinite { .. } => Failure { code: EXIT_FAIL, stage, tag: None, message: e.to_string() },
            SolveError::BadInitial => Failure::input(stage, e.to_string()),
        }
    }

    fn sim(stage: &'static str, e: &SimError) -> Self {
        match e {
            SimError::Invalid(_) => Failure::input(stage, e.to_string()),
            _ => Failure { code: EXIT_FAIL, stage, tag: None, message: e.to_string() },
        }
    }

    fn to_json(&self) -> Value {
        json!({ "error": self.message, "stage": self.stage, "tag": self.tag, "exit_code": self.code })
    }
}

/// Where command output goes: `stdout` text and files.
#[derive(Default)]
pub struct Output {
    pub stdout: String,
    pub stderr: String,
}

pub fn spec_digest(spec: &SystemSpec) -> String {
    hex::encode(Sha256::digest(save_system(spec).as_bytes()))
}

/// Resolves `path` or `zoo:ID`, applying `--eta`/`--omega` for the planar entry.
pub fn resolve_spec(source: &str, eta: Option<&[f64]>, omega: Option<f64>) -> Result<(SystemSpec, Option<String>), Failure> {
    if let Some(id) = source.strip_prefix("zoo:") {
        return zoo_spec(id, eta, omega).map(|(s, name)| (s, Some(name)));
    }
    if eta.is_some() || omega.is_some() {
        return Err(Failure::input("load", "--eta and --omega apply to zoo:planar_autonomous only"));
    }
    let spec = load_system_file(Path::new(source)).map_err(|e| Failure::model("load", &e))?;
    let name = (!spec.name.is_empty()).then(|| spec.name.clone());
    Ok((spec, name))
}

fn zoo_spec(id: &str, eta: Option<&[f64]>, omega: Option<f64>) -> Result<(SystemSpec, String), Failure> {
    if id == "planar_autonomous" && (eta.is_some() || omega.is_some()) {
        let omega = omega.unwrap_or_else(zoo::planar_default_omega);
        let eta = match eta {
            None => [zoo::PLANAR_DEFAULT_ETA; 2],
            Some([e]) => [*e, *e],
            Some([a, b]) => [*a, *b],
            Some(other) => return Err(Failure::input("load", format!("--eta takes 1 or 2 values, got {}", other.len()))),
        };
        let entry = zoo::planar_autonomous(omega, eta).map_err(|e| Failure::model("load", &e))?;
        return Ok((entry.spec, id.to_string()));
    }
    if eta.is_some() || omega.is_some() {
        return Err(Failure::input("load", "--eta and --omega apply to zoo:planar_autonomous only"));
    }
    let entry = zoo::entry(id).ok_or_else(|| Failure::input("load", format!("unknown zoo entry `{id}`; try `zoo list`")))?;
    Ok((entry.spec, id.to_string()))
}

fn load(common: &Common) -> Result<(SystemSpec, Option<String>), Failure> {
    let source = match (&common.spec, &common.config) {
        (Some(_), Some(_)) => return Err(Failure::input("load", "give the system either positionally or with --config")),
        (Some(s), None) | (None, Some(s)) => s,
        (None, None) => return Err(Failure::input("load", "no system given (PATH or zoo:ID)")),
    };
    resolve_spec(source, common.eta.as_deref(), common.omega)
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `t,node,x_1..x_n,x_1_plus..x_n_plus`.
pub fn solution_csv(x: &GridFunction) -> String {
    let grid = x.grid();
    let n = x.n();
    let mut s = String::from("t,node");
    for i in 1..=n {
        let _ = write!(s, ",x_{i}");
    }
    for i in 1..=n {
        let _ = write!(s, ",x_{i}_plus");
    }
    s.push('\n');
    for (j, &t) in grid.times().iter().enumerate() {
        let node = if grid.is_jump(j) {
            "jump"
        } else if grid.is_break(j) {
            "kink"
        } else {
            "regular"
        };
        s.push_str(&fmt_num(t));
        s.push(',');
        s.push_str(node);
        for i in 0..n {
            s.push(',');
            s.push_str(&fmt_num(x.left(i, j)));
        }
        for i in 0..n {
            s.push(',');
            s.push_str(&fmt_num(x.right(i, j)));
        }
        s.push('\n');
    }
    s
}

/// `t,x_1..x_n` at every step end; impulse instants get a second row with
/// the post-jump state.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.n();
    let mut s = String::from("t");
    for i in 1..=n {
        let _ = write!(s, ",x_{i}");
    }
    s.push('\n');
    let row = |s: &mut String, t: f64, x: &[f64]| {
        s.push_str(&fmt_num(t));
        for v in x {
            s.push(',');
            s.push_str(&fmt_num(*v));
        }
        s.push('\n');
    };
    for (t, before, after) in traj.nodes() {
        row(&mut s, t, &before);
        if after != before {
            row(&mut s, t, &after);
        }
    }
    s
}

/// `t,k,component,before,jump,after`.
pub fn events_csv(traj: &Trajectory) -> String {
    let mut s = String::from("t,k,component,before,jump,after\n");
    for e in traj.events() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt_num(e.t),
            e.k,
            e.component,
            fmt_num(e.before),
            fmt_num(e.jump),
            fmt_num(e.before + e.jump)
        );
    }
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `branch,label,component,lhs,relation,rhs,t,margin,pass`, one row per condition.
pub fn margins_csv(r: &CriterionReport) -> String {
    let mut s = String::from("branch,label,component,lhs,relation,rhs,t,margin,pass\n");
    for b in &r.branches {
        for c in &b.conditions {
            let rel = serde_json::to_value(c.relation).expect("relation serializes");
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                csv_field(&b.name),
                csv_field(&c.label),
                c.component,
                fmt_num(c.lhs),
                rel.as_str().unwrap_or_default(),
                fmt_num(c.rhs),
                c.t.map(fmt_num).unwrap_or_default(),
                fmt_num(c.margin),
                c.pass
            );
        }
    }
    s
}

/// `component,b_lower,b_upper,gamma_lower,gamma_upper,d_omega,sigma,m1,m2,n1,n2`.
pub fn bounds_csv(b: &[impulse_algebra::ImpulseBounds]) -> String {
    let mut s = String::from("component,b_lower,b_upper,gamma_lower,gamma_upper,d_omega,sigma,m1,m2,n1,n2\n");
    for (i, c) in b.iter().enumerate() {
        let vals = [c.b_lower, c.b_upper, c.gamma_lower, c.gamma_upper, c.d_omega, c.sigma, c.m1, c.m2, c.n1, c.n2];
        let row: Vec<String> = vals.iter().map(|&x| fmt_num(x)).collect();
        let _ = writeln!(s, "{},{}", i + 1, row.join(","));
    }
    s
}

/// Criterion candidates tried by `report`, in order, for a system.
pub fn auto_theorems(spec: &SystemSpec) -> Vec<TheoremId> {
    use TheoremId::*;
    let kinds: Vec<NonlinearityKind> = spec.nonlinearity().iter().map(|g| g.kind()).collect();
    let all = |k: &[NonlinearityKind]| kinds.iter().all(|x| k.contains(x));
    let mut order = Vec::new();
    if all(&[NonlinearityKind::HematopoiesisDiscrete, NonlinearityKind::HematopoiesisDistributed]) {
        order.push(T4_1_hematopoiesis);
    }
    if spec.n() == 2 && all(&[NonlinearityKind::NicholsonDiscrete]) {
        order.push(T4_2_planar);
    }
    if all(&[NonlinearityKind::NicholsonMixed]) {
        order.extend([T4_4_mixed, C3_4_gamma]);
    }
    if all(&[NonlinearityKind::NicholsonDistributed]) {
        order.push(T_N1_nicholson);
    }
    if spec.n() == 1 {
        order.push(C_scalar);
    }
    order.extend([T3_4_bounded, T3_3_average, T3_3_pointwise, T3_2_sublinear, T3_6_limits, T3_1]);
    if !spec.is_impulsive() {
        order.push(C3_1_nonimpulsive);
    }
    let mut seen = Vec::new();
    order.retain(|t| {
        let fresh = !seen.contains(t);
        seen.push(*t);
        fresh
    });
    order
}

fn solve_options(args: &SolveArgs, nodes: usize) -> SolveOptions {
    SolveOptions { damping: args.damping, tol: args.tol, max_iter: args.max_iter, nodes, initial: None }
}

#[derive(Serialize)]
pub struct CrossCheck {
    pub periods: usize,
    pub step: f64,
    pub sup_deviation: f64,
    pub periodicity_residual: f64,
    pub pass: bool,
}

/// Simulates three periods from a fixed point and compares.
pub fn cross_check(spec: &SystemSpec, solution: &GridFunction) -> Result<CrossCheck, SimError> {
    let w = spec.omega();
    let traj = simulator::integrate(spec, InitialHistory::Periodic(solution.clone()), 3.0 * w, DEFAULT_STEP)?;
    let dev = simulator::deviation_from(&traj, solution, 3.0 * w);
    let per = simulator::periodicity_residual(&traj, w, w);
    Ok(CrossCheck { periods: 3, step: DEFAULT_STEP, sup_deviation: dev, periodicity_residual: per, pass: dev <= CROSS_CHECK_TOL })
}

fn summary_fixed_point(r: &FixedPointResult) -> String {
    format!(
        "status {:?}, converged {}, relative residual {:.3e}, iterations {}, floor {:.6e}, sup {:.6e}",
        r.status, r.converged, r.relative_residual, r.iterations, r.positivity_floor, r.sup_norm
    )
}

fn summary_criterion(r: &CriterionReport) -> String {
    format!("{}: {} (margin {:.6e})", r.theorem, if r.pass { "PASS" } else { "FAIL" }, r.margin)
}

struct Ran {
    exit: i32,
    outputs: Value,
    text: String,
    files: Vec<(String, String)>,
}

fn do_validate(spec: &SystemSpec) -> Result<Ran, Failure> {
    spec.check_h3().map_err(|e| Failure::model("validate", &e))?;
    let kinds: Vec<&str> = spec.nonlinearity().iter().map(|g| g.kind().name()).collect();
    let outputs = json!({
        "valid": true,
        "n": spec.n(),
        "omega": spec.omega(),
        "impulse_instants": spec.impulses().instants(),
        "kinds": kinds,
        "max_delay": spec.max_delay(),
        "envelopes_declared": spec.envelopes().is_some(),
        "limits_declared": spec.limits().is_some(),
    });
    let text = format!("valid: n = {}, omega = {}, {} impulse instant(s) per period", spec.n(), spec.omega(), spec.impulses().p());
    Ok(Ran { exit: EXIT_OK, outputs, text, files: vec![] })
}

fn do_bounds(spec: &SystemSpec) -> Result<Ran, Failure> {
    let b = impulse_algebra::bounds(spec).map_err(|e| Failure::model("bounds", &e))?;
    let mut text = String::new();
    for (i, c) in b.iter().enumerate() {
        let _ = writeln!(
            text,
            "component {}: B in [{:.12e}, {:.12e}], Gamma in [{:.12e}, {:.12e}], m1 {:.12e}, m2 {:.12e}, sigma {:.12e}",
            i + 1,
            c.b_lower,
            c.b_upper,
            c.gamma_lower,
            c.gamma_upper,
            c.m1,
            c.m2,
            c.sigma
        );
    }
    let files = vec![("bounds.csv".to_string(), bounds_csv(&b))];
    Ok(Ran { exit: EXIT_OK, outputs: json!({ "components": b }), text: text.trim_end().to_string(), files })
}

fn do_certify(spec: &SystemSpec, common: &Common, args: &CertifyArgs) -> Result<Ran, Failure> {
    let theorem: TheoremId = args.theorem.parse().map_err(|e: String| Failure::input("certify", e))?;
    if args.v.is_some() && args.search_v {
        return Err(Failure::input("certify", "--v and --search-v are exclusive"));
    }
    let opts = CertifyOptions { v: args.v.clone(), search_v: args.search_v, epsilon: args.epsilon, nodes: common.grid };
    let r = certify(spec, theorem, &opts).map_err(|e| Failure::criteria("certify", &e))?;
    let exit = if r.pass { EXIT_OK } else { EXIT_FAIL };
    let text = summary_criterion(&r);
    let files = vec![("margins.csv".to_string(), margins_csv(&r))];
    Ok(Ran { exit, outputs: serde_json::to_value(&r).expect("report serializes"), text, files })
}

fn do_solve(spec: &SystemSpec, common: &Common, args: &SolveArgs) -> Result<Ran, Failure> {
    let r = solve_fixed_point(spec, &solve_options(args, common.grid)).map_err(|e| Failure::solve("solve", &e))?;
    let exit = if r.converged { EXIT_OK } else { EXIT_FAIL };
    Ok(Ran {
        exit,
        outputs: serde_json::to_value(&r).expect("result serializes"),
        text: summary_fixed_point(&r),
        files: vec![("solution.csv".into(), solution_csv(&r.solution))],
    })
}

fn parse_history(spec: &SystemSpec, text: &str, common: &Common, solve: &SolveArgs) -> Result<(InitialHistory, Value), Failure> {
    let n = spec.n();
    if text == "fixed-point" {
        let r = solve_fixed_point(spec, &solve_options(solve, common.grid)).map_err(|e| Failure::solve("solve", &e))?;
        if !r.converged {
            return Err(Failure {
                code: EXIT_FAIL,
                stage: "solve",
                tag: None,
                message: format!("fixed point for the history did not converge ({:?})", r.status),
            });
        }
        let summary = serde_json::to_value(&r).expect("result serializes");
        return Ok((InitialHistory::Periodic(r.solution), summary));
    }
    let values = text
        .strip_prefix("constant:")
        .ok_or_else(|| Failure::input("simulate", format!("unknown history `{text}`; use constant:X or fixed-point")))?;
    let parsed: Vec<f64> = values
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::input("simulate", format!("bad history value: {e}")))?;
    let c = match parsed.len() {
        1 => vec![parsed[0]; n],
        k if k == n => parsed,
        k => return Err(Failure::input("simulate", format!("history has {k} values, system has {n} components"))),
    };
    Ok((InitialHistory::Constant(c), Value::Null))
}

fn do_simulate(spec: &SystemSpec, common: &Common, args: &SimulateArgs, solve: &SolveArgs) -> Result<Ran, Failure> {
    let w = spec.omega();
    let t_end = args.t_end.unwrap_or(20.0 * w);
    let window = args.window.unwrap_or(w);
    if !(window > 0.0 && window <= t_end) {
        return Err(Failure::input("simulate", format!("window must lie in (0, t_end], got {window}")));
    }
    let (history, fixed_point) = parse_history(spec, &args.history, common, solve)?;
    let reference = match &history {
        InitialHistory::Periodic(x) => Some(x.clone()),
        InitialHistory::Constant(_) => None,
    };
    let traj = simulator::integrate(spec, history, t_end, args.step).map_err(|e| Failure::sim("simulate", &e))?;
    let floor = simulator::long_run_floor(&traj, window);
    let probe = (t_end - 2.0 * w).max(0.0);
    let residual = if t_end >= 2.0 * w { Some(simulator::periodicity_residual(&traj, w, probe)) } else { None };
    let deviation = reference.as_ref().map(|x| simulator::deviation_from(&traj, x, t_end));
    let final_state = traj.state(t_end, Side::Left);
    let outputs = json!({
        "t_end": t_end,
        "step": args.step,
        "steps": traj.steps().len(),
        "impulse_events": traj.events().len(),
        "periodicity_residual": residual,
        "periodicity_probe": probe,
        "long_run_floor": floor,
        "floor_window": window,
        "final_state": final_state,
        "deviation_from_history": deviation,
        "fixed_point": fixed_point,
    });
    let mut text = format!(
        "simulated to t = {t_end} in {} steps, {} impulse event(s); long-run floor {:?}",
        traj.steps().len(),
        traj.events().len(),
        floor
    );
    if let Some(r) = residual {
        let _ = write!(text, "; periodicity residual {r:.3e}");
    }
    Ok(Ran {
        exit: EXIT_OK,
        outputs,
        text,
        files: vec![("trajectory.csv".into(), trajectory_csv(&traj)), ("events.csv".into(), events_csv(&traj))],
    })
}

/// Verdict of the pipeline.
pub fn verdict(certified: bool, computed: bool) -> &'static str {
    match (certified, computed) {
        (true, true) => "certified+computed",
        (true, false) => "certified only",
        (false, _) => "not certified",
    }
}

fn do_report(spec: &SystemSpec, common: &Common, solve: &SolveArgs) -> Result<Ran, Failure> {
    spec.check_h3().map_err(|e| Failure::model("validate", &e))?;
    let bounds = impulse_algebra::bounds(spec).map_err(|e| Failure::model("bounds", &e))?;
    let mut attempts = Vec::new();
    let mut chosen: Option<CriterionReport> = None;
    for theorem in auto_theorems(spec) {
        let opts = CertifyOptions { search_v: true, nodes: common.grid, ..CertifyOptions::default() };
        match certify(spec, theorem, &opts) {
            Ok(r) => {
                attempts.push(json!({ "theorem": theorem, "pass": r.pass, "margin": r.margin }));
                if r.pass {
                    chosen = Some(r);
                    break;
                }
            }
            Err(e) => attempts.push(json!({ "theorem": theorem, "error": e.to_string() })),
        }
    }
    let certified = chosen.is_some();
    let mut notes = Vec::new();
    let (fixed_point, check, computed) = match solve_fixed_point(spec, &solve_options(solve, common.grid)) {
        Ok(r) => {
            let check = if r.converged {
                Some(cross_check(spec, &r.solution).map_err(|e| Failure::sim("simulate", &e))?)
            } else {
                None
            };
            if r.status == crate::phi::SolveStatus::Collapsed {
                notes.push("fixed-point iteration collapsed toward 0, consistent with extinction".to_string());
            }
            let computed = r.converged && check.as_ref().is_some_and(|c| c.pass);
            (Some(r), check, computed)
        }
        Err(e) => {
            notes.push(format!("solve failed: {e}"));
            (None, None, false)
        }
    };
    let v = verdict(certified, computed);
    if certified && !computed {
        notes.push("existence certified, computation inconclusive".to_string());
    }
    let exit = if v == "certified+computed" { EXIT_OK } else { EXIT_FAIL };
    let mut text = format!("verdict: {v}");
    if let Some(r) = &chosen {
        let _ = write!(text, "\ncriterion {}", summary_criterion(r));
    }
    if let Some(r) = &fixed_point {
        let _ = write!(text, "\nfixed point: {}", summary_fixed_point(r));
    }
    if let Some(c) = &check {
        let _ = write!(
            text,
            "\ncross-check: deviation {:.3e}, periodicity residual {:.3e}",
            c.sup_deviation, c.periodicity_residual
        );
    }
    for n in &notes {
        let _ = write!(text, "\nnote: {n}");
    }
    let mut files = Vec::new();
    if let Some(r) = &fixed_point {
        files.push(("solution.csv".to_string(), solution_csv(&r.solution)));
    }
    let outputs = json!({
        "verdict": v,
        "bounds": bounds,
        "criteria_tried": attempts,
        "criterion": chosen,
        "fixed_point": fixed_point,
        "cross_check": check,
        "notes": notes,
    });
    Ok(Ran { exit, outputs, text, files })
}

fn write_files(dir: &Path, files: &[(String, String)]) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::input("output", format!("{}: {e}", dir.display())))?;
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Failure::input("output", format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn zoo_command(action: &ZooAction, out: &mut Output) -> i32 {
    match action {
        ZooAction::List { json } => {
            if *json {
                let list: Vec<Value> = zoo::all()
                    .iter()
                    .map(|e| json!({ "id": e.id, "description": e.description, "expected": e.expected }))
                    .collect();
                out.stdout = serde_json::to_string_pretty(&list).expect("list serializes") + "\n";
            } else {
                for e in zoo::all() {
                    let _ = writeln!(out.stdout, "{:24} {}", e.id, e.description);
                }
            }
            EXIT_OK
        }
        ZooAction::Emit { id, eta, omega, out: dir } => match zoo_spec(id, eta.as_deref(), *omega) {
            Ok((spec, _)) => {
                let text = save_system(&spec);
                match dir {
                    Some(dir) => {
                        if let Err(f) = write_files(dir, &[(format!("{id}.toml"), text)]) {
                            return report_failure(&f, false, out);
                        }
                    }
                    None => out.stdout = text,
                }
                EXIT_OK
            }
            Err(f) => report_failure(&f, false, out),
        },
    }
}

fn report_failure(f: &Failure, as_json: bool, out: &mut Output) -> i32 {
    if as_json {
        out.stdout = serde_json::to_string_pretty(&f.to_json()).expect("error serializes") + "\n";
    }
    match &f.tag {
        Some(tag) => {
            let _ = writeln!(out.stderr, "error [{tag}] in {}: {}", f.stage, f.message);
        }
        None => {
            let _ = writeln!(out.stderr, "error in {}: {}", f.stage, f.message);
        }
    }
    f.code
}

/// Runs a parsed command, collecting stdout/stderr text.
pub fn execute(cli: Cli, out: &mut Output) -> i32 {
    let started = Instant::now();
    let (common, name, inputs) = match &cli.command {
        Command::Zoo { action } => return zoo_command(action, out),
        Command::Validate(c) => (c, "validate", json!({ "common": c })),
        Command::Bounds(c) => (c, "bounds", json!({ "common": c })),
        Command::Certify { common, args } => (common, "certify", json!({ "common": common, "certify": args })),
        Command::Solve { common, args } => (common, "solve", json!({ "common": common, "solve": args })),
        Command::Simulate { common, args, solve } => {
            (common, "simulate", json!({ "common": common, "simulate": args, "solve": solve }))
        }
        Command::Report { common, solve } => (common, "report", json!({ "common": common, "solve": solve })),
    };
    let (spec, spec_name) = match load(common) {
        Ok(s) => s,
        Err(f) => return report_failure(&f, common.json, out),
    };
    let ran = match &cli.command {
        Command::Validate(_) => do_validate(&spec),
        Command::Bounds(_) => do_bounds(&spec),
        Command::Certify { args, .. } => do_certify(&spec, common, args),
        Command::Solve { args, .. } => do_solve(&spec, common, args),
        Command::Simulate { args, solve, .. } => do_simulate(&spec, common, args, solve),
        Command::Report { solve, .. } => do_report(&spec, common, solve),
        Command::Zoo { .. } => unreachable!("handled above"),
    };
    let ran = match ran {
        Ok(r) => r,
        Err(f) => return report_failure(&f, common.json, out),
    };
    let report = RunReport {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        spec_name,
        spec_digest: spec_digest(&spec),
        subcommand: name,
        inputs,
        outputs: ran.outputs,
        exit_code: ran.exit,
        wall_time_s: common.timing.then(|| started.elapsed().as_secs_f64()),
    };
    let json_text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    if common.json {
        out.stdout = json_text.clone();
    } else {
        out.stdout = ran.text + "\n";
    }
    let mut files = Vec::new();
    if common.out.is_some() {
        files.push(("report.json".to_string(), json_text));
    }
    if common.out.is_some() || common.emit_plot_data {
        files.extend(ran.files);
    }
    if !files.is_empty() {
        let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
        if let Err(f) = write_files(&dir, &files) {
            return report_failure(&f, false, out);
        }
    }
    ran.exit
}

/// Parses `argv` and runs; clap usage errors map to exit 2.
pub fn run<I, T>(argv: I, out: &mut Output) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(argv) {
        Ok(cli) => execute(cli, out),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                out.stderr = rendered;
            } else {
                out.stdout = rendered;
            }
            code
        }
    }
}
