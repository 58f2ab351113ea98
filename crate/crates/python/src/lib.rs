use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde_json::json;

use impdde::config::{load_system, save_system};
use impdde::criteria::{certify, CertifyOptions, TheoremId};
use impdde::grid::DEFAULT_NODES;
use impdde::phi::{solve_fixed_point, SolveOptions};
use impdde::simulator::{self, InitialHistory, DEFAULT_STEP};
use impdde::{Side, SystemSpec};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn ser_err(e: serde_json::Error) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// A validated impulsive periodic delay system.
#[pyclass(module = "pyimpdde", frozen)]
pub struct System {
    spec: SystemSpec,
}

#[pymethods]
impl System {
    /// Parses a TOML system description; hypothesis violations raise ValueError.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        load_system(text).map(|spec| System { spec }).map_err(value_err)
    }

    #[staticmethod]
    #[pyo3(signature = (id, eta=None, omega=None))]
    fn zoo(id: &str, eta: Option<f64>, omega: Option<f64>) -> PyResult<Self> {
        if id == "planar_autonomous" && (eta.is_some() || omega.is_some()) {
            let omega = omega.unwrap_or_else(impdde::zoo::planar_default_omega);
            let eta = eta.unwrap_or(impdde::zoo::PLANAR_DEFAULT_ETA);
            let entry = impdde::zoo::planar_autonomous(omega, [eta, eta]).map_err(value_err)?;
            return Ok(System { spec: entry.spec });
        }
        if eta.is_some() || omega.is_some() {
            return Err(PyValueError::new_err("eta and omega apply to planar_autonomous only"));
        }
        impdde::zoo::entry(id).map(|e| System { spec: e.spec }).ok_or_else(|| PyKeyError::new_err(id.to_string()))
    }

    fn to_toml(&self) -> String {
        save_system(&self.spec)
    }

    #[getter]
    fn n(&self) -> usize {
        self.spec.n()
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.spec.omega()
    }

    #[getter]
    fn name(&self) -> String {
        self.spec.name.clone()
    }

    #[getter]
    fn digest(&self) -> String {
        impdde::cli::spec_digest(&self.spec)
    }

    /// Impulse-algebra bounds per component, as JSON.
    fn bounds(&self) -> PyResult<String> {
        serde_json::to_string(&impdde::impulse_algebra::bounds(&self.spec).map_err(value_err)?).map_err(ser_err)
    }

    /// CriterionReport as JSON.
    #[pyo3(signature = (theorem, v=None, search_v=false, epsilon=None, nodes=DEFAULT_NODES))]
    fn certify(&self, theorem: &str, v: Option<Vec<f64>>, search_v: bool, epsilon: Option<f64>, nodes: usize) -> PyResult<String> {
        let theorem: TheoremId = theorem.parse().map_err(|e: String| PyValueError::new_err(e))?;
        let opts = CertifyOptions { v, search_v, epsilon, nodes };
        serde_json::to_string(&certify(&self.spec, theorem, &opts).map_err(value_err)?).map_err(ser_err)
    }

    /// FixedPointResult as JSON, with the solution under `solution`
    /// (`t`, and `left`/`right` per component).
    #[pyo3(signature = (tol=1e-8, max_iter=2000, damping=0.5, nodes=DEFAULT_NODES))]
    fn solve(&self, tol: f64, max_iter: usize, damping: f64, nodes: usize) -> PyResult<String> {
        let opts = SolveOptions { damping, tol, max_iter, nodes, initial: None };
        let r = solve_fixed_point(&self.spec, &opts).map_err(value_err)?;
        let x = &r.solution;
        let len = x.grid().len();
        let left: Vec<Vec<f64>> = (0..x.n()).map(|i| (0..len).map(|j| x.left(i, j)).collect()).collect();
        let right: Vec<Vec<f64>> = (0..x.n()).map(|i| (0..len).map(|j| x.right(i, j)).collect()).collect();
        let mut v = serde_json::to_value(&r).map_err(ser_err)?;
        v["solution"] = json!({ "t": x.grid().times(), "left": left, "right": right });
        serde_json::to_string(&v).map_err(ser_err)
    }

    /// Simulation summary as JSON, starting from a constant history.
    #[pyo3(signature = (t_end, history=None, step=DEFAULT_STEP))]
    fn simulate(&self, t_end: f64, history: Option<Vec<f64>>, step: f64) -> PyResult<String> {
        let n = self.spec.n();
        let h = match history {
            None => vec![1.0; n],
            Some(h) if h.len() == 1 => vec![h[0]; n],
            Some(h) => h,
        };
        let traj = simulator::integrate(&self.spec, InitialHistory::Constant(h), t_end, step).map_err(value_err)?;
        let w = self.spec.omega();
        let residual = (t_end >= 2.0 * w).then(|| simulator::periodicity_residual(&traj, w, t_end - 2.0 * w));
        let events: Vec<_> = traj.events().iter().map(|e| json!({ "t": e.t, "k": e.k, "component": e.component, "before": e.before, "jump": e.jump })).collect();
        serde_json::to_string(&json!({
            "t_end": t_end,
            "steps": traj.steps().len(),
            "events": events,
            "final_state": traj.state(t_end, Side::Left),
            "long_run_floor": simulator::long_run_floor(&traj, w.min(t_end)),
            "periodicity_residual": residual,
        }))
        .map_err(ser_err)
    }
}

#[pyfunction]
fn zoo_ids() -> Vec<&'static str> {
    impdde::zoo::IDS.to_vec()
}

/// Runs the command-line front end in-process: returns (exit code, stdout, stderr).
#[pyfunction]
fn run_cli(args: Vec<String>) -> (i32, String, String) {
    let mut out = impdde::cli::Output::default();
    let code = impdde::cli::run(std::iter::once("impdde".to_string()).chain(args), &mut out);
    (code, out.stdout, out.stderr)
}

#[pymodule]
fn pyimpdde(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<System>()?;
    m.add_function(wrap_pyfunction!(zoo_ids, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
