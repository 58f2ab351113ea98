//! `K_i(t; w) = int_t^{t+omega} e^{D_i(s) - D_i(t)} w(s) ds` on a grid.

use crate::grid::Grid;
use crate::periodic::{simpson, Profile};
use crate::system::SystemSpec;

/// Panels used by the direct quadrature at a single point.
pub const DIRECT_PANELS: usize = 1024;

pub struct KernelProfile {
    pub weight: Profile,
    /// Values at the grid nodes.
    pub values: Vec<f64>,
}

impl KernelProfile {
    /// Runs one cumulative Simpson pass over the grid panels, using
    /// `K(t) = e^{-D(t)} [C(omega) - C(t) + e^{D(omega)} C(t)]`
    /// with `C(t) = int_0^t e^{D} w`.
    pub fn new(spec: &SystemSpec, i: usize, grid: &Grid, weight: Profile) -> Self {
        let t = grid.times();
        let m = t.len();
        let omega = grid.omega();
        let f = |s: f64| spec.d_primitive(i, s).exp() * weight.eval(s);
        let mut cum = vec![0.0; m + 1];
        for j in 0..m {
            let (a, b) = (t[j], grid.panel_end(j));
            cum[j + 1] = cum[j] + (f(a) + 4.0 * f(0.5 * (a + b)) + f(b)) * (b - a) / 6.0;
        }
        let total = cum[m];
        let e_omega = spec.d_omega(i).exp();
        let values = (0..m)
            .map(|j| (-spec.d_primitive(i, t[j])).exp() * (total - cum[j] + e_omega * cum[j]))
            .collect();
        debug_assert!((grid.panel_end(m - 1) - omega).abs() < 1e-9 * omega);
        KernelProfile { weight, values }
    }

    pub fn direct(&self, spec: &SystemSpec, i: usize, t: f64) -> f64 {
        kernel_direct(spec, i, t, &|s| self.weight.eval(s), DIRECT_PANELS)
    }
}

/// Direct composite Simpson evaluation of `K_i(t; w)`.
pub fn kernel_direct(spec: &SystemSpec, i: usize, t: f64, w: &dyn Fn(f64) -> f64, panels: usize) -> f64 {
    let d = &spec.death()[i];
    simpson(|s| d.integral(t, s).exp() * w(s), t, t + spec.omega(), panels)
}
