//! Read access to past states, shared by the operator and the integrator.

/// Which one-sided limit to take at a discontinuity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// A (piecewise continuous) vector function of time that nonlinearities can read.
pub trait History: Sync {
    fn dim(&self) -> usize;

    /// `x_i(t)` taking the `side` limit at jumps.
    fn value(&self, i: usize, t: f64, side: Side) -> f64;

    /// `int_a^b f(s, x_i(s)) ds` for `a <= b`.
    fn integrate(&self, i: usize, a: f64, b: f64, f: &dyn Fn(f64, f64) -> f64) -> f64;

    /// Same as [`History::integrate`] for the integrand of delay term `term`;
    /// implementations may answer from precomputed primitives.
    fn integrate_term(&self, i: usize, term: usize, a: f64, b: f64, f: &dyn Fn(f64, f64) -> f64) -> f64 {
        let _ = term;
        self.integrate(i, a, b, f)
    }
}

/// Constant history, mostly for tests and default initial data.
#[derive(Clone, Debug)]
pub struct ConstantHistory(pub Vec<f64>);

impl History for ConstantHistory {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn value(&self, i: usize, _t: f64, _side: Side) -> f64 {
        self.0[i]
    }

    fn integrate(&self, i: usize, a: f64, b: f64, f: &dyn Fn(f64, f64) -> f64) -> f64 {
        let x = self.0[i];
        let panels = (((b - a) / 0.01).ceil() as usize).clamp(1, 100_000);
        crate::periodic::simpson(|s| f(s, x), a, b, panels)
    }
}
