//! Periodic coefficients represented as truncated Fourier series.
//!
//! A [`PeriodicFn`] evaluates `c0 + sum_k a_k cos(2 pi k t / w) + b_k sin(2 pi k t / w)`.
//! Its antiderivative is available in closed form, so integrals of death
//! rates never go through quadrature.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use crate::error::ModelError;

/// Tolerance below zero accepted for coefficients flagged nonnegative
/// (round-off in e.g. `1/2 - cos(2t)/2` at `t = 0`).
pub const NONNEG_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicFn {
    period: f64,
    mean: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
    nonneg: Option<String>,
}

impl PeriodicFn {
    pub fn new(period: f64, mean: f64, cos: Vec<f64>, sin: Vec<f64>) -> Result<Self, ModelError> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(ModelError::Invalid(format!("period must be positive, got {period}")));
        }
        if !mean.is_finite() || cos.iter().chain(sin.iter()).any(|c| !c.is_finite()) {
            return Err(ModelError::Invalid("Fourier coefficients must be finite".into()));
        }
        Ok(PeriodicFn { period, mean, cos, sin, nonneg: None })
    }

    pub fn constant(period: f64, value: f64) -> Self {
        PeriodicFn { period, mean: value, cos: Vec::new(), sin: Vec::new(), nonneg: None }
    }

    pub fn zero(period: f64) -> Self {
        Self::constant(period, 0.0)
    }

    /// Flags the function as a nonnegative coefficient named `name` and verifies it.
    pub fn into_nonneg(mut self, name: impl Into<String>) -> Result<Self, ModelError> {
        let name = name.into();
        let (t, value) = self.argmin();
        if value < -NONNEG_SLACK * (1.0 + self.abs_bound()) {
            return Err(ModelError::NegativeCoefficient { name, t, value });
        }
        self.nonneg = Some(name);
        Ok(self)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn cos_coeffs(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin_coeffs(&self) -> &[f64] {
        &self.sin
    }

    pub fn name(&self) -> Option<&str> {
        self.nonneg.as_deref()
    }

    pub fn is_constant(&self) -> bool {
        self.cos.iter().chain(self.sin.iter()).all(|&c| c == 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.mean == 0.0 && self.is_constant()
    }

    /// Upper bound on `|f|` from the coefficients.
    pub fn abs_bound(&self) -> f64 {
        self.mean.abs() + self.cos.iter().chain(self.sin.iter()).map(|c| c.abs()).sum::<f64>()
    }

    fn raw(&self, t: f64) -> f64 {
        if self.is_constant() {
            return self.mean;
        }
        let phase = TAU * t.rem_euclid(self.period) / self.period;
        let mut acc = self.mean;
        for (k, &a) in self.cos.iter().enumerate() {
            if a != 0.0 {
                acc += a * ((k + 1) as f64 * phase).cos();
            }
        }
        for (k, &b) in self.sin.iter().enumerate() {
            if b != 0.0 {
                acc += b * ((k + 1) as f64 * phase).sin();
            }
        }
        acc
    }

    /// Value at `t`; nonnegative coefficients are clipped at zero.
    pub fn eval(&self, t: f64) -> f64 {
        let v = self.raw(t);
        if self.nonneg.is_some() {
            v.max(0.0)
        } else {
            v
        }
    }

    /// Value at `t`, failing if a nonnegative coefficient dips below zero.
    pub fn eval_checked(&self, t: f64) -> Result<f64, ModelError> {
        let v = self.raw(t);
        if let Some(name) = &self.nonneg {
            if v < -NONNEG_SLACK * (1.0 + self.abs_bound()) {
                return Err(ModelError::NegativeCoefficient { name: name.clone(), t, value: v });
            }
            return Ok(v.max(0.0));
        }
        Ok(v)
    }

    /// Derivative `f'(t)` of the series (no clipping).
    pub fn derivative(&self, t: f64) -> f64 {
        if self.is_constant() {
            return 0.0;
        }
        let phase = TAU * t.rem_euclid(self.period) / self.period;
        let w = TAU / self.period;
        let mut acc = 0.0;
        for (k, &a) in self.cos.iter().enumerate() {
            let kk = (k + 1) as f64;
            acc -= a * kk * w * (kk * phase).sin();
        }
        for (k, &b) in self.sin.iter().enumerate() {
            let kk = (k + 1) as f64;
            acc += b * kk * w * (kk * phase).cos();
        }
        acc
    }

    /// Periodic part of the antiderivative, vanishing at `t = 0`.
    fn oscillating_primitive(&self, t: f64) -> f64 {
        if self.is_constant() {
            return 0.0;
        }
        let phase = TAU * t.rem_euclid(self.period) / self.period;
        let mut acc = 0.0;
        for (k, &a) in self.cos.iter().enumerate() {
            let kk = (k + 1) as f64;
            acc += a * self.period / (TAU * kk) * (kk * phase).sin();
        }
        for (k, &b) in self.sin.iter().enumerate() {
            let kk = (k + 1) as f64;
            acc += b * self.period / (TAU * kk) * (1.0 - (kk * phase).cos());
        }
        acc
    }

    /// Exact `int_0^t f(s) ds`.
    pub fn primitive(&self, t: f64) -> f64 {
        self.mean * t + self.oscillating_primitive(t)
    }

    /// Exact `int_a^b f(s) ds`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.mean * (b - a) + (self.oscillating_primitive(b) - self.oscillating_primitive(a))
    }

    /// Exact integral over one period.
    pub fn integral_over_period(&self) -> f64 {
        self.mean * self.period
    }

    pub fn scaled(&self, k: f64) -> PeriodicFn {
        PeriodicFn {
            period: self.period,
            mean: self.mean * k,
            cos: self.cos.iter().map(|c| c * k).collect(),
            sin: self.sin.iter().map(|c| c * k).collect(),
            nonneg: if k >= 0.0 { self.nonneg.clone() } else { None },
        }
    }

    /// Coefficient-wise sum; both operands must share the period.
    pub fn add(&self, other: &PeriodicFn) -> PeriodicFn {
        debug_assert!((self.period - other.period).abs() <= 1e-12 * self.period);
        let merge = |a: &[f64], b: &[f64]| {
            let len = a.len().max(b.len());
            (0..len)
                .map(|k| a.get(k).copied().unwrap_or(0.0) + b.get(k).copied().unwrap_or(0.0))
                .collect::<Vec<_>>()
        };
        let nonneg = match (&self.nonneg, &other.nonneg) {
            (Some(a), Some(b)) => Some(format!("{a}+{b}")),
            _ => None,
        };
        PeriodicFn {
            period: self.period,
            mean: self.mean + other.mean,
            cos: merge(&self.cos, &other.cos),
            sin: merge(&self.sin, &other.sin),
            nonneg,
        }
    }

    /// Minimiser over one period: dense sampling plus golden-section polish.
    pub fn argmin(&self) -> (f64, f64) {
        extremum(self.period, |t| self.raw(t), false)
    }

    pub fn argmax(&self) -> (f64, f64) {
        extremum(self.period, |t| self.raw(t), true)
    }

    pub fn min(&self) -> f64 {
        if self.is_constant() {
            return self.eval(0.0);
        }
        let v = self.argmin().1;
        if self.nonneg.is_some() {
            v.max(0.0)
        } else {
            v
        }
    }

    pub fn max(&self) -> f64 {
        if self.is_constant() {
            return self.eval(0.0);
        }
        self.argmax().1
    }
}

/// Extremum of a smooth periodic function over `[0, period)`.
pub(crate) fn extremum(period: f64, f: impl Fn(f64) -> f64, maximize: bool) -> (f64, f64) {
    const SAMPLES: usize = 2048;
    let sign = if maximize { -1.0 } else { 1.0 };
    let h = period / SAMPLES as f64;
    let mut best = (0.0, sign * f(0.0));
    for j in 1..SAMPLES {
        let t = j as f64 * h;
        let v = sign * f(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    // golden-section search on the bracketing cell pair
    let (mut a, mut b) = (best.0 - h, best.0 + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (sign * f(c), sign * f(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = sign * f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = sign * f(d);
        }
    }
    let (t, v) = if fc < fd { (c, fc) } else { (d, fd) };
    if v < best.1 {
        (t.rem_euclid(period), sign * v)
    } else {
        (best.0, sign * best.1)
    }
}

/// A periodic profile used as an envelope or comparison function.
///
/// Most envelopes are Fourier series; some bounded-nonlinearity envelopes
/// (`sum beta(t) int gamma`, `sum beta tau`) are products that are kept as
/// closures over the coefficients instead.
#[derive(Clone)]
pub enum Profile {
    Fourier(PeriodicFn),
    Derived {
        period: f64,
        label: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Fourier(p) => f.debug_tuple("Fourier").field(p).finish(),
            Profile::Derived { period, label, .. } => f
                .debug_struct("Derived")
                .field("period", period)
                .field("label", label)
                .finish(),
        }
    }
}

impl Profile {
    pub fn constant(period: f64, value: f64) -> Self {
        Profile::Fourier(PeriodicFn::constant(period, value))
    }

    pub fn derived(period: f64, label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Profile::Derived { period, label: label.into(), f: Arc::new(f) }
    }

    pub fn period(&self) -> f64 {
        match self {
            Profile::Fourier(p) => p.period(),
            Profile::Derived { period, .. } => *period,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Profile::Fourier(p) => p.eval(t),
            Profile::Derived { f, .. } => f(t),
        }
    }

    /// Integral over one period; exact for Fourier profiles.
    pub fn integral_over_period(&self) -> f64 {
        match self {
            Profile::Fourier(p) => p.integral_over_period(),
            Profile::Derived { period, f, .. } => simpson(|t| f(t), 0.0, *period, 4096),
        }
    }

    pub fn scaled(&self, k: f64) -> Profile {
        match self {
            Profile::Fourier(p) => Profile::Fourier(p.scaled(k)),
            Profile::Derived { period, label, f } => {
                let f = Arc::clone(f);
                Profile::Derived {
                    period: *period,
                    label: format!("{k}*{label}"),
                    f: Arc::new(move |t| k * f(t)),
                }
            }
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            Profile::Fourier(p) => p.min(),
            Profile::Derived { period, f, .. } => extremum(*period, |t| f(t), false).1,
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            Profile::Fourier(p) => p.max(),
            Profile::Derived { period, f, .. } => extremum(*period, |t| f(t), true).1,
        }
    }

    pub fn as_fourier(&self) -> Option<&PeriodicFn> {
        match self {
            Profile::Fourier(p) => Some(p),
            Profile::Derived { .. } => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Profile::Fourier(p) => p.name().unwrap_or("fourier").to_string(),
            Profile::Derived { label, .. } => label.clone(),
        }
    }
}

/// Composite Simpson rule with `panels` panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for k in 0..panels {
        let x0 = a + k as f64 * h;
        let x1 = if k + 1 == panels { b } else { x0 + h };
        acc += (x1 - x0) / 6.0 * (f(x0) + 4.0 * f(0.5 * (x0 + x1)) + f(x1));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sin_squared() -> PeriodicFn {
        PeriodicFn::new(PI, 0.5, vec![-0.5], vec![]).unwrap().into_nonneg("d").unwrap()
    }

    #[test]
    fn sin_squared_at_half_pi() {
        assert!((sin_squared().eval(PI / 2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_cos_squared_at_zero() {
        let p = PeriodicFn::new(PI, 1.5, vec![1.5], vec![]).unwrap();
        assert!((p.eval(0.0) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn constant_everywhere() {
        let c = PeriodicFn::constant(1.3, 2.0);
        for t in [-7.1, 0.0, 0.4, 1e6] {
            assert_eq!(c.eval(t), 2.0);
        }
    }

    #[test]
    fn integral_of_sin_squared_over_period() {
        let d = sin_squared();
        assert!((d.primitive(PI) - PI / 2.0).abs() < 1e-14);
        assert_eq!(d.primitive(0.0), 0.0);
        // against quadrature
        let q = simpson(|t| t.sin().powi(2), 0.3, 2.9, 2000);
        assert!((d.integral(0.3, 2.9) - q).abs() < 1e-12);
    }

    #[test]
    fn negative_coefficient_is_named() {
        let f = PeriodicFn::new(1.0, 0.1, vec![1.0], vec![]).unwrap();
        match f.into_nonneg("a_01") {
            Err(ModelError::NegativeCoefficient { name, value, .. }) => {
                assert_eq!(name, "a_01");
                assert!(value < -0.8);
            }
            other => panic!("expected negativity error, got {other:?}"),
        }
    }

    #[test]
    fn eval_checked_reports_violation_for_flagged() {
        let mut f = PeriodicFn::new(1.0, 0.1, vec![1.0], vec![]).unwrap();
        f.nonneg = Some("beta".into());
        assert!(f.eval_checked(0.5).is_err());
        assert_eq!(f.eval(0.5), 0.0);
    }

    #[test]
    fn extrema_of_trig_series() {
        let f = PeriodicFn::new(2.0, 1.0, vec![0.3], vec![0.4]).unwrap();
        assert!((f.max() - 1.5).abs() < 1e-12);
        assert!((f.min() - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn shift_by_period_is_identity(
            period in 0.1f64..10.0,
            mean in -3.0f64..3.0,
            a in proptest::collection::vec(-2.0f64..2.0, 0..5),
            b in proptest::collection::vec(-2.0f64..2.0, 0..5),
            t in -50.0f64..50.0,
        ) {
            let f = PeriodicFn::new(period, mean, a, b).unwrap();
            let (x, y) = (f.eval(t), f.eval(t + period));
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()).max(f.abs_bound()));
        }

        #[test]
        fn primitive_is_additive_over_periods(
            mean in 0.0f64..3.0,
            a in proptest::collection::vec(-1.0f64..1.0, 0..4),
            t in 0.0f64..5.0,
        ) {
            let f = PeriodicFn::new(1.7, mean, a, vec![]).unwrap();
            let lhs = f.primitive(t + 1.7) - f.primitive(t);
            prop_assert!((lhs - f.integral_over_period()).abs() < 1e-11);
        }
    }
}
