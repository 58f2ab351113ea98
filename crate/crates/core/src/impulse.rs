//! Impulse maps `I_ik` and the periodic schedule of impulse instants.

use crate::error::{Hypothesis, ModelError};

#[derive(Clone, Debug, PartialEq)]
pub enum ImpulseKind {
    None,
    Linear,
    /// Piecewise-linear table `(u, I(u))` starting at `(0, 0)`, extended
    /// along its last segment.
    BoundedSlope { table: Vec<(f64, f64)> },
    /// `I(u) = eta u / (1 + u / scale)`.
    Saturating { scale: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImpulseMap {
    kind: ImpulseKind,
    alpha: f64,
    eta: f64,
    j0: f64,
}

impl ImpulseMap {
    pub fn none() -> Self {
        ImpulseMap { kind: ImpulseKind::None, alpha: 0.0, eta: 0.0, j0: 1.0 }
    }

    pub fn linear(eta: f64) -> Result<Self, ModelError> {
        check_slopes(eta, eta)?;
        Ok(ImpulseMap { kind: ImpulseKind::Linear, alpha: eta, eta, j0: 1.0 / (1.0 + eta) })
    }

    pub fn saturating(eta: f64, scale: f64) -> Result<Self, ModelError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(ModelError::Invalid(format!("saturating impulse scale must be positive, got {scale}")));
        }
        let (alpha, upper) = if eta >= 0.0 { (0.0, eta) } else { (eta, 0.0) };
        check_slopes(alpha, upper)?;
        Ok(ImpulseMap { kind: ImpulseKind::Saturating { scale }, alpha, eta: upper, j0: 1.0 / (1.0 + eta) })
    }

    /// Tabulated map with declared slope bounds. `j0` defaults to the limit
    /// implied by the first segment; a declared value must agree with it.
    pub fn bounded_slope(alpha: f64, eta: f64, table: Vec<(f64, f64)>, j0: Option<f64>) -> Result<Self, ModelError> {
        check_slopes(alpha, eta)?;
        if table.len() < 2 {
            return Err(ModelError::Invalid("impulse table needs at least two points".into()));
        }
        if table[0] != (0.0, 0.0) {
            return Err(ModelError::Invalid("impulse table must start at (0, 0)".into()));
        }
        let tol = 1e-12;
        for w in table.windows(2) {
            let ((u0, i0), (u1, i1)) = (w[0], w[1]);
            if !(u1 > u0) || !i1.is_finite() {
                return Err(ModelError::Invalid("impulse table abscissae must be strictly increasing".into()));
            }
            let slope = (i1 - i0) / (u1 - u0);
            if u0 == 0.0 && (slope < alpha - tol || slope > eta + tol) {
                return Err(ModelError::hypothesis(
                    Hypothesis::H2,
                    format!("first table segment has slope {slope}, outside [{alpha}, {eta}]"),
                ));
            }
            if i1 < alpha * u1 - tol * u1 || i1 > eta * u1 + tol * u1 {
                return Err(ModelError::hypothesis(
                    Hypothesis::H2,
                    format!("I({u1}) = {i1} leaves the sector [{alpha} u, {eta} u]"),
                ));
            }
        }
        let n = table.len();
        let last = (table[n - 1].1 - table[n - 2].1) / (table[n - 1].0 - table[n - 2].0);
        if last < alpha - tol || last > eta + tol {
            return Err(ModelError::hypothesis(
                Hypothesis::H2,
                format!("extension slope {last} outside [{alpha}, {eta}]"),
            ));
        }
        let first = table[1].1 / table[1].0;
        let implied = 1.0 / (1.0 + first);
        let j0 = match j0 {
            Some(j) if (j - implied).abs() > 1e-12 * implied => {
                return Err(ModelError::hypothesis(
                    Hypothesis::H2,
                    format!("declared J(0+) = {j} disagrees with the table limit {implied}"),
                ))
            }
            Some(j) => j,
            None => implied,
        };
        Ok(ImpulseMap { kind: ImpulseKind::BoundedSlope { table }, alpha, eta, j0 })
    }

    pub fn kind(&self) -> &ImpulseKind {
        &self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn j0(&self) -> f64 {
        self.j0
    }

    pub fn is_none(&self) -> bool {
        matches!(self.kind, ImpulseKind::None)
    }

    /// Jump size `I(u)` for `u >= 0`.
    pub fn apply(&self, u: f64) -> f64 {
        match &self.kind {
            ImpulseKind::None => 0.0,
            ImpulseKind::Linear => self.eta * u,
            ImpulseKind::Saturating { scale } => {
                // alpha or eta is zero here; the signed slope is their sum
                let slope = self.alpha + self.eta;
                (slope * u) / (1.0 + u / scale)
            }
            ImpulseKind::BoundedSlope { table } => {
                let n = table.len();
                let k = match table.iter().position(|&(x, _)| x > u) {
                    Some(0) => 0,
                    Some(k) => k - 1,
                    None => n - 2,
                };
                let k = k.min(n - 2);
                let (u0, i0) = table[k];
                let (u1, i1) = table[k + 1];
                let raw = i0 + (u - u0) * (i1 - i0) / (u1 - u0);
                raw.clamp(self.alpha * u, self.eta * u)
            }
        }
    }

    /// `J(u) = u / (u + I(u))`, with the stored limit at `u = 0`.
    ///
    /// Evaluated as `1 / (1 + r)` with `r = I(u)/u` clamped to the slope
    /// sector, so the bounds `(1+eta)^-1 <= J <= (1+alpha)^-1` hold in
    /// floating point as well.
    pub fn j(&self, u: f64) -> f64 {
        match self.kind {
            ImpulseKind::None => 1.0,
            ImpulseKind::Linear => self.j0,
            _ => {
                if u <= 0.0 {
                    return self.j0;
                }
                let r = (self.apply(u) / u).clamp(self.alpha, self.eta);
                1.0 / (1.0 + r)
            }
        }
    }

    pub fn j_lower(&self) -> f64 {
        1.0 / (1.0 + self.eta)
    }

    pub fn j_upper(&self) -> f64 {
        1.0 / (1.0 + self.alpha)
    }
}

fn check_slopes(alpha: f64, eta: f64) -> Result<(), ModelError> {
    if !(alpha > -1.0) || !alpha.is_finite() {
        return Err(ModelError::hypothesis(
            Hypothesis::H2,
            format!("lower slope alpha = {alpha} must exceed -1"),
        ));
    }
    if !(eta >= alpha) || !eta.is_finite() {
        return Err(ModelError::hypothesis(
            Hypothesis::H2,
            format!("upper slope eta = {eta} must be at least alpha = {alpha}"),
        ));
    }
    Ok(())
}

/// Instants `0 <= t_1 < ... < t_p < omega` and the maps `maps[k][i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImpulseSchedule {
    omega: f64,
    instants: Vec<f64>,
    maps: Vec<Vec<ImpulseMap>>,
}

impl ImpulseSchedule {
    pub fn empty(omega: f64) -> Self {
        ImpulseSchedule { omega, instants: Vec::new(), maps: Vec::new() }
    }

    pub fn new(omega: f64, instants: Vec<f64>, maps: Vec<Vec<ImpulseMap>>) -> Result<Self, ModelError> {
        if instants.len() != maps.len() {
            return Err(ModelError::Invalid(format!(
                "{} impulse instants but {} rows of impulse maps",
                instants.len(),
                maps.len()
            )));
        }
        for (k, &t) in instants.iter().enumerate() {
            if !(t >= 0.0 && t < omega) {
                return Err(ModelError::hypothesis(
                    Hypothesis::H1,
                    format!("impulse instant t_{} = {t} outside [0, {omega})", k + 1),
                ));
            }
            if k > 0 && !(t > instants[k - 1]) {
                return Err(ModelError::hypothesis(
                    Hypothesis::H1,
                    format!("impulse instants must increase strictly (t_{} = {t})", k + 1),
                ));
            }
        }
        if let Some(first) = maps.first() {
            if maps.iter().any(|row| row.len() != first.len()) {
                return Err(ModelError::Invalid("impulse map rows differ in length".into()));
            }
        }
        Ok(ImpulseSchedule { omega, instants, maps })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn p(&self) -> usize {
        self.instants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instants.is_empty()
    }

    pub fn instants(&self) -> &[f64] {
        &self.instants
    }

    pub fn map(&self, k: usize, i: usize) -> &ImpulseMap {
        &self.maps[k % self.p()][i]
    }

    pub fn maps(&self) -> &[Vec<ImpulseMap>] {
        &self.maps
    }

    /// True when component `i` never jumps.
    pub fn inert_for(&self, i: usize) -> bool {
        self.maps.iter().all(|row| row[i].is_none())
    }

    /// `prod_k (1 + eta_ik)` in chronological order.
    pub fn eta_product(&self, i: usize) -> f64 {
        self.maps.iter().fold(1.0, |acc, row| acc * (1.0 + row[i].eta()))
    }

    /// Instants of the periodic extension lying in `[from, to)`, in
    /// chronological order, as (index in `0..p`, time).
    ///
    /// Both ends are reduced to the base period first so that windows shifted
    /// by multiples of `omega` select the same instants; instants within
    /// `snap * omega` of an end are resolved as if they sat exactly on it.
    pub fn instants_in(&self, from: f64, to: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        if self.instants.is_empty() || !(to > from) {
            return out;
        }
        let w = self.omega;
        let tol = SNAP * w;
        let mut m0 = (from / w).floor();
        // an end that sits a hair below a period boundary belongs to it
        if from - m0 * w > w - tol {
            m0 += 1.0;
        }
        let a = from - m0 * w;
        let b = to - m0 * w;
        let mut m = -1.0;
        while m * w + self.instants[0] < b + w {
            for (k, &tk) in self.instants.iter().enumerate() {
                let t = tk + m * w;
                if t >= a - tol && t < b - tol {
                    out.push((k, t + m0 * w));
                }
            }
            m += 1.0;
        }
        out
    }
}

/// Relative tolerance (in units of the period) for deciding that two times coincide.
pub const SNAP: f64 = 1e-11;
