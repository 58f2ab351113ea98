use thiserror::Error;

/// Standing hypotheses a system must satisfy before any criterion applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Hypothesis {
    H1,
    H2,
    H3,
    H4,
    H6,
    H7,
}

impl Hypothesis {
    pub fn tag(self) -> &'static str {
        match self {
            Hypothesis::H1 => "H1",
            Hypothesis::H2 => "H2",
            Hypothesis::H3 => "H3",
            Hypothesis::H4 => "H4",
            Hypothesis::H6 => "H6",
            Hypothesis::H7 => "H7",
        }
    }
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({})", self.tag())
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{hypothesis} violated: {message}")]
    Hypothesis {
        hypothesis: Hypothesis,
        message: String,
    },
    #[error("coefficient `{name}` is negative at t = {t}: {value:e}")]
    NegativeCoefficient { name: String, t: f64, value: f64 },
    #[error("invalid system description: {0}")]
    Invalid(String),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl ModelError {
    pub fn hypothesis(h: Hypothesis, message: impl Into<String>) -> Self {
        ModelError::Hypothesis {
            hypothesis: h,
            message: message.into(),
        }
    }

    /// The violated hypothesis, if the error is a hypothesis failure.
    pub fn tag(&self) -> Option<Hypothesis> {
        match self {
            ModelError::Hypothesis { hypothesis, .. } => Some(*hypothesis),
            ModelError::NegativeCoefficient { .. } => Some(Hypothesis::H4),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum CriteriaError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("criterion {theorem} does not apply: {reason}")]
    NotApplicable { theorem: String, reason: String },
    #[error("envelopes required for {0}; declare them in the config")]
    EnvelopesRequired(String),
    #[error("unsupported limit profile: {0}")]
    UnsupportedLimit(String),
    #[error("precondition failed for component {component} at t = {t}: {message}")]
    Precondition {
        component: usize,
        t: f64,
        message: String,
    },
    #[error("scaling vector must be positive with length {expected}, got {got:?}")]
    BadScaling { expected: usize, got: Vec<f64> },
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite iterate at iteration {iteration} (component {component})")]
    NonFinite { iteration: usize, component: usize },
    #[error("initial iterate must be nonnegative and finite")]
    BadInitial,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("non-finite state at t = {t} (component {component})")]
    NonFinite { t: f64, component: usize },
    #[error("positivity violated at t = {t} (component {component}): {value:e}")]
    Positivity { t: f64, component: usize, value: f64 },
    #[error("invalid simulation request: {0}")]
    Invalid(String),
}
