//! Positive periodic solutions of periodic impulsive delay differential systems.
//!
//! `x_i'(t) = -d_i(t) x_i(t) + sum_{j != i} a_ij(t) x_j(t) + g_i(t, x_it)` for `t != t_k`,
//! with jumps `x_i(t_k^+) - x_i(t_k) = I_ik(x_i(t_k))`.

pub mod cli;
pub mod config;
pub mod criteria;
pub mod error;
pub mod grid;
pub mod history;
pub mod impulse;
pub mod impulse_algebra;
pub mod nonlinearity;
pub mod periodic;
pub mod phi;
pub mod simulator;
pub mod system;
pub mod zoo;

pub use error::{CriteriaError, Hypothesis, ModelError, SimError, SolveError};
pub use grid::{Grid, GridFunction};
pub use history::{History, Side};
pub use impulse::{ImpulseKind, ImpulseMap, ImpulseSchedule};
pub use nonlinearity::{Nonlinearity, NonlinearityKind, Term};
pub use periodic::PeriodicFn;
pub use system::{EnvelopePair, LimitProfile, SystemSpec};
