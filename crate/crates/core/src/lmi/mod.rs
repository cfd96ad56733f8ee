//! LMI construction, a barrier SDP solver, and the static and dynamic state
//! anti-windup synthesis conditions with their iterative linearization.

mod affine;
mod problem;
mod santw;

pub use affine::AffineMatrix;
pub use problem::{
    solve_sdp, Constraint, IterationRecord, LmiProblem, SdpOptions, SdpSolution, SdpStatus, Sense,
    VarBlock, VarKind,
};
pub use santw::*;

use crate::lti::LtiError;
use crate::matrix::LinalgError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmiError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("constraint {0} is not symmetric")]
    NotSymmetric(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("no feasible linearization point after {attempts} attempts (best margin {best_margin:.3e})")]
    NoFeasibleStart { attempts: usize, best_margin: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Lti(#[from] LtiError),
}
