use alloc::string::String;
use alloc::vec::Vec;

use crate::operator::GasState;

/// Errors produced by the solver core.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// The network violates one of its structural or physical invariants.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("scaling matrix is singular (smallest/largest singular value ratio {ratio:e})")]
    SingularScaling { ratio: f64 },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },

    #[error("rank-deficient matrix: {0}")]
    RankDeficient(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no certificate found: {0}")]
    NoCertificate(String),

    /// Dykstra iterations did not settle within the sweep budget.
    #[error("projection did not converge after {sweeps} sweeps (last move {gap:e})")]
    ProjectionNotConverged { sweeps: usize, gap: f64, last: GasState },

    /// Non-finite values appeared in the variational-inequality iteration.
    #[error("iteration diverged at step {iteration}")]
    Diverged {
        iteration: usize,
        trajectory: Vec<GasState>,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
