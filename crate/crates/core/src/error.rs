use thiserror::Error;

use crate::boxmax::SdpSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported polynomial degree {0} (only degree <= 2 is handled)")]
    UnsupportedDegree(usize),

    #[error("problem too large for {what}: {detail}")]
    TooLarge { what: &'static str, detail: String },

    #[error("vertex enumeration needs a zero diagonal (A[{index}][{index}] = {value})")]
    NonzeroDiagonal { index: usize, value: f64 },

    #[error("SDP solver did not converge after {sweeps} sweeps (last improvement {last_improvement:e}, feasibility {feasibility:e})")]
    NonConvergence {
        sweeps: usize,
        last_improvement: f64,
        feasibility: f64,
        best: Box<SdpSolution>,
    },

    #[error("network SDP did not converge after {sweeps} sweeps (objective {objective:e}, dual bound {dual_bound:e})")]
    NetNonConvergence { sweeps: usize, objective: f64, dual_bound: f64 },

    #[error("f(x*) = 0, the reference label is ambiguous")]
    AmbiguousLabel,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, got })
        }
    }
}
