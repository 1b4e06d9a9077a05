use thiserror::Error;

use crate::pmf::{BitTime, PmfError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Pmf(#[from] PmfError),

    #[error("frame {frame}: {field} = {value} ms is not an integral number of bit-times at {bus_speed} bit/s")]
    NonIntegralBitTime {
        frame: String,
        field: &'static str,
        value: f64,
        bus_speed: u64,
    },

    #[error("frame {frame}: field {field} must be given either in ms or in bits")]
    MissingField { frame: String, field: &'static str },

    #[error("frame {frame}: field {field} is given both in ms and in bits")]
    AmbiguousField { frame: String, field: &'static str },

    #[error("duplicate priority {0}")]
    DuplicatePriority(u32),

    #[error("duplicate frame id {0:?}")]
    DuplicateId(String),

    #[error("frame {frame}: constrained deadline violated (D = {deadline} > T = {period})")]
    ConstrainedDeadline {
        frame: String,
        deadline: BitTime,
        period: BitTime,
    },

    #[error("frame {frame}: {reason}")]
    InvalidFrame { frame: String, reason: String },

    #[error("invalid error model: {0}")]
    InvalidErrorModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no frame matches {0:?}")]
    UnknownFrame(String),

    #[error("{what} did not converge within {horizon} bit-times")]
    NonConvergence { what: &'static str, horizon: BitTime },

    #[error("no finite retry limit brings the residual below {threshold} within {cap} retries")]
    RetryLimitUnbounded { threshold: f64, cap: u32 },

    #[error("infeasible workload specification: {0}")]
    InfeasibleSpec(String),
}

impl Error {
    /// True for errors caused by iteration limits rather than bad input.
    pub fn is_convergence(&self) -> bool {
        matches!(self, Error::NonConvergence { .. })
    }
}
