use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised across the library.
///
/// Variants fall into two classes, see [`Error::is_infeasible`]: bad input
/// (validation) and well-formed input whose computation has no answer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid urn: {0}")]
    InvalidUrn(String),

    #[error(
        "no observation supports the working hypothesis; the +1 urn is undefined \
         when every observation favors the rival (a dedicated procedure is needed for that case)"
    )]
    NoSupportingEvidence,

    #[error("weight vector has {got} entries but there are {expected} working observations")]
    WeightLength { expected: u64, got: usize },

    #[error("weights must be positive integers, got {0}")]
    InvalidWeight(u64),

    #[error("support count {x} is outside the feasible range [{lo}, {hi}]")]
    Infeasible { x: u64, lo: u64, hi: u64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("odds ratio must be a positive finite number, got {0}")]
    InvalidOdds(f64),

    #[error("threshold alpha = {alpha} is unreachable: the tail spans ({low:e}, {high:e}) over the searchable odds range")]
    UnreachableThreshold { alpha: f64, low: f64, high: f64 },

    #[error("degenerate urn: the tail probability does not depend on the odds ratio ({0})")]
    DegenerateSupport(String),

    #[error("odds solver did not converge after {iterations} iterations (|p - alpha| = {residual:e})")]
    NoConvergence { iterations: u32, residual: f64 },

    #[error("urn of {size} items exceeds the enumeration limit of {max}")]
    UrnTooLarge { size: u64, max: u64 },

    #[error("malformed ledger at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid ledger: {0}")]
    Ledger(String),

    #[error("duplicate observation id {0:?}")]
    DuplicateId(String),
}

impl Error {
    /// True for errors where the inputs were valid but the requested
    /// quantity does not exist (unreachable threshold, degenerate support).
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::Infeasible { .. }
                | Error::UnreachableThreshold { .. }
                | Error::DegenerateSupport(_)
        )
    }
}
