use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("basis vector {index} collapsed during re-orthogonalization")]
    RankDeficient { index: usize },

    #[error("update denominator {value:e} is not positive ({context})")]
    NonPositiveDenominator { context: &'static str, value: f64 },

    #[error("rank-two step has beta^2 = {beta_sq} >= 1")]
    StepTooLarge { beta_sq: f64 },

    #[error("trace projection did not converge: bracket [{lo:e}, {hi:e}], |g - 1| = {residual:e}")]
    ProjectionFailed { lo: f64, hi: f64, residual: f64 },

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    #[error("estimator branch does not match the sampled action")]
    BranchMismatch,

    #[error("enumeration over d = {dim} outcomes exceeds the cap of {cap}")]
    EnumerationTooLarge { dim: usize, cap: usize },

    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("loss matrix violates the spectral bound: norm {norm} > 1")]
    SpectralBound { norm: f64 },

    #[error("environment does not expose loss matrices")]
    MatrixUnavailable,

    #[error("environment is unbounded; set allow_unbounded to run it")]
    UnboundedEnvironment,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("usage: {0}")]
    Usage(String),
}

impl Error {
    /// Short stable tag used in machine-readable CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NoConvergence { .. } => "no_convergence",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::NonPositiveDenominator { .. } => "non_positive_denominator",
            Error::StepTooLarge { .. } => "step_too_large",
            Error::ProjectionFailed { .. } => "projection_failed",
            Error::NotPositiveDefinite(_) => "not_positive_definite",
            Error::BranchMismatch => "branch_mismatch",
            Error::EnumerationTooLarge { .. } => "enumeration_too_large",
            Error::MalformedRow { .. } => "malformed_row",
            Error::SpectralBound { .. } => "spectral_bound",
            Error::MatrixUnavailable => "matrix_unavailable",
            Error::UnboundedEnvironment => "unbounded_environment",
            Error::Config(_) => "config",
            Error::Trial { source, .. } => source.kind(),
            Error::Io { .. } => "io",
            Error::Usage(_) => "usage",
        }
    }
}
