use thiserror::Error;

/// Errors surfaced by the solvers and the benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Input shapes disagree (channel count, precoder dims, vector lengths).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A configuration violates its invariants (non-positive power, empty lists, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A value left the numeric domain an update requires (e.g. a non-positive MSE).
    #[error("numeric domain error: {0}")]
    Domain(String),

    /// An iterative solver could not complete (failed bracket, non-finite iterate).
    #[error("solver error: {0}")]
    Solver(String),

    /// A command-line/spec usage problem rather than a numeric one.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
