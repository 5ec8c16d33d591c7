use std::path::PathBuf;

use crate::transport::SolveDiagnostics;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A numeric parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The input is structurally missing something an operation requires.
    #[error("usage error: {0}")]
    Usage(String),

    /// The input data make the requested quantity undefined.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("eigensolver did not converge: {0}")]
    EigenNotConverged(String),

    /// Armijo backtracking exhausted its budget; diagnostics up to the failure are attached.
    #[error("line search failed at Newton iteration {}: no sufficient decrease after {} backtracks", .diagnostics.iterations, .backtracks)]
    LineSearchFailed {
        backtracks: usize,
        diagnostics: Box<SolveDiagnostics>,
    },

    #[error("Newton iteration did not converge after {} iterations (marginal residual {:.3e})", .diagnostics.iterations, .diagnostics.marginal_residual)]
    NewtonNotConverged { diagnostics: Box<SolveDiagnostics> },

    /// A fixed-point or projection iteration hit its iteration cap.
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("graph is disconnected ({components} connected components)")]
    Disconnected { components: usize },

    #[error("graph has isolated nodes: {0:?}")]
    IsolatedNodes(Vec<usize>),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
