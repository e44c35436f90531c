use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad design, grid or weight configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Text input that does not parse. Line and column are 1-based.
    #[error("{source_name}:{line}:{column}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("pblock holds {sites} sites but the design needs {cells}")]
    Capacity { sites: usize, cells: usize },

    #[error("field point lies {distance:.3e} um from a segment (guard {guard:.1e} um)")]
    Singularity { distance: f64, guard: f64 },

    #[error("range error: {0}")]
    Range(String),

    #[error("fit did not converge after {iterations} iterations (best residual {residual:.6e})")]
    Fit { iterations: usize, residual: f64 },

    #[error("ordering error: {0}")]
    Ordering(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("architecture error: {0}")]
    Architecture(String),

    #[error("training diverged at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    #[error("invalid file format in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
