use std::path::PathBuf;

/// Errors produced anywhere in the simulation and imaging pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("point ({x}, {y}) lies outside the domain")]
    OutsideDomain { x: f64, y: f64 },

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("time step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("row {row} has non-positive sum {sum:e}; lumped mass would be singular")]
    NonPositiveRowSum { row: usize, sum: f64 },

    #[error("node {0} carries no fluid unknown")]
    NotFluidNode(usize),

    #[error("source at ({x}, {y}) is not in the fluid")]
    SourceNotInFluid { x: f64, y: f64 },

    #[error("mismatched grids: {0}")]
    GridMismatch(String),

    #[error("traces too short: cover {available:e} s but {required:e} s needed")]
    TracesTooShort { available: f64, required: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
