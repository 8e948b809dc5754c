use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidInput { field: &'static str, reason: String },

    #[error("validation failed for `{field}`: value {value} violates {bound}")]
    Validation {
        field: String,
        value: String,
        bound: String,
    },

    #[error("steady state is not unique: null space has dimension {dimension} (disconnected rate graph)\n{matrix}")]
    DegenerateSteadyState { dimension: usize, matrix: String },

    #[error("singular system while solving {what}")]
    Singular { what: &'static str },

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("unknown preset or missing scenario file `{0}`")]
    UnknownScenario(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("spectrum is flat: no slope to measure")]
    FlatSpectrum,

    #[error("grid cell ({row}, {col}) at {coords}: {source}")]
    Cell {
        row: usize,
        col: usize,
        coords: String,
        #[source]
        source: Box<Error>,
    },

    #[error("no feasible starting point after {attempts} attempts; violated: {violations}")]
    NoFeasibleStart { attempts: usize, violations: String },

    #[error("sweep has {cells} cells, over the budget of {budget}")]
    Budget { cells: usize, budget: usize },

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field,
            reason: reason.into(),
        }
    }

    /// Coarse category used by the CLI to pick an exit code family.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidInput { .. } | Error::Validation { .. } => ErrorCategory::Input,
            Error::Parse { .. } | Error::UnknownScenario(_) | Error::Io { .. } | Error::Json(_) => {
                ErrorCategory::Config
            }
            Error::DegenerateSteadyState { .. } | Error::Singular { .. } => ErrorCategory::Model,
            Error::NonConvergence { .. } => ErrorCategory::Solver,
            Error::FlatSpectrum => ErrorCategory::Sensing,
            Error::Cell { source, .. } => source.category(),
            Error::NoFeasibleStart { .. } | Error::Budget { .. } => ErrorCategory::Optimize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Input,
    Config,
    Model,
    Solver,
    Sensing,
    Optimize,
}

pub(crate) fn check_finite(field: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(field, format!("must be finite, got {v}")))
    }
}

pub(crate) fn check_non_negative(field: &'static str, v: f64) -> Result<f64> {
    check_finite(field, v)?;
    if v < 0.0 {
        return Err(Error::invalid(field, format!("must be >= 0, got {v}")));
    }
    Ok(v)
}

pub(crate) fn check_positive(field: &'static str, v: f64) -> Result<f64> {
    check_finite(field, v)?;
    if v <= 0.0 {
        return Err(Error::invalid(field, format!("must be > 0, got {v}")));
    }
    Ok(v)
}

pub(crate) fn check_unit_interval(field: &'static str, v: f64) -> Result<f64> {
    check_finite(field, v)?;
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::invalid(field, format!("must be in (0, 1], got {v}")));
    }
    Ok(v)
}
