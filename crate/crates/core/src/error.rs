//! Error types shared across the simulator.

use thiserror::Error;

/// Failures raised by the physical models and the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("device `{device}` has no efficiency calibration at {wavelength_nm} nm")]
    CalibrationMissing { device: String, wavelength_nm: f64 },

    #[error("out-of-order input: t = {time_ns} ns precedes t = {previous_ns} ns")]
    Sequencing { time_ns: f64, previous_ns: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("estimate undefined: {0}")]
    Undefined(&'static str),

    #[error("ill-defined peak: {0}")]
    IllDefinedPeak(&'static str),
}

/// Failures raised while loading or validating a configuration document.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("document defines none of the required sections; expected at least one of: {}", .expected.join(", "))]
    MissingSections { expected: Vec<&'static str> },

    #[error("unresolved reference: {kind} `{id}` is not defined")]
    UnresolvedReference { kind: &'static str, id: String },

    #[error("duplicate {kind} id `{id}`")]
    Duplicate { kind: &'static str, id: String },

    #[error("constraint violation: {}", .violations.join("; "))]
    Invalid { violations: Vec<String> },
}

impl ConfigError {
    pub fn invalid(violations: Vec<String>) -> Self {
        ConfigError::Invalid { violations }
    }

    /// Short machine-readable tag for the error family.
    pub fn kind(&self) -> &'static str {
        match self {
            ConfigError::Parse { .. } => "parse",
            ConfigError::MissingSections { .. } => "missing-sections",
            ConfigError::UnresolvedReference { .. } => "unresolved-reference",
            ConfigError::Duplicate { .. } => "duplicate",
            ConfigError::Invalid { .. } => "constraint-violation",
        }
    }
}

/// Top-level error for session runs and exports.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialize(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialize(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialize(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_fraction(name: &'static str, value: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ModelError::Domain {
            name,
            value,
            domain: "[0, 1]",
        })
    }
}
