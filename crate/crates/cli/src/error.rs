//! Errors surfaced by the runner and their exit codes.

use std::fmt;
use std::path::PathBuf;

use cone_ot::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_HYPOTHESIS: u8 = 3;
pub const EXIT_NO_CONVERGENCE: u8 = 4;
pub const EXIT_INTERNAL: u8 = 5;

/// Schema or validation failure with its location when known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub field: Option<String>,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn plain(message: impl Into<String>) -> Self {
        Self { field: None, line: None, column: None, message: message.into() }
    }

    pub fn at(field: &str, message: impl Into<String>) -> Self {
        Self { field: Some(field.to_string()), line: None, column: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("config error")?;
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, " at line {l}, column {c}")?;
        }
        if let Some(field) = &self.field {
            write!(f, " in field `{field}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("output directory {0} is locked by another run")]
    Locked(PathBuf),
    #[error("{stage}: {source}")]
    Core {
        stage: &'static str,
        #[source]
        source: Error,
    },
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Locked(_) => EXIT_CONFIG,
            CliError::Core { source, .. } => exit_code(source),
            CliError::Io { .. } => EXIT_INTERNAL,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

/// Exit code of a library error raised after the config was accepted.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invalid(_)
        | Error::OriginNotInterior
        | Error::DegenerateBody(_)
        | Error::Unbounded
        | Error::UnsupportedDimension(_)
        | Error::EmptySlice
        | Error::ConfigMismatch(_)
        | Error::IncompatibleRuns(_)
        | Error::Json(_) => EXIT_CONFIG,
        Error::NotOblique(_) | Error::HypothesisViolated(_) => EXIT_HYPOTHESIS,
        Error::NoConvergence { .. } | Error::NewtonStall { .. } | Error::NoRoot(_) => EXIT_NO_CONVERGENCE,
        Error::InconsistentPredicates { .. }
        | Error::DivergentEnergy { .. }
        | Error::QuadratureUnderflow
        | Error::ApexEvaluation(_)
        | Error::EmptyInterior(_)
        | Error::EmptyDomain
        | Error::NonPositiveV(_)
        | Error::EnergyUndefined(_)
        | Error::OutsideCone
        | Error::Io(_) => EXIT_INTERNAL,
    }
}

/// Short machine-readable name of a library error.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::OriginNotInterior => "origin_not_interior",
        Error::DegenerateBody(_) => "degenerate_body",
        Error::Unbounded => "unbounded",
        Error::UnsupportedDimension(_) => "unsupported_dimension",
        Error::InconsistentPredicates { .. } => "inconsistent_predicates",
        Error::EmptySlice => "empty_slice",
        Error::NotOblique(_) => "not_oblique",
        Error::QuadratureUnderflow => "quadrature_underflow",
        Error::ApexEvaluation(_) => "apex_evaluation",
        Error::EmptyInterior(_) => "empty_interior",
        Error::EmptyDomain => "empty_domain",
        Error::NonPositiveV(_) => "non_positive_v",
        Error::EnergyUndefined(_) => "energy_undefined",
        Error::DivergentEnergy { .. } => "divergent_energy",
        Error::NoConvergence { .. } => "no_convergence",
        Error::NewtonStall { .. } => "newton_stall",
        Error::HypothesisViolated(_) => "hypothesis_violated",
        Error::OutsideCone => "outside_cone",
        Error::ConfigMismatch(_) => "config_mismatch",
        Error::NoRoot(_) => "no_root",
        Error::IncompatibleRuns(_) => "incompatible_runs",
        Error::Invalid(_) => "invalid",
        Error::Json(_) => "json",
        Error::Io(_) => "io",
    }
}
