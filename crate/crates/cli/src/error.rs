use std::path::PathBuf;

use tdas_dicke_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] Error),
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for configuration and I/O problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Io { .. } => 1,
            Self::Numerical(_) => 2,
        }
    }
}

/// Stable machine-readable name of a library error.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::InvariantViolation(_) => "invariant-violation",
        Error::NotAFixedPoint(_) => "not-a-fixed-point",
        Error::StepTooLarge { .. } => "step-too-large",
        Error::NonFiniteState { .. } => "non-finite-state",
        Error::DegenerateFixedPoint { .. } => "degenerate-fixed-point",
        Error::SearchFailed { .. } => "search-failed",
        Error::ScanFailed { .. } => "scan-failed",
        Error::SingularAtFrequency { .. } => "singular-at-frequency",
        Error::DivergentFluctuations { .. } => "divergent-fluctuations",
        Error::Quadrature { .. } => "quadrature",
    }
}

pub fn error_json(e: &Error) -> serde_json::Value {
    serde_json::json!({ "kind": error_kind(e), "message": e.to_string() })
}
