use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = GruweError> = std::result::Result<T, E>;

/// One rejected line of an input file.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum GruweError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("invalid records in {}: {}", path.display(), join_violations(violations))]
    Records {
        path: PathBuf,
        violations: Vec<Violation>,
    },

    #[error("training error: {0}")]
    Training(String),

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("checkpoint load error: {0}")]
    Load(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error classes, mapped onto process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numerical,
    Internal,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Data => 3,
            ErrorCategory::Numerical => 4,
            ErrorCategory::Internal => 5,
        }
    }
}

impl GruweError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            GruweError::Config(_)
            | GruweError::UnsupportedVersion { .. }
            | GruweError::Load(_)
            | GruweError::Shape(_) => ErrorCategory::Config,
            GruweError::Data(_)
            | GruweError::Records { .. }
            | GruweError::Io { .. }
            | GruweError::Evaluation(_) => ErrorCategory::Data,
            GruweError::Training(_) | GruweError::Domain(_) => ErrorCategory::Numerical,
            GruweError::Internal(_) => ErrorCategory::Internal,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GruweError::Io {
            path: path.into(),
            source,
        }
    }
}
