use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid problem: {0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] sqlift::Error),
    #[error("{0}")]
    Csv(String),
}

impl CliError {
    /// 0 success, 1 I/O, 2 parse, 3 validation, 4 numerical failure,
    /// 5 inconsistency detected.
    pub fn exit_code(&self) -> u8 {
        use sqlift::Error as E;
        match self {
            CliError::Io { .. } | CliError::Csv(_) => 1,
            CliError::Parse { .. } => 2,
            CliError::Validation(_) => 3,
            CliError::Core(e) => match e {
                E::InconsistencyDetected(_) => 5,
                E::DimensionMismatch(_)
                | E::EmptySet
                | E::InfeasiblePolyhedron
                | E::EmptyDomain
                | E::OutOfDomain { .. }
                | E::OutOfLiftedDomain { .. }
                | E::NotStationary
                | E::InfeasibleMultiplier
                | E::NotAStationaryPoint { .. }
                | E::InvalidRange(_)
                | E::NotConvex { .. }
                | E::NotAMinimizer { .. }
                | E::UnsupportedProblemClass(_) => 3,
                _ => 4,
            },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
