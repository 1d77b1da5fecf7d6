use std::path::PathBuf;

use thiserror::Error;

/// Exit status for input and configuration problems.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit status for numerical failures inside the algorithms.
pub const EXIT_NUMERICAL: i32 = 3;
/// Exit status when outputs were written but an iteration did not converge.
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot read CSV {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("invalid manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Core(#[from] varsphere::Error),
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        use varsphere::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::DimensionMismatch { .. }
                | E::InvalidWeights(_)
                | E::InvalidCategorical(_)
                | E::InvalidConfig(_)
                | E::Empty(_)
                | E::RankTooLarge { .. }
                | E::GroundSetMismatch(..) => EXIT_VALIDATION,
                _ => EXIT_NUMERICAL,
            },
            _ => EXIT_VALIDATION,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
