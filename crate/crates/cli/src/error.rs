use std::path::PathBuf;

use thiserror::Error;

/// Failure of a CLI run, mapped to an exit status by [`CliError::exit_code`].
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad names, ranges or files in the configuration; exit status 2.
    #[error("usage error: {0}")]
    Usage(String),

    /// The solver gave up mid-run; exit status 3. `report` is the diagnostic
    /// file written next to the artifacts, if it could be written.
    #[error("numerical failure: {source}")]
    Numerical {
        source: wdm_core::Error,
        report: Option<PathBuf>,
    },

    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io { .. } | CliError::Other(_) => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Precondition failures are the caller's fault; everything else happened
/// while computing.
impl From<wdm_core::Error> for CliError {
    fn from(e: wdm_core::Error) -> Self {
        use wdm_core::Error as E;
        match e {
            E::Configuration(_) | E::InvalidArgument(_) | E::Discretization(_) | E::PredictionUnavailable(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Numerical {
                source: other,
                report: None,
            },
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Other(format!("csv: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
