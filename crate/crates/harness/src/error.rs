use std::path::PathBuf;

use sfplus_core::analysis::FitError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("run `{name}` diverged at step {step}")]
    Diverged { name: String, step: u64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("log has no column `{0}`")]
    MissingColumn(String),
    #[error("malformed log {path}: {reason}")]
    BadLog { path: PathBuf, reason: String },
    #[error(transparent)]
    Fit(FitError),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Self::Io { path, source }
    }

    /// Process exit code: 2 config, 3 diverged, 4 IO, 5 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::ConfigInvalid(_) => 2,
            Self::Diverged { .. } => 3,
            Self::Io { .. } => 4,
            Self::MissingColumn(_) | Self::BadLog { .. } | Self::Fit(_) => 5,
        }
    }
}

impl From<FitError> for HarnessError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::InvalidWindow(..) | FitError::InsufficientData { .. } => Self::ConfigInvalid(e.to_string()),
            other => Self::Fit(other),
        }
    }
}

impl From<sfplus_core::sf::ConfigError> for HarnessError {
    fn from(e: sfplus_core::sf::ConfigError) -> Self {
        Self::ConfigInvalid(e.to_string())
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
