use thiserror::Error;

/// Crate-wide error type. Shape mismatches in the numeric kernels are
/// programmer errors and panic via `assert!`; everything that can go wrong
/// with user-supplied data or configs lands here.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dataset format error: {0}")]
    Format(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite values encountered in {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 for configuration and data problems,
    /// 2 for numerical failures mid-run.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
