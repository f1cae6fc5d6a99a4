use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the function.
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    /// The requested evaluation falls outside the range where the
    /// series evaluation is trustworthy.
    #[error("unstable numerical regime in {func}: {detail}")]
    UnstableRegime { func: &'static str, detail: String },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// A `xi` function was called with the wrong ordering of standard deviations.
    #[error("wrong branch: {0}")]
    WrongBranch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("root not bracketed in {func}: f(lo)={f_lo}, f(hi)={f_hi}")]
    NotBracketed {
        func: &'static str,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("{path}: line {line}: {detail}")]
    Parse {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            func,
            detail: detail.into(),
        }
    }

    pub(crate) fn unstable(func: &'static str, detail: impl Into<String>) -> Self {
        Error::UnstableRegime {
            func,
            detail: detail.into(),
        }
    }

    /// Whether this error stems from numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::UnstableRegime { .. } | Error::NotBracketed { .. }
        )
    }
}
