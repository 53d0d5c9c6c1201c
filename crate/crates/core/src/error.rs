use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular input: {0}")]
    Singular(&'static str),

    #[error("step size underflow at t = {t:e} s (h = {h:e} s)")]
    Stiffness { t: f64, h: f64 },

    #[error("non-finite state encountered at t = {t:e} s")]
    Divergence { t: f64 },

    #[error("trajectory too short: need {needed} samples in the window, have {available}")]
    TooShort { needed: usize, available: usize },

    #[error("non-uniform sampling (spacing deviates by {deviation:e} relative)")]
    NonUniform { deviation: f64 },

    #[error("invalid bisection bracket [{lo:e}, {hi:e}]")]
    InvalidBracket { lo: f64, hi: f64 },

    #[error("eigensolver failed to converge on {rows}x{cols} matrix: {matrix:?}")]
    Eigen { rows: usize, cols: usize, matrix: Vec<f64> },

    #[error("Hilbert space too large: dimension {dim} exceeds {max}")]
    DimensionOverflow { dim: usize, max: usize },

    #[error("photon truncation overflow at t = {t:e} s: top Fock population {population:e}")]
    TruncationOverflow { t: f64, population: f64 },

    #[error("unsupported schema version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupt file {path}: {reason} (at byte {offset})")]
    Corrupt { path: PathBuf, offset: usize, reason: String },

    #[error("grid mismatch: checkpoint hash {found} does not match requested grid {expected}")]
    GridMismatch { found: String, expected: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// True for failures of the numerics rather than of the inputs or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Stiffness { .. }
                | Error::Divergence { .. }
                | Error::Eigen { .. }
                | Error::TruncationOverflow { .. }
        )
    }
}
