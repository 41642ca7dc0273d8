use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature order must be an even integer in [2, 24], got {0}")]
    InvalidOrder(usize),

    #[error("anisotropy factor must satisfy |g| < 1, got {0}")]
    InvalidAnisotropy(f64),

    #[error("degenerate medium: sigma_t = {sigma_t}, sigma_s = {sigma_s} (requires sigma_t > sigma_s >= 0)")]
    DegenerateMedium { sigma_t: f64, sigma_s: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("eigensolve failed for the {family}-family: {reason}")]
    NonRealSpectrum { family: char, reason: String },

    #[error("basis index {index} out of range (8M = {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("point ({x}, {y}) lies outside cell ({i}, {j})")]
    PointOutsideCell { x: f64, y: f64, i: usize, j: usize },

    #[error("interface {interface}: generating set is rank deficient (min |R_ii| / max |R_ii| = {ratio:e})")]
    RankDeficient { interface: usize, ratio: f64 },

    #[error("interface {interface}: mode matrix E is numerically singular")]
    SingularE { interface: usize },

    #[error("assembled system is not square: {rows} rows, {cols} columns")]
    CountMismatch { rows: usize, cols: usize },

    #[error("matrix is singular: no acceptable pivot in column {column} (row {row})")]
    SingularMatrix { column: usize, row: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (singular systems, bad spectra)
    /// as opposed to bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonRealSpectrum { .. }
                | Error::RankDeficient { .. }
                | Error::SingularE { .. }
                | Error::CountMismatch { .. }
                | Error::SingularMatrix { .. }
        )
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
