use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sampling grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("covariance matrix {index} is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { index: usize, deviation: f64 },

    #[error(
        "covariance matrix {index} is not positive definite \
         (min eigenvalue {min_eigenvalue:e}, floor {floor:e})"
    )]
    NotPositiveDefinite {
        index: usize,
        min_eigenvalue: f64,
        floor: f64,
    },

    #[error("invalid moving-average window: half-width {half_width} with {freq_bins} frequency bins ({reason})")]
    InvalidWindow {
        half_width: usize,
        freq_bins: usize,
        reason: &'static str,
    },

    #[error("signal is identically zero; the upper-bound law is degenerate")]
    DegenerateSignal,

    #[error("quadrature failed at x = {x}: {detail}")]
    QuadratureFailure { x: f64, detail: String },

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
