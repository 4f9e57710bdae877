use thiserror::Error;

/// Errors raised by the numerical kernels and the design pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    Dimension {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("{op}: matrix is not square ({rows}x{cols})")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("{op}: matrix is not Hermitian (max asymmetry {residual:.3e})")]
    NotHermitian { op: &'static str, residual: f64 },

    #[error("{op}: non-finite entry at ({row}, {col})")]
    NonFinite {
        op: &'static str,
        row: usize,
        col: usize,
    },

    #[error("nearest unitary is not unique: matrix is rank deficient (sigma_min/sigma_max = {ratio:.3e})")]
    RankDeficient { ratio: f64 },

    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("quadratic form has imaginary residue {imag:.3e} against magnitude {magnitude:.3e}")]
    ComplexResidue { imag: f64, magnitude: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
