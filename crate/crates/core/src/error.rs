use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dataset needs both labels present, found only {0:+}")]
    SingleClass(i8),

    #[error("need at least 2 support vectors with both labels, found {0}")]
    TooFewSupportVectors(usize),

    #[error("columns are not orthonormal (deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },

    #[error("barrier crossed: {barrier} = {value} is not strictly outside the spectrum [{min_eig}, {max_eig}]")]
    BarrierCrossed {
        barrier: &'static str,
        value: f64,
        min_eig: f64,
        max_eig: f64,
    },

    #[error("shifted matrix is singular: {0}")]
    SingularShift(String),

    #[error("no admissible column at iteration {iteration} of spectral sparsification\n{state}")]
    NoCandidate { iteration: usize, state: String },

    #[error("matrix with {cols} columns is too large to densify; use the sketched selector")]
    TooLargeForDense { cols: usize },

    #[error("svd did not converge")]
    SvdFailed,

    #[error("degenerate model: weight vector is zero")]
    DegenerateModel,

    #[error("{0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => ErrorClass::Usage,
            Error::NonFinite { .. }
            | Error::Parse { .. }
            | Error::SingleClass(_)
            | Error::TooFewSupportVectors(_)
            | Error::TooLargeForDense { .. }
            | Error::Io(_) => ErrorClass::Data,
            Error::NotOrthonormal { .. }
            | Error::BarrierCrossed { .. }
            | Error::SingularShift(_)
            | Error::NoCandidate { .. }
            | Error::SvdFailed
            | Error::DegenerateModel
            | Error::Numerical(_) => ErrorClass::Numerical,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
