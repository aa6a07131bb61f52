use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max elementwise deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (||U^dag U - I||_F = {0:e})")]
    NotUnitary(f64),

    /// Two or more eigenphases sit on the logarithm branch cut and no hint
    /// was supplied to pick their branches.
    #[error("eigenphase branch is ambiguous at the cut; a branch hint is required")]
    BranchAmbiguity,

    #[error("parameter vector has length {found}, expected {expected}")]
    ParamLength { expected: usize, found: usize },

    #[error("irregular point at record {index}: projected pre-variation ratio {ratio:e}")]
    IrregularPoint { index: usize, ratio: f64 },

    #[error("measured step {measured:e} deviates from ideal {ideal:e} at record {index}")]
    StepDeviation { index: usize, measured: f64, ideal: f64 },

    #[error("maximum iteration count {0} exceeded")]
    MaxItersExceeded(usize),

    #[error("theta {theta} outside the recorded range [{lo}, {hi}]")]
    OutOfRange { theta: f64, lo: f64, hi: f64 },

    #[error("line search failed to find a descent step at iteration {iter}")]
    NoDescent { iter: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
