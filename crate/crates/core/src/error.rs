use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("structure has no critical set")]
    NoCriticalSet,

    #[error("form singular on critical set")]
    SingularForm,

    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("potential undefined: {0}")]
    Domain(String),

    #[error("Hamiltonian singular at s=0")]
    SingularHamiltonian,

    #[error("exponential overflow: lambda*t = {0} exceeds 700")]
    Overflow(f64),

    #[error("series too short: need at least 3 samples, got {0}")]
    SeriesTooShort(usize),

    #[error("invalid integrator config: {0}")]
    InvalidConfig(String),

    #[error("non-finite field evaluation at t={t}")]
    Blowup { t: f64 },

    #[error("adaptive step size fell below {h_min:e} at t={t}")]
    StepSizeUnderflow { t: f64, h_min: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fiber sample lies on the critical set")]
    FiberOnCriticalSet,

    #[error("time samples are not strictly increasing")]
    NonMonotoneTime,
}
