use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("state norm {norm} differs from 1 by more than {tolerance:e}")]
    NotNormalized { norm: f64, tolerance: f64 },

    #[error("zero-norm amplitude vector cannot be normalized")]
    ZeroNorm,

    #[error("dimension {found} is below the minimum {min}")]
    DimensionTooSmall { found: usize, min: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("operator is not Hermitian: max |A - A^dagger| = {deviation:e} exceeds tolerance {tolerance:e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("no protective gap: protected level is degenerate (gap {gap:e} <= {tolerance:e})")]
    NoProtectiveGap { gap: f64, tolerance: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("pointer state is in {found} representation, expected {expected}")]
    WrongRepresentation {
        expected: &'static str,
        found: &'static str,
    },

    #[error("time {t} outside schedule window [0, {total}]")]
    TimeOutOfRange { t: f64, total: f64 },

    #[error("dense reference dimension {dim} exceeds the guard {limit}; use the split-step propagator")]
    ReferenceTooLarge { dim: usize, limit: usize },

    #[error("Zeno branch extinguished: survival probability {survival:e}")]
    ZenoExtinguished { survival: f64 },

    #[error("post-selection probability {probability:e} below threshold {threshold:e}")]
    PostSelectionFailed { probability: f64, threshold: f64 },

    #[error("insufficient support: only {count} masked-in points (need at least {min})")]
    InsufficientSupport { count: usize, min: usize },

    #[error("uninformative data: all expectation values are zero")]
    UninformativeData,

    #[error("protection failure: carried-state fidelity {fidelity} dropped below {threshold}")]
    ProtectionFailure { fidelity: f64, threshold: f64 },

    #[error("unknown sweep axis `{0}`")]
    UnknownAxis(String),

    #[error("eigen-decomposition failed: {0}")]
    Decomposition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
