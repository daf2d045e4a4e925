use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("antisqueezing {asq} dB is below squeezing {sq} dB; the correlation would be imaginary")]
    AntisqueezingBelowSqueezing { sq: f64, asq: f64 },

    #[error("covariance matrix is not symmetric (largest asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("symplectic eigenvalue {0} is below 1; the state is unphysical")]
    Unphysical(f64),

    #[error("non-positive variance {0}")]
    NonPositiveVariance(f64),

    #[error("energy test threshold alpha = {alpha} exceeds mu_test * M = {limit}")]
    EnergyTestPrecondition { alpha: f64, limit: f64 },

    #[error("strings have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("strings were binned with different (M, delta)")]
    BinningMismatch,

    #[error("bin index {index} outside 1..={max}")]
    IndexOutOfRange { index: u32, max: u32 },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
