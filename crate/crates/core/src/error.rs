use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("tuning parameter m must be positive, got {0}")]
    InvalidM(f64),
    #[error("family {0} requires parameter `{1}`")]
    MissingParameter(&'static str, &'static str),
    #[error("step index must be at least 1")]
    ZeroStep,
    #[error("step {k} exceeds boundary horizon {horizon}")]
    HorizonExceeded { k: u64, horizon: u64 },
    #[error("p-value {0} outside [0, 1]")]
    InvalidPValue(f64),
    #[error("statistic must be finite, got {0}")]
    NonFinite(f64),
    #[error("calibrator parameter must lie in (0, 1), got {0}")]
    InvalidCalibrator(f64),
    #[error("mask pair (bit {bit}, masked {masked}) is inconsistent with the scheme")]
    InconsistentPair { bit: f64, masked: f64 },
    #[error("root search failed: {0}")]
    RootNotFound(&'static str),
    #[error("combiner {combiner} is incompatible with boundary family {family}")]
    Incompatible { combiner: &'static str, family: &'static str },
    #[error("hypothesis {0} is unknown")]
    UnknownHypothesis(usize),
    #[error("hypothesis {0} was already picked")]
    AlreadyPicked(usize),
    #[error("duplicate hypothesis id {0}")]
    DuplicateId(usize),
    #[error("session stopped")]
    Stopped,
    #[error("weights sum to {0}, above alpha")]
    WeightsTooLarge(f64),
    #[error("invalid threshold {0}")]
    InvalidThreshold(f64),
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("unsupported configuration: {0}")]
    Unsupported(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
