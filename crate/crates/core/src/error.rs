use thiserror::Error;

/// Errors surfaced by the simulator core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("antenna table needs {needed} patterns but only {available} exist")]
    TableCapacity { needed: u64, available: u64 },

    #[error("combination rank {rank} out of range for C({n},{k}) = {count}")]
    RankOutOfRange { rank: u64, n: usize, k: usize, count: u64 },

    #[error("malformed {k}-subset of [0,{n})")]
    BadCombination { n: usize, k: usize },

    #[error("frame is not in the legal codebook: {0}")]
    IllegalFrame(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("ML search space {size} exceeds cap {cap}")]
    SearchSpaceExceeded { size: f64, cap: f64 },

    #[error("weights file: {0}")]
    WeightsFormat(String),

    #[error("dataset file: {0}")]
    DatasetFormat(String),

    #[error("training diverged at step {step} (loss = {loss})")]
    Divergence { step: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
