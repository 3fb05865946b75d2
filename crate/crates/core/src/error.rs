use thiserror::Error;

/// Library-wide error type. The CLI maps these onto exit codes: parameter
/// and encoding problems are validation errors, execution-model breakage is
/// a model violation, and attack failures are reported as inconclusive.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input has {got} bits but the oracle width is {want}")]
    InputWidth { want: usize, got: usize },

    #[error("input {i} outside the domain 0..={ell}")]
    Domain { i: u64, ell: u64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("no suffix matches the committed digest; not a preprocess output")]
    NotPreprocessOutput,

    #[error("process {pid} has already completed and cannot take a step")]
    AlreadyDone { pid: usize },

    #[error("process {pid} exceeded its step bound {bound} without completing")]
    WaitFreedomViolation { pid: usize, bound: u64 },

    #[error("process {pid} completed without a decision value")]
    NoDecision { pid: usize },

    #[error("schedule references unknown process {pid}")]
    UnknownProcess { pid: usize },

    #[error("register {index} out of range (configuration has {count})")]
    RegisterRange { index: usize, count: usize },

    #[error("execution model violation: {0}")]
    ModelViolation(String),

    #[error("attack inconclusive: {0}")]
    AttackInconclusive(String),

    #[error("encoding error: {0}")]
    Encoding(String),
}

pub type Result<T> = std::result::Result<T, Error>;
