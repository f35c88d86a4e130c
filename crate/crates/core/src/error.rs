use alloc::string::String;

/// Errors raised by the simulation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("frame rejected: {0}")]
    FrameRejected(String),
    #[error("training diverged at epoch {epoch}: loss is not finite (learning rate too high?)")]
    Diverged { epoch: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($fmt:tt)+) => {
        if !($cond) {
            return Err($crate::Error::$variant(alloc::format!($($fmt)+)));
        }
    };
}
pub(crate) use ensure;
