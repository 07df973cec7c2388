use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A caller broke an operation's precondition (dimension mismatch,
    /// out-of-range index, malformed model).
    #[error("contract violation: {0}")]
    Contract(String),
    /// A computation produced a non-finite value or failed to converge.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// SFOLS exceeded its iteration cap before the queue drained.
    #[error("iteration cap of {0} exceeded")]
    CapExceeded(usize),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
