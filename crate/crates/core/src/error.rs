use alloc::string::String;
use thiserror::Error;

/// Errors raised by belief updating, VOI estimation and the oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("item {item} is known exactly and cannot be measured")]
    KnownItemMeasurement { item: usize },

    #[error("index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precision matrix is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("{count} candidate batches exceed the enumeration limit {limit}")]
    EnumerationLimit { count: u128, limit: u64 },

    #[error("instance exceeds the oracle tractability guard: {0}")]
    Intractable(String),

    #[error("value-of-information function for item {item} is not non-decreasing")]
    NonMonotone { item: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
