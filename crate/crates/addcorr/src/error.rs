use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument was outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A table or sweep would exceed the configured memory/size budget.
    #[error("resource limit exceeded: needs {required} bytes, cap is {cap} bytes")]
    Resource { required: u64, cap: u64 },

    /// Two routes that must agree numerically did not. This signals an
    /// implementation bug, never an expected condition.
    #[error("consistency error: {0}")]
    Consistency(String),

    /// A value did not fit in the requested integer width.
    #[error("overflow: {0}")]
    Overflow(String),

    /// The operation is defined but deliberately not supported for the input.
    #[error("unsupported parameter: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
