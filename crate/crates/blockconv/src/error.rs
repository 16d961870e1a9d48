//! Error type shared across the library.

use thiserror::Error;

/// Library-wide error enumeration.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's documented range or sign contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Array dimensions do not line up with what the operation expects.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Dense-matrix construction would exceed the configured memory budget.
    #[error("dense model needs {required} bytes but the budget is {budget} bytes")]
    MemoryBudget { required: u128, budget: u128 },

    /// A numerical routine produced a non-finite intermediate value.
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
}

/// Convenience alias used by every fallible operation in this crate.
pub type Result<T> = std::result::Result<T, Error>;
