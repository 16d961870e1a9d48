//! CLI error type mapping every failure to one of the documented exit codes:
//! 1 for validation problems (arguments, config, shapes), 2 for I/O, 3 for
//! numerical failures.

use std::fmt;

/// A command failure carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, config values, or shape mismatches (exit code 1).
    Validation(String),
    /// File-system or format problems (exit code 2).
    Io(String),
    /// Non-finite numbers or diverging computations (exit code 3).
    Numerical(String),
}

impl CliError {
    /// The process exit code for this failure.
    pub fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "{m}"),
            CliError::Numerical(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<blockconv::Error> for CliError {
    fn from(e: blockconv::Error) -> Self {
        match e {
            blockconv::Error::NonFinite(m) => CliError::Numerical(m),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_match_the_contract() {
        assert_eq!(CliError::Validation("x".into()).code(), 1);
        assert_eq!(CliError::Io("x".into()).code(), 2);
        assert_eq!(CliError::Numerical("x".into()).code(), 3);
    }

    #[test]
    fn library_errors_map_by_kind() {
        let e: CliError = blockconv::Error::NonFinite("boom".into()).into();
        assert_eq!(e.code(), 3);
        let e: CliError = blockconv::Error::Contract("bad".into()).into();
        assert_eq!(e.code(), 1);
        let e: CliError = blockconv::Error::Shape("bad".into()).into();
        assert_eq!(e.code(), 1);
    }
}
