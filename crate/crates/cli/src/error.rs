use std::fmt;

use oae_core::Error;

/// A failure with its process exit code: 2 configuration, 3 numerics, 4 I/O.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub const CONFIG: u8 = 2;
    pub const NUMERIC: u8 = 3;
    pub const IO: u8 = 4;

    pub fn config(msg: impl Into<String>) -> Self {
        CliError { code: Self::CONFIG, message: msg.into() }
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        CliError { code: Self::NUMERIC, message: msg.into() }
    }

    pub fn io(msg: impl Into<String>) -> Self {
        CliError { code: Self::IO, message: msg.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) | Error::Parse { .. } => Self::IO,
            Error::InvalidParam(_) | Error::Contract(_) => Self::CONFIG,
            Error::AtStep { source, .. } if !source.is_numeric() && !matches!(**source, Error::Io(_)) => Self::CONFIG,
            _ => Self::NUMERIC,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_follow_the_error_class() {
        assert_eq!(CliError::from(Error::InvalidParam("x".into())).code, 2);
        assert_eq!(CliError::from(Error::SingularGram { max_jitter: 1e-6 }).code, 3);
        assert_eq!(CliError::from(Error::Degenerate("x".into())).code, 3);
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(CliError::from(Error::Io(io)).code, 4);
        let nested = Error::AtStep { step: 3, source: Box::new(Error::NonFinite { context: "loss".into() }) };
        assert_eq!(CliError::from(nested).code, 3);
    }
}
