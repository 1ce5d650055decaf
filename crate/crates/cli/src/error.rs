use std::fmt;

/// A failure with the process exit code it maps to: 1 for invalid input or
/// I/O problems, 2 for numerical failures.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<tcadetect::Error> for CliError {
    fn from(e: tcadetect::Error) -> Self {
        let code = match e {
            tcadetect::Error::QuadratureFailure { .. } => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::invalid(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
