use dobc_core::Error as CoreError;

/// Failure classes mapped to process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad or missing configuration, profile, flag or input file (exit 2).
    #[error("configuration error: {0}")]
    Config(String),
    /// The run itself failed (exit 1).
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    /// Parameter problems are configuration errors; numerical ones are not.
    pub fn from_core(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter { .. }
            | CoreError::Improper { .. }
            | CoreError::FilterOrderTooLow { .. }
            | CoreError::UnknownCase(_)
            | CoreError::ZeroPolynomial => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }

    pub fn io(context: &str, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{context}: {e}"))
    }
}
