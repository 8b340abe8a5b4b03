use std::fmt;

/// Command failure, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unknown keys, invalid values. Exit code 2.
    Config(String),
    /// Non-finite values during training. Exit code 3.
    Numeric(String),
    /// A check ran and failed, or an I/O step failed. Exit code 1.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<trust_pcl::Error> for CliError {
    fn from(e: trust_pcl::Error) -> Self {
        use trust_pcl::Error;
        match e {
            Error::Config(m) => CliError::Config(m),
            Error::Numeric(m) => CliError::Numeric(m),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(format!("i/o error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Failed(format!("json error: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
