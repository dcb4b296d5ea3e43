use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] geotopo::Error),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: u64, message: String },
    #[error("incomplete grid: no value for time {time}, condition {condition:?}, channel {channel:?}")]
    IncompleteGrid { time: f64, condition: String, channel: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Parse { .. } => "cli.parse_error",
            CliError::IncompleteGrid { .. } => "cli.incomplete_grid",
            CliError::Io { .. } => "cli.io_error",
            CliError::Config(_) => "cli.invalid_config",
        }
    }

    pub fn parse(path: &str, line: u64, message: impl Into<String>) -> Self {
        CliError::Parse { path: path.to_string(), line, message: message.into() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
