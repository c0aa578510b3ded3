use cpde_core::CoreError;

/// CLI-level errors mapped onto the exit-code contract:
/// 0 success, 2 usage/parse, 3 numeric failure.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad config keys, malformed input files.
    Usage(String),
    /// Parse failure with a line number.
    Parse { line: usize, message: String },
    Io(std::io::Error),
    Core(CoreError),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn usage(msg: &str) -> Self {
        CliError::Usage(msg.to_string())
    }

    pub fn parse(line: usize, msg: &str) -> Self {
        CliError::Parse {
            line,
            message: msg.to_string(),
        }
    }

    /// Exit code per the documented contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse { .. } | CliError::Io(_) => 2,
            CliError::Core(core) => match core {
                CoreError::Diverged { .. }
                | CoreError::Unstable { .. }
                | CoreError::BlowUp { .. }
                | CoreError::NonFinite { .. }
                | CoreError::Singular(_) => 3,
                _ => 2,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Parse { line, message } => write!(f, "line {line}: {message}"),
            CliError::Io(e) => write!(f, "io: {e}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}
