use std::fmt;

/// Command failure, grouped by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or an incompatible combination (exit 1).
    Usage(String),
    /// Unreadable, malformed or inconsistent inputs (exit 2).
    Data(String),
    /// A solver or trainer hit a numerical failure (exit 3).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<risbeam::Error> for CliError {
    fn from(e: risbeam::Error) -> Self {
        use risbeam::Error as E;
        let msg = e.to_string();
        match e {
            E::Singular { .. }
            | E::ZeroDenominator(_)
            | E::MonotonicityViolation { .. }
            | E::NonFiniteLoss { .. }
            | E::Diverged { .. } => CliError::Numerical(msg),
            _ => CliError::Data(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
