//! Library surface of the command-line tool; commands are callable
//! directly so integration tests can run them in-process.

pub mod commands;
pub mod config;
pub mod store;

pub use config::{RunConfig, TheoremConfig};

/// Command failure split by exit code: usage/config errors exit 2,
/// runtime failures exit 1.
#[derive(Debug)]
pub enum CmdError {
    Usage(String),
    Runtime(String),
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CmdError::Usage(m) => write!(f, "{m}"),
            CmdError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CmdError {}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Usage(_) => 2,
            CmdError::Runtime(_) => 1,
        }
    }
}

impl From<deltrend::Error> for CmdError {
    fn from(e: deltrend::Error) -> Self {
        CmdError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CmdError {
    fn from(e: csv::Error) -> Self {
        CmdError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CmdError {
    fn from(e: serde_json::Error) -> Self {
        CmdError::Runtime(e.to_string())
    }
}

pub type CmdResult = Result<(), CmdError>;
