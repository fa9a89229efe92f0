//! Experiment runner behind the `drough` binary.
//!
//! Each command reads one [`ExperimentConfig`], writes its files into an
//! output directory and returns a process exit code: 0 on success, 1 when a
//! check or a solve fails, 2 for usage and I/O errors.

use std::fmt;

pub mod commands;
pub mod config;
pub mod output;

pub use config::ExperimentConfig;

#[derive(Debug)]
pub enum CliError {
    /// bad flags or config
    Usage(String),
    /// unreadable input or unwritable output
    Io(String),
    /// a numerical check failed
    Check(String),
    Library(drough::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Check(_) => 1,
            CliError::Library(drough::Error::Io(_) | drough::Error::Format(_)) => 2,
            CliError::Library(_) => 1,
            CliError::Usage(_) | CliError::Io(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Io(m) => write!(f, "i/o: {m}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
            CliError::Library(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<drough::Error> for CliError {
    fn from(e: drough::Error) -> Self {
        CliError::Library(e)
    }
}
