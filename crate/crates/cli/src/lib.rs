//! Stage orchestration for the `qfs` binary: config handling, JSON
//! checkpoints between stages and CSV emission for plotting.

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod stages;

pub use config::RunConfig;
pub use stages::{run_stage, Stage};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing artifact {}; run the producing stage first", .0.display())]
    MissingArtifact(PathBuf),
    #[error("unreadable artifact {}: {reason}", .path.display())]
    CorruptArtifact { path: PathBuf, reason: String },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write {}: {source}", .path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 0 success, 2 config, 3 missing artifact, 4 validation, 5 numerical;
    /// 1 is left for output I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::MissingArtifact(_) | CliError::CorruptArtifact { .. } => 3,
            CliError::Validation(_) => 4,
            CliError::Numerical(_) => 5,
            CliError::Output { .. } => 1,
        }
    }
}

impl From<qfs_core::Error> for CliError {
    fn from(e: qfs_core::Error) -> Self {
        use qfs_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Io { .. } | E::InvalidParameter(_) => CliError::Config(msg),
            E::NonFinite(_) | E::Diverged { .. } => CliError::Numerical(msg),
            E::Csv(_)
            | E::TargetMissing(_)
            | E::TargetNotBinary { .. }
            | E::EmptyTable
            | E::ClassTooSmall { .. }
            | E::LengthMismatch { .. }
            | E::Empty(_)
            | E::TooManyAtoms { .. } => CliError::Validation(msg),
        }
    }
}
