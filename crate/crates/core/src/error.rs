use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed table: {0}")]
    Csv(#[from] csv::Error),
    #[error("target column `{0}` not found")]
    TargetMissing(String),
    #[error("target column `{name}` has {classes} classes after encoding, expected 2")]
    TargetNotBinary { name: String, classes: usize },
    #[error("table is empty after handling missing values")]
    EmptyTable,
    #[error("class {class} has {count} rows, stratified split needs at least 2")]
    ClassTooSmall { class: u8, count: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{n} atoms exceed the simulator limit of {max}")]
    TooManyAtoms { n: usize, max: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("optimizer diverged at step {step} (loss {loss})")]
    Diverged { step: usize, loss: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
