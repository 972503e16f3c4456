use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("channel length mismatch: ecg has {ecg} samples, ip has {ip}")]
    LengthMismatch { ecg: usize, ip: usize },

    #[error("non-finite value {value} at {location}")]
    NonFinite { location: String, value: f64 },

    #[error("duplicate row for subject {subject} in position {position}")]
    DuplicateKey { subject: String, position: String },

    #[error("{name} = {value} is out of range ({expected})")]
    OutOfRange {
        name: String,
        value: f64,
        expected: &'static str,
    },

    #[error("input too short: {0}")]
    TooShort(String),

    #[error("too few observations: need at least {needed}, got {got} ({what})")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid sample rate {0} Hz")]
    SampleRate(f64),

    #[error("no detectable beats")]
    NoBeats,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite {
            location: format!("{what}[{i}]"),
            value: values[i],
        }),
        None => Ok(()),
    }
}
