use thiserror::Error;

use crate::data::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors surfaced while loading data, fitting, or evaluating hazard models.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}{}: {message}", subject_suffix(.subject))]
    Parse {
        line: u64,
        subject: Option<String>,
        message: String,
    },
    #[error("no samples")]
    NoSamples,
    #[error("no observed events; F0 undefined")]
    NoEvents,
    #[error("dataset failed validation:\n{0}")]
    InvalidDataset(ValidationReport),
    #[error("unknown label `{label}` in categorical column `{column}`")]
    UnknownLabel { column: String, label: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model file line {line}: {message}")]
    ModelFormat { line: usize, message: String },
    #[error("trajectory does not reach t = {t} (covered up to {covered})")]
    TrajectoryTooShort { t: f64, covered: f64 },
    #[error("AUC undefined at t = {t}: no comparable pairs")]
    AucUndefined { t: f64 },
    #[error("length mismatch: {left} predictions vs {right} truths")]
    LengthMismatch { left: usize, right: usize },
    #[error("t = {t} outside hazard support (0, {horizon}]")]
    OutOfSupport { t: f64, horizon: f64 },
    #[error("could not draw a bootstrap resample with an event after {attempts} attempts")]
    BootstrapExhausted { attempts: usize },
}

fn subject_suffix(subject: &Option<String>) -> String {
    match subject {
        Some(id) => format!(" (subject {id})"),
        None => String::new(),
    }
}
