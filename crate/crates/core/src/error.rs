use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its documented range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A lookup was requested outside the table horizon.
    #[error("time {t} lies outside the table horizon [0, {horizon}]")]
    OutOfHorizon { t: f64, horizon: f64 },

    /// A transition kernel row is not a probability vector.
    #[error("kernel for u={control} is not row-stochastic at row {row}: {detail}")]
    KernelNotStochastic {
        control: u8,
        row: usize,
        detail: String,
    },

    /// The Bloch-plane integrator left the unit disc.
    #[error("integration failure at step {step}: r = {r} exceeds 1")]
    Integration { step: usize, r: f64 },

    /// A table or cost-grid file failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
