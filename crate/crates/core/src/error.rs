use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("level {requested} exceeds the generated maximum level {max}")]
    Level { requested: u32, max: u32 },

    #[error("hoelder exponent {0} is outside (1/3, 1/2)")]
    Exponent(f64),

    #[error("time {0} is not a grid point")]
    Grid(f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite input: {0}")]
    Domain(String),

    #[error("rate fit failed: {0}")]
    Fit(String),

    #[error("{blowups} of {samples} samples blew up (more than 1%)")]
    BlowUp { blowups: usize, samples: usize },

    #[error("short-horizon condition {0} is violated")]
    HorizonCondition(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
