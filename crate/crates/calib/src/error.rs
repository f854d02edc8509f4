use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    /// Value outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed argument (bad length, bad index, bad count).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Operation called in a state that does not permit it.
    #[error("invalid state: {0}")]
    State(String),

    /// A model evaluation failed; carries the offending assignment.
    #[error("evaluation failed for assignment {assignment:?}: {message}")]
    Evaluation {
        assignment: Vec<f64>,
        message: String,
    },

    /// Configuration file problem.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
