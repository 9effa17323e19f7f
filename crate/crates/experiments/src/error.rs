use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("unknown figure `{0}` (expected one of fig3..fig10 or `all`)")]
    UnknownFigure(String),

    #[error(transparent)]
    Core(#[from] riss_core::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

pub(crate) fn config_error(path: impl Into<String>, message: impl Into<String>) -> ExperimentError {
    ExperimentError::Config {
        path: path.into(),
        message: message.into(),
    }
}
