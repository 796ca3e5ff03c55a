use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] gnt_core::Error),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("method {method} cannot run on a {layout} scenario")]
    Layout { method: &'static str, layout: &'static str },
    #[error("unknown figure `{0}`")]
    UnknownFigure(String),
    #[error("invalid condition inputs: {0}")]
    Condition(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
