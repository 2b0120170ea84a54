use crate::field::Domain;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("expected a field in the {expected:?} domain, found {found:?}")]
    DomainMismatch { expected: Domain, found: Domain },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("layout error: {0}")]
    Layout(String),

    #[error("statistics error: {0}")]
    Statistics(String),

    #[error("degenerate measurement: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training diverged at step {step} (loss = {loss})")]
    TrainingDiverged { step: usize, loss: f64 },

    #[error("unknown disk id {0}")]
    UnknownDisk(usize),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub(crate) fn dimension(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}

pub(crate) fn parameter(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
