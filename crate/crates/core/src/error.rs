use std::io;

use thiserror::Error;

pub type Result<T, E = BeeError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum BeeError {
    /// A caller supplied an argument outside the operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// The operation is not valid in the object's current state.
    #[error("invalid state: {0}")]
    State(String),
    /// A non-finite value appeared. `layer` is the first network layer whose
    /// output went non-finite, when one is known.
    #[error("numeric error in {context}{}", layer.map(|l| format!(" (layer {l})")).unwrap_or_default())]
    Numeric {
        context: String,
        layer: Option<usize>,
    },
    #[error("capability not supported: {0}")]
    Capability(String),
    /// Every violated configuration field, one message per field.
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl BeeError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        BeeError::Argument(msg.into())
    }

    pub(crate) fn state(msg: impl Into<String>) -> Self {
        BeeError::State(msg.into())
    }

    pub(crate) fn numeric(context: impl Into<String>, layer: Option<usize>) -> Self {
        BeeError::Numeric {
            context: context.into(),
            layer,
        }
    }
}
