use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate field: drive amplitude and detuning are both zero")]
    DegenerateField,

    #[error("phase undefined for a zero-length Bloch vector")]
    UndefinedPhase,

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate reference: coherence without noise is zero")]
    DegenerateReference,

    #[error("realization {id} failed: {source}")]
    Realization {
        id: u64,
        #[source]
        source: Box<SimError>,
    },
}

pub type Result<T> = std::result::Result<T, SimError>;

pub(crate) fn invalid(msg: impl Into<String>) -> SimError {
    SimError::InvalidArgument(msg.into())
}
