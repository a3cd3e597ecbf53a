use thiserror::Error;

/// Errors raised by the numerical routines and the file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The polar form divides by the radius; states closer than `r_min` to the origin are rejected.
    #[error("state at radius {r:e} is inside the polar singularity guard r_min = {r_min:e}")]
    Singularity { r: f64, r_min: f64 },

    #[error("trajectory blew up at t = {t} (|x| = {norm:e})")]
    BlowUp { t: f64, norm: f64 },

    #[error("failed to trace the closed curve: {0}")]
    TraceFailure(String),

    #[error("parameters at t = {t} are not chronotaxic")]
    NotChronotaxic { t: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singularity { .. } | Error::BlowUp { .. } | Error::TraceFailure(_) | Error::NotChronotaxic { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
