use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input (bad lengths, invalid instance, ...).
    #[error("input error: {0}")]
    Input(String),

    /// A requested size exceeds a configured cap.
    #[error("resource error: {what} = {requested} exceeds cap {cap}")]
    Resource {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    /// An iterative method failed to reach its target.
    #[error("numerical error: {message} (residual {residual:.3e})")]
    Numerical { message: String, residual: f64 },

    /// A mathematical precondition of the operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The operation is gated on a condition that is false for this input.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>, residual: f64) -> Self {
        Error::Numerical {
            message: msg.into(),
            residual,
        }
    }
}
