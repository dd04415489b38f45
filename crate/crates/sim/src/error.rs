use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// Bad profiles, parameters or fixture contents.
    #[error("input error: {0}")]
    Input(String),
    /// The service could not be reached at all.
    #[error("service unreachable: {0}")]
    Environment(String),
    #[error("{method} {path} returned {status}: {body}")]
    Http { method: String, path: String, status: u16, body: String },
    /// The service answered, but not in the shape this client expects.
    #[error("unexpected response: {0}")]
    Protocol(String),
}

impl SimError {
    pub fn status(&self) -> Option<u16> {
        match self {
            SimError::Http { status, .. } => Some(*status),
            _ => None,
        }
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
