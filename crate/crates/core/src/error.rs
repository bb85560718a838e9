use crate::data::DataError;
use crate::dp::DpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("release does not support this request: {0}")]
    Release(String),
    #[error("phase ordering: {0}")]
    PhaseOrder(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
