use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("sequence number {got} does not follow {last}")]
    OutOfOrder { last: u64, got: u64 },
    #[error("{0}")]
    Rejected(String),
    #[error(transparent)]
    Core(#[from] interrl::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = GatewayError> = std::result::Result<T, E>;
