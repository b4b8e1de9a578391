use std::io;

use thiserror::Error;

use crate::ingest::IngestError;
use crate::quant::QuantError;
use crate::schema::SchemaError;
use crate::wire::WireError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u64),
    #[error("not an archive: {0}")]
    NotAnArchive(String),
    #[error("archive has no header entry")]
    MissingHeader,
    #[error("archive has no index entry")]
    MissingIndex,
    #[error("archive has no statistics entry")]
    MissingStatistics,
    #[error("event {index} out of range (file has {len} events)")]
    OutOfRange { index: u64, len: u64 },
    #[error("crc mismatch entry '{entry}'")]
    ChecksumMismatch { entry: String },
    #[error("usage error: {0}")]
    Usage(String),
    #[error("archive limit exceeded: {0}")]
    LimitExceeded(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::InvariantViolation(msg.into())
    }

    pub(crate) fn malformed(msg: impl Into<String>) -> Self {
        Error::Malformed(msg.into())
    }
}
