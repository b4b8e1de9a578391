//! Compact, self-describing, randomly accessible event files.
//!
//! Events are stored as varint-packed columnar records inside an
//! uncompressed ZIP archive, one entry per event, with an index entry for
//! selection without touching event payloads.

pub mod container;
pub mod error;
pub mod ingest;
pub mod model;
pub mod quant;
pub mod schema;
pub mod sizes;
pub mod source;
pub mod wire;

pub use container::{EventIndex, Reader, WriteSummary, Writer};
pub use error::{Error, Result};
pub use model::{EventRecord, FileDescriptor, FileStatistics, Particle, ParticleBlock};
pub use quant::QuantizationScheme;
#[cfg(feature = "http")]
pub use source::HttpSource;
pub use source::{ByteSource, CountingSource, FileSource, MemorySource};
