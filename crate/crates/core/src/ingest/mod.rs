//! Event sources: HepMC2 ASCII input and a synthetic signal + pileup
//! generator.

mod generator;
mod hepmc;

use thiserror::Error;

pub use generator::{EventGenerator, SpectrumConfig, HARD_MASS_GEV, PION_MASS_GEV};
pub use hepmc::{
    parse_ascii_stream, to_event_record, write_ascii, AsciiEvent, AsciiParser, AsciiParticle,
    AsciiVertex, ConversionReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("line {line}: malformed {kind} line at token {token:?}: {reason}")]
    MalformedLine {
        line: usize,
        kind: char,
        token: String,
        reason: String,
    },
    #[error("line {line}: particle {barcode} cites unknown vertex {vertex}")]
    DanglingReference {
        line: usize,
        barcode: i64,
        vertex: i64,
    },
    #[error("line {line}: unsupported units {found:?}, only GEV MM is accepted")]
    Units { line: usize, found: String },
    #[error("line {line}: {message}")]
    Inconsistent { line: usize, message: String },
    #[error("invalid generator configuration: {0}")]
    Config(String),
    #[error("read error at line {line}: {message}")]
    Read { line: usize, message: String },
}
