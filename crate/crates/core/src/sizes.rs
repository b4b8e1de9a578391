//! Size comparison of one event set across representations.

use std::fmt;
use std::io::{self, Write};

use flate2::write::GzEncoder;
use flate2::Compression;

use crate::container::Writer;
use crate::error::Result;
use crate::ingest::write_ascii;
use crate::model::{EventRecord, FileDescriptor};

/// Per-event header of the fixed-width layout: number (u64), process (i32),
/// particle count (u32).
pub const FIXED_EVENT_HEADER_BYTES: u64 = 16;
/// Per-particle row of the fixed-width layout: px, py, pz, mass as f64 plus
/// pdg, status and four links as i32.
pub const FIXED_PARTICLE_BYTES: u64 = 4 * 8 + 6 * 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeReport {
    pub events: u64,
    pub particles: u64,
    pub ascii: u64,
    pub ascii_gzip: u64,
    pub fixed_width: u64,
    pub varint_container: u64,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        f64::NAN
    } else {
        a as f64 / b as f64
    }
}

impl SizeReport {
    pub fn varint_over_fixed(&self) -> f64 {
        ratio(self.varint_container, self.fixed_width)
    }

    pub fn ascii_over_fixed(&self) -> f64 {
        ratio(self.ascii, self.fixed_width)
    }

    pub fn gzip_over_fixed(&self) -> f64 {
        ratio(self.ascii_gzip, self.fixed_width)
    }

    pub fn ascii_over_varint(&self) -> f64 {
        ratio(self.ascii, self.varint_container)
    }

    pub fn gzip_over_varint(&self) -> f64 {
        ratio(self.ascii_gzip, self.varint_container)
    }
}

impl fmt::Display for SizeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "events: {}", self.events)?;
        writeln!(f, "particles: {}", self.particles)?;
        writeln!(f, "{:<24}{:>14}  {:>13}", "format", "bytes", "/fixed-width")?;
        for (name, bytes, r) in [
            ("ascii", self.ascii, self.ascii_over_fixed()),
            ("ascii gzip", self.ascii_gzip, self.gzip_over_fixed()),
            ("fixed-width", self.fixed_width, 1.0),
            (
                "varint container",
                self.varint_container,
                self.varint_over_fixed(),
            ),
        ] {
            writeln!(f, "{name:<24}{bytes:>14}  {r:>13.3}")?;
        }
        writeln!(f, "ascii/varint: {:.3}", self.ascii_over_varint())?;
        write!(f, "ascii gzip/varint: {:.3}", self.gzip_over_varint())
    }
}

#[derive(Default)]
struct CountingSink(u64);

impl Write for CountingSink {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0 += buf.len() as u64;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Measures `events` in every representation. Event numbers must run
/// 0..n, as the container requires.
pub fn measure(events: &[EventRecord], descriptor: &FileDescriptor) -> Result<SizeReport> {
    let scheme = descriptor.scheme;
    let particles: u64 = events.iter().map(|e| e.particles.len() as u64).sum();

    let mut ascii = Vec::new();
    write_ascii(&mut ascii, events, &scheme)?;
    let mut gz = GzEncoder::new(CountingSink::default(), Compression::default());
    gz.write_all(&ascii)?;
    let ascii_gzip = gz.finish()?.0;

    let mut writer = Writer::new(CountingSink::default(), descriptor.clone())?;
    for e in events {
        writer.append_event(e)?;
    }
    let (sink, _) = writer.finish()?;

    Ok(SizeReport {
        events: events.len() as u64,
        particles,
        ascii: ascii.len() as u64,
        ascii_gzip,
        fixed_width: events.len() as u64 * FIXED_EVENT_HEADER_BYTES
            + particles * FIXED_PARTICLE_BYTES,
        varint_container: sink.0,
    })
}
