//! Event, particle and file-level records and their message encodings.
//!
//! Particle attributes are stored column-wise. Every numeric column becomes
//! one packed varint field, so a block of soft particles turns into long runs
//! of short varints.

use crate::error::{Error, Result};
use crate::quant::QuantizationScheme;
use crate::schema;
use crate::wire::{
    read_message_fields, read_packed_varints, read_packed_zigzag, write_bytes_field,
    write_double_field, write_packed_varints, write_packed_zigzag, write_varint_field,
    zigzag_decode, zigzag_encode, RawField, WireType,
};

pub const FORMAT_VERSION: u32 = 1;

/// Field numbers, frozen for format version 1.
pub mod field {
    pub mod event {
        pub const EVENT_NUMBER: u32 = 1;
        pub const PROCESS_ID: u32 = 2;
        pub const WEIGHT: u32 = 3;
        pub const PARTICLES: u32 = 4;
    }

    pub mod particles {
        pub const PDG_ID: u32 = 1;
        pub const STATUS: u32 = 2;
        pub const PX: u32 = 3;
        pub const PY: u32 = 4;
        pub const PZ: u32 = 5;
        pub const MASS: u32 = 6;
        pub const MOTHER1: u32 = 7;
        pub const MOTHER2: u32 = 8;
        pub const DAUGHTER1: u32 = 9;
        pub const DAUGHTER2: u32 = 10;
        pub const BARCODE: u32 = 11;
        pub const X: u32 = 12;
        pub const Y: u32 = 13;
        pub const Z: u32 = 14;
        pub const T: u32 = 15;
    }

    pub mod descriptor {
        pub const FORMAT_VERSION: u32 = 1;
        pub const DESCRIPTION: u32 = 2;
        pub const UNITS: u32 = 3;
        pub const REQUESTED_EVENTS: u32 = 4;
        pub const SCHEMA_TEXT: u32 = 5;
    }

    pub mod index {
        pub const PARTICLE_COUNT: u32 = 1;
        pub const MAX_PT: u32 = 2;
    }

    pub mod statistics {
        pub const ACTUAL_EVENTS: u32 = 1;
        pub const TOTAL_PARTICLES: u32 = 2;
    }
}

/// One particle, as a row view over a [`ParticleBlock`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Particle {
    pub pdg_id: i32,
    pub status: u32,
    /// Quantized momentum components and mass, in momentum-unit steps.
    pub px: i64,
    pub py: i64,
    pub pz: i64,
    pub mass: i64,
    /// 0-based indices into the same block.
    pub mothers: [Option<u32>; 2],
    pub daughters: [Option<u32>; 2],
    pub barcode: Option<i64>,
    /// Production vertex (x, y, z, t) in length-unit steps.
    pub vertex: Option<[i64; 4]>,
}

impl Particle {
    /// Transverse momentum in momentum-unit steps, rounded to nearest.
    pub fn pt_quantized(&self) -> u64 {
        pt_quantized(self.px, self.py)
    }
}

pub fn pt_quantized(px: i64, py: i64) -> u64 {
    let (x, y) = (px as f64, py as f64);
    (x * x + y * y).sqrt().round() as u64
}

/// Columnar particle storage for one event.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParticleBlock {
    pub pdg_id: Vec<i32>,
    pub status: Vec<u32>,
    pub px: Vec<i64>,
    pub py: Vec<i64>,
    pub pz: Vec<i64>,
    pub mass: Vec<i64>,
    pub mother1: Vec<Option<u32>>,
    pub mother2: Vec<Option<u32>>,
    pub daughter1: Vec<Option<u32>>,
    pub daughter2: Vec<Option<u32>>,
    /// Optional: empty or one entry per particle.
    pub barcode: Vec<i64>,
    pub x: Vec<i64>,
    pub y: Vec<i64>,
    pub z: Vec<i64>,
    pub t: Vec<i64>,
}

impl ParticleBlock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.pdg_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends a particle. Optional attributes must be given for all
    /// particles of a block or for none; [`validate`](Self::validate)
    /// catches mixtures.
    pub fn push(&mut self, p: &Particle) {
        self.pdg_id.push(p.pdg_id);
        self.status.push(p.status);
        self.px.push(p.px);
        self.py.push(p.py);
        self.pz.push(p.pz);
        self.mass.push(p.mass);
        self.mother1.push(p.mothers[0]);
        self.mother2.push(p.mothers[1]);
        self.daughter1.push(p.daughters[0]);
        self.daughter2.push(p.daughters[1]);
        if let Some(b) = p.barcode {
            self.barcode.push(b);
        }
        if let Some([x, y, z, t]) = p.vertex {
            self.x.push(x);
            self.y.push(y);
            self.z.push(z);
            self.t.push(t);
        }
    }

    /// Row view of particle `i`. Panics if `i` is out of bounds.
    pub fn get(&self, i: usize) -> Particle {
        let has_vertex = [&self.x, &self.y, &self.z, &self.t]
            .iter()
            .all(|c| !c.is_empty());
        Particle {
            pdg_id: self.pdg_id[i],
            status: self.status[i],
            px: self.px[i],
            py: self.py[i],
            pz: self.pz[i],
            mass: self.mass[i],
            mothers: [self.mother1[i], self.mother2[i]],
            daughters: [self.daughter1[i], self.daughter2[i]],
            barcode: self.barcode.get(i).copied(),
            vertex: has_vertex.then(|| [self.x[i], self.y[i], self.z[i], self.t[i]]),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Particle> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }

    /// Largest transverse momentum in the block, in momentum-unit steps.
    pub fn max_pt_quantized(&self) -> u64 {
        self.px
            .iter()
            .zip(&self.py)
            .map(|(&px, &py)| pt_quantized(px, py))
            .max()
            .unwrap_or(0)
    }

    /// Dequantized on-shell energy of particle `i`, in GeV.
    pub fn energy(&self, i: usize, scheme: &QuantizationScheme) -> f64 {
        let [px, py, pz, m] =
            [self.px[i], self.py[i], self.pz[i], self.mass[i]].map(|q| scheme.momentum(q));
        (px * px + py * py + pz * pz + m * m).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let required: [(&str, usize); 9] = [
            ("status", self.status.len()),
            ("px", self.px.len()),
            ("py", self.py.len()),
            ("pz", self.pz.len()),
            ("mass", self.mass.len()),
            ("mother1", self.mother1.len()),
            ("mother2", self.mother2.len()),
            ("daughter1", self.daughter1.len()),
            ("daughter2", self.daughter2.len()),
        ];
        for (name, len) in required {
            if len != n {
                return Err(Error::invariant(format!(
                    "column {name} has {len} entries, expected {n}"
                )));
            }
        }
        let optional: [(&str, usize); 5] = [
            ("barcode", self.barcode.len()),
            ("x", self.x.len()),
            ("y", self.y.len()),
            ("z", self.z.len()),
            ("t", self.t.len()),
        ];
        for (name, len) in optional {
            if len != 0 && len != n {
                return Err(Error::invariant(format!(
                    "optional column {name} has {len} entries, expected 0 or {n}"
                )));
            }
        }
        for (name, col) in [
            ("mother1", &self.mother1),
            ("mother2", &self.mother2),
            ("daughter1", &self.daughter1),
            ("daughter2", &self.daughter2),
        ] {
            if let Some(bad) = col.iter().flatten().find(|&&i| i as usize >= n) {
                return Err(Error::invariant(format!(
                    "column {name} links to particle {bad}, block has {n}"
                )));
            }
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut buf = Vec::with_capacity(self.len() * 24);
        self.encode_into(&mut buf);
        Ok(buf)
    }

    fn encode_into(&self, buf: &mut Vec<u8>) {
        use field::particles::*;
        write_packed_zigzag(buf, PDG_ID, self.pdg_id.iter().map(|&v| i64::from(v)));
        write_packed_varints(buf, STATUS, self.status.iter().map(|&v| u64::from(v)));
        write_packed_zigzag(buf, PX, self.px.iter().copied());
        write_packed_zigzag(buf, PY, self.py.iter().copied());
        write_packed_zigzag(buf, PZ, self.pz.iter().copied());
        write_packed_zigzag(buf, MASS, self.mass.iter().copied());
        for (num, col) in [
            (MOTHER1, &self.mother1),
            (MOTHER2, &self.mother2),
            (DAUGHTER1, &self.daughter1),
            (DAUGHTER2, &self.daughter2),
        ] {
            write_packed_varints(buf, num, col.iter().map(|&l| link_to_wire(l)));
        }
        write_packed_zigzag(buf, BARCODE, self.barcode.iter().copied());
        write_packed_zigzag(buf, X, self.x.iter().copied());
        write_packed_zigzag(buf, Y, self.y.iter().copied());
        write_packed_zigzag(buf, Z, self.z.iter().copied());
        write_packed_zigzag(buf, T, self.t.iter().copied());
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        use field::particles::*;
        let mut block = ParticleBlock::default();
        let mut seen = 0u32;
        for f in read_message_fields(bytes) {
            let f = f?;
            let num = f.tag.field_number;
            if !(PDG_ID..=T).contains(&num) {
                continue;
            }
            let payload = packed_payload(&f, "ParticleBlock")?;
            if seen & (1 << num) != 0 {
                return Err(Error::malformed(format!(
                    "ParticleBlock field {num} occurs more than once"
                )));
            }
            seen |= 1 << num;
            match num {
                PDG_ID => {
                    block.pdg_id = read_packed_zigzag(payload)?
                        .into_iter()
                        .map(|v| narrow(v, "pdg_id"))
                        .collect::<Result<_>>()?
                }
                STATUS => {
                    block.status = read_packed_varints(payload)?
                        .into_iter()
                        .map(|v| narrow(v, "status"))
                        .collect::<Result<_>>()?
                }
                PX => block.px = read_packed_zigzag(payload)?,
                PY => block.py = read_packed_zigzag(payload)?,
                PZ => block.pz = read_packed_zigzag(payload)?,
                MASS => block.mass = read_packed_zigzag(payload)?,
                MOTHER1 | MOTHER2 | DAUGHTER1 | DAUGHTER2 => {
                    let col = read_packed_varints(payload)?
                        .into_iter()
                        .map(link_from_wire)
                        .collect::<Result<Vec<_>>>()?;
                    match num {
                        MOTHER1 => block.mother1 = col,
                        MOTHER2 => block.mother2 = col,
                        DAUGHTER1 => block.daughter1 = col,
                        _ => block.daughter2 = col,
                    }
                }
                BARCODE => block.barcode = read_packed_zigzag(payload)?,
                X => block.x = read_packed_zigzag(payload)?,
                Y => block.y = read_packed_zigzag(payload)?,
                Z => block.z = read_packed_zigzag(payload)?,
                _ => block.t = read_packed_zigzag(payload)?,
            }
        }
        block.validate()?;
        Ok(block)
    }
}

fn narrow<S, T: TryFrom<S>>(v: S, name: &str) -> Result<T> {
    T::try_from(v).map_err(|_| Error::malformed(format!("{name} value out of range")))
}

/// In-memory links are 0-based; on the wire 0 means "no link" and particle
/// `i` is stored as `i + 1`.
fn link_to_wire(link: Option<u32>) -> u64 {
    link.map_or(0, |i| u64::from(i) + 1)
}

fn link_from_wire(v: u64) -> Result<Option<u32>> {
    match v {
        0 => Ok(None),
        v => Ok(Some(narrow(v - 1, "particle link")?)),
    }
}

fn packed_payload<'a>(f: &RawField<'a>, message: &str) -> Result<&'a [u8]> {
    f.as_bytes().ok_or_else(|| {
        Error::malformed(format!(
            "{message} field {} must be a packed column, found {}",
            f.tag.field_number, f.tag.wire_type
        ))
    })
}

fn expect_wire(f: &RawField<'_>, want: WireType, message: &str) -> Result<()> {
    if f.tag.wire_type != want {
        return Err(Error::malformed(format!(
            "{message} field {} has wire type {}, expected {want}",
            f.tag.field_number, f.tag.wire_type
        )));
    }
    Ok(())
}

fn once(seen: &mut u32, num: u32, message: &str) -> Result<()> {
    if *seen & (1 << num) != 0 {
        return Err(Error::malformed(format!(
            "{message} field {num} occurs more than once"
        )));
    }
    *seen |= 1 << num;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    /// 0-based ordinal within the file.
    pub event_number: u64,
    pub process_id: i64,
    pub weight: f64,
    pub particles: ParticleBlock,
}

impl Default for EventRecord {
    fn default() -> Self {
        EventRecord {
            event_number: 0,
            process_id: 0,
            weight: 1.0,
            particles: ParticleBlock::default(),
        }
    }
}

pub fn encode_event(e: &EventRecord) -> Result<Vec<u8>> {
    use field::event::*;
    e.particles.validate()?;
    let mut buf = Vec::with_capacity(16 + e.particles.len() * 24);
    if e.event_number != 0 {
        write_varint_field(&mut buf, EVENT_NUMBER, e.event_number);
    }
    if e.process_id != 0 {
        write_varint_field(&mut buf, PROCESS_ID, zigzag_encode(e.process_id));
    }
    if e.weight.to_bits() != 1.0f64.to_bits() {
        write_double_field(&mut buf, WEIGHT, e.weight);
    }
    let mut block = Vec::with_capacity(e.particles.len() * 24);
    e.particles.encode_into(&mut block);
    write_bytes_field(&mut buf, PARTICLES, &block);
    Ok(buf)
}

pub fn decode_event(bytes: &[u8]) -> Result<EventRecord> {
    use field::event::*;
    let mut e = EventRecord::default();
    let mut seen = 0u32;
    for f in read_message_fields(bytes) {
        let f = f?;
        let num = f.tag.field_number;
        match num {
            EVENT_NUMBER => {
                expect_wire(&f, WireType::Varint, "EventRecord")?;
                once(&mut seen, num, "EventRecord")?;
                e.event_number = f.as_varint().unwrap_or_default();
            }
            PROCESS_ID => {
                expect_wire(&f, WireType::Varint, "EventRecord")?;
                once(&mut seen, num, "EventRecord")?;
                e.process_id = zigzag_decode(f.as_varint().unwrap_or_default());
            }
            WEIGHT => {
                expect_wire(&f, WireType::Fixed64, "EventRecord")?;
                once(&mut seen, num, "EventRecord")?;
                e.weight = f64::from_bits(f.as_fixed64().unwrap_or_default());
            }
            PARTICLES => {
                expect_wire(&f, WireType::LengthDelimited, "EventRecord")?;
                once(&mut seen, num, "EventRecord")?;
                e.particles = ParticleBlock::decode(f.payload)?;
            }
            _ => {}
        }
    }
    Ok(e)
}

/// File-level metadata, stored in the `header` entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileDescriptor {
    pub format_version: u32,
    pub description: String,
    pub scheme: QuantizationScheme,
    /// Number of events the producer intended to write; informational.
    pub requested_events: u64,
    /// Embedded layout description, see [`crate::schema`].
    pub schema_text: String,
}

impl Default for FileDescriptor {
    fn default() -> Self {
        FileDescriptor {
            format_version: FORMAT_VERSION,
            description: String::new(),
            scheme: QuantizationScheme::default(),
            requested_events: 0,
            schema_text: schema::canonical_schema().to_owned(),
        }
    }
}

impl FileDescriptor {
    pub fn new(description: impl Into<String>, scheme: QuantizationScheme) -> Self {
        FileDescriptor {
            description: description.into(),
            scheme,
            ..Default::default()
        }
    }
}

pub fn encode_descriptor(d: &FileDescriptor) -> Result<Vec<u8>> {
    use field::descriptor::*;
    if d.format_version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(u64::from(d.format_version)));
    }
    let units = [d.scheme.momentum_unit(), d.scheme.length_unit()];
    if units.contains(&0) {
        return Err(Error::invariant("quantization units must be at least 1"));
    }
    let mut buf = Vec::with_capacity(64 + d.description.len() + d.schema_text.len());
    write_varint_field(&mut buf, FORMAT_VERSION, u64::from(d.format_version));
    if !d.description.is_empty() {
        write_bytes_field(&mut buf, DESCRIPTION, d.description.as_bytes());
    }
    write_packed_varints(&mut buf, UNITS, units);
    if d.requested_events != 0 {
        write_varint_field(&mut buf, REQUESTED_EVENTS, d.requested_events);
    }
    if !d.schema_text.is_empty() {
        write_bytes_field(&mut buf, SCHEMA_TEXT, d.schema_text.as_bytes());
    }
    Ok(buf)
}

pub fn decode_descriptor(bytes: &[u8]) -> Result<FileDescriptor> {
    use field::descriptor::*;
    let mut version = 0u64;
    let mut description = String::new();
    let mut units: Option<Vec<u64>> = None;
    let mut requested_events = 0;
    let mut schema_text = String::new();
    let mut seen = 0u32;
    for f in read_message_fields(bytes) {
        let f = f?;
        let num = f.tag.field_number;
        match num {
            FORMAT_VERSION | REQUESTED_EVENTS => {
                expect_wire(&f, WireType::Varint, "FileDescriptor")?;
                once(&mut seen, num, "FileDescriptor")?;
                let v = f.as_varint().unwrap_or_default();
                if num == FORMAT_VERSION {
                    version = v;
                } else {
                    requested_events = v;
                }
            }
            DESCRIPTION | SCHEMA_TEXT => {
                expect_wire(&f, WireType::LengthDelimited, "FileDescriptor")?;
                once(&mut seen, num, "FileDescriptor")?;
                let s = String::from_utf8(f.payload.to_vec())
                    .map_err(|_| Error::malformed("FileDescriptor text is not UTF-8"))?;
                if num == DESCRIPTION {
                    description = s;
                } else {
                    schema_text = s;
                }
            }
            UNITS => {
                once(&mut seen, num, "FileDescriptor")?;
                units = Some(read_packed_varints(packed_payload(&f, "FileDescriptor")?)?);
            }
            _ => {}
        }
    }
    if version != u64::from(self::FORMAT_VERSION) {
        return Err(Error::UnsupportedVersion(version));
    }
    let scheme = match units.as_deref() {
        Some(&[momentum, length]) => QuantizationScheme::new(momentum, length)
            .map_err(|e| Error::invariant(e.to_string()))?,
        Some(other) => {
            return Err(Error::malformed(format!(
                "FileDescriptor units must hold 2 values, found {}",
                other.len()
            )))
        }
        None => return Err(Error::malformed("FileDescriptor has no units")),
    };
    Ok(FileDescriptor {
        format_version: version as u32,
        description,
        scheme,
        requested_events,
        schema_text,
    })
}

/// Totals written when the file is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FileStatistics {
    pub actual_events: u64,
    pub total_particles: u64,
}

impl FileStatistics {
    pub fn encode(&self) -> Vec<u8> {
        use field::statistics::*;
        let mut buf = vec![];
        if self.actual_events != 0 {
            write_varint_field(&mut buf, ACTUAL_EVENTS, self.actual_events);
        }
        if self.total_particles != 0 {
            write_varint_field(&mut buf, TOTAL_PARTICLES, self.total_particles);
        }
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        use field::statistics::*;
        let mut stats = FileStatistics::default();
        let mut seen = 0u32;
        for f in read_message_fields(bytes) {
            let f = f?;
            let num = f.tag.field_number;
            if num == ACTUAL_EVENTS || num == TOTAL_PARTICLES {
                expect_wire(&f, WireType::Varint, "FileStatistics")?;
                once(&mut seen, num, "FileStatistics")?;
                let v = f.as_varint().unwrap_or_default();
                if num == ACTUAL_EVENTS {
                    stats.actual_events = v;
                } else {
                    stats.total_particles = v;
                }
            }
        }
        Ok(stats)
    }
}
