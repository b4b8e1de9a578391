//! The on-disk file: a ZIP archive of STORED entries.
//!
//! ```text
//! header                  FileDescriptor message
//! 0, 1, ..., N-1          one EventRecord message per event
//! index                   EventIndex message (per-event particle count, max pT)
//! statistics              FileStatistics message
//! promc_description.txt   description, plain text
//! promc_nevents.txt       "N\n", plain text
//! central directory + end record
//! ```
//!
//! A reader needs the end record and the central directory, both at the
//! tail, to locate any entry; after that every entry is one ranged read.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::model::{
    decode_descriptor, decode_event, encode_descriptor, encode_event, field, EventRecord,
    FileDescriptor, FileStatistics,
};
use crate::source::{ByteSource, FileSource};
use crate::wire::{read_message_fields, read_packed_varints, write_packed_varints};

pub const HEADER_ENTRY: &str = "header";
pub const INDEX_ENTRY: &str = "index";
pub const STATISTICS_ENTRY: &str = "statistics";
pub const DESCRIPTION_ENTRY: &str = "promc_description.txt";
pub const NEVENTS_ENTRY: &str = "promc_nevents.txt";

/// Non-event entries in a complete file.
pub const METADATA_ENTRIES: usize = 5;

/// Messages above this size get a warning from `verify`.
pub const LARGE_MESSAGE_BYTES: usize = 1 << 20;

const LOCAL_HEADER_SIG: u32 = 0x0403_4b50;
const CENTRAL_HEADER_SIG: u32 = 0x0201_4b50;
const END_RECORD_SIG: u32 = 0x0605_4b50;
const LOCAL_HEADER_LEN: usize = 30;
const CENTRAL_HEADER_LEN: usize = 46;
const END_RECORD_LEN: usize = 22;
const MAX_COMMENT_LEN: usize = u16::MAX as usize;
const VERSION_NEEDED: u16 = 10;
const METHOD_STORED: u16 = 0;
// 1980-01-01 00:00, the DOS epoch, so output is byte-reproducible
const DOS_TIME: u16 = 0;
const DOS_DATE: u16 = (1 << 5) | 1;

/// Directory entry of one archive member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryRecord {
    pub name: String,
    /// Offset of the local file header.
    pub offset: u64,
    /// Payload length in bytes.
    pub length: u64,
    pub crc32: u32,
    /// Length of the local header's extra field as recorded centrally.
    extra_len: u16,
}

impl EntryRecord {
    /// Bytes from the start of the local header to the end of the payload,
    /// assuming the local extra field matches the central one.
    fn span(&self) -> u64 {
        (LOCAL_HEADER_LEN + self.name.len() + self.extra_len as usize) as u64 + self.length
    }
}

/// Per-event summary stored in the `index` entry.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventIndex {
    pub particle_count: Vec<u64>,
    /// Largest particle pT per event, in momentum-unit steps.
    pub max_pt: Vec<u64>,
}

impl EventIndex {
    pub fn len(&self) -> usize {
        self.particle_count.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push(&mut self, e: &EventRecord) {
        self.particle_count.push(e.particles.len() as u64);
        self.max_pt.push(e.particles.max_pt_quantized());
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.len() * 4 + 8);
        write_packed_varints(
            &mut buf,
            field::index::PARTICLE_COUNT,
            self.particle_count.iter().copied(),
        );
        write_packed_varints(&mut buf, field::index::MAX_PT, self.max_pt.iter().copied());
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut index = EventIndex::default();
        for f in read_message_fields(bytes) {
            let f = f?;
            let num = f.tag.field_number;
            if num != field::index::PARTICLE_COUNT && num != field::index::MAX_PT {
                continue;
            }
            let payload = f.as_bytes().ok_or_else(|| {
                Error::malformed(format!("EventIndex field {num} must be a packed column"))
            })?;
            let col = read_packed_varints(payload)?;
            if num == field::index::PARTICLE_COUNT {
                index.particle_count = col;
            } else {
                index.max_pt = col;
            }
        }
        if index.particle_count.len() != index.max_pt.len() {
            return Err(Error::invariant(format!(
                "index columns disagree: {} particle counts, {} max pT values",
                index.particle_count.len(),
                index.max_pt.len()
            )));
        }
        Ok(index)
    }
}

/// Totals returned by [`Writer::close`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WriteSummary {
    pub events: u64,
    pub total_particles: u64,
    pub entries: usize,
    pub bytes_written: u64,
}

/// Sequential archive writer. Events get consecutive ordinals in append
/// order.
pub struct Writer<W: Write> {
    sink: W,
    offset: u64,
    entries: Vec<EntryRecord>,
    descriptor: FileDescriptor,
    index: EventIndex,
    stats: FileStatistics,
    closed: bool,
}

impl Writer<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, descriptor: FileDescriptor) -> Result<Self> {
        Writer::new(BufWriter::new(File::create(path)?), descriptor)
    }
}

impl<W: Write> Writer<W> {
    /// Writes the `header` entry immediately.
    pub fn new(sink: W, descriptor: FileDescriptor) -> Result<Self> {
        let header = encode_descriptor(&descriptor)?;
        let mut w = Writer {
            sink,
            offset: 0,
            entries: vec![],
            descriptor,
            index: EventIndex::default(),
            stats: FileStatistics::default(),
            closed: false,
        };
        w.write_entry(HEADER_ENTRY, &header)?;
        Ok(w)
    }

    pub fn descriptor(&self) -> &FileDescriptor {
        &self.descriptor
    }

    pub fn events_written(&self) -> u64 {
        self.stats.actual_events
    }

    /// Appends `e` as the next event. Its `event_number` must equal the
    /// ordinal it will receive.
    pub fn append_event(&mut self, e: &EventRecord) -> Result<u64> {
        if self.closed {
            return Err(Error::Usage("append after close".into()));
        }
        let ordinal = self.stats.actual_events;
        if e.event_number != ordinal {
            return Err(Error::invariant(format!(
                "event_number {} does not match ordinal {ordinal}",
                e.event_number
            )));
        }
        if self.entries.len() + 1 + (METADATA_ENTRIES - 1) > u16::MAX as usize {
            return Err(Error::LimitExceeded(format!(
                "at most {} events per file",
                u16::MAX as usize - METADATA_ENTRIES
            )));
        }
        let bytes = encode_event(e)?;
        self.write_entry(&ordinal.to_string(), &bytes)?;
        self.index.push(e);
        self.stats.actual_events += 1;
        self.stats.total_particles += e.particles.len() as u64;
        Ok(ordinal)
    }

    /// Writes index, statistics, text mirrors and the central directory.
    pub fn close(&mut self) -> Result<WriteSummary> {
        if self.closed {
            return Err(Error::Usage("writer already closed".into()));
        }
        self.closed = true;
        let index = self.index.encode();
        self.write_entry(INDEX_ENTRY, &index)?;
        self.write_entry(STATISTICS_ENTRY, &self.stats.encode())?;
        let description = self.descriptor.description.clone();
        self.write_entry(DESCRIPTION_ENTRY, description.as_bytes())?;
        let nevents = format!("{}\n", self.stats.actual_events);
        self.write_entry(NEVENTS_ENTRY, nevents.as_bytes())?;
        self.write_central_directory()?;
        self.sink.flush()?;
        Ok(self.summary())
    }

    fn summary(&self) -> WriteSummary {
        WriteSummary {
            events: self.stats.actual_events,
            total_particles: self.stats.total_particles,
            entries: self.entries.len(),
            bytes_written: self.offset,
        }
    }

    /// Closes if still open and returns the sink.
    pub fn finish(mut self) -> Result<(W, WriteSummary)> {
        let summary = if self.closed {
            self.summary()
        } else {
            self.close()?
        };
        Ok((self.sink, summary))
    }

    fn write_entry(&mut self, name: &str, payload: &[u8]) -> Result<()> {
        let length = u32::try_from(payload.len())
            .map_err(|_| Error::LimitExceeded(format!("entry '{name}' exceeds 4 GiB")))?;
        let offset = u32::try_from(self.offset)
            .map_err(|_| Error::LimitExceeded("archive exceeds 4 GiB".into()))?;
        let crc32 = crc32fast::hash(payload);
        let mut header = Vec::with_capacity(LOCAL_HEADER_LEN + name.len());
        header.extend_from_slice(&LOCAL_HEADER_SIG.to_le_bytes());
        header.extend_from_slice(&VERSION_NEEDED.to_le_bytes());
        header.extend_from_slice(&0u16.to_le_bytes()); // flags
        header.extend_from_slice(&METHOD_STORED.to_le_bytes());
        header.extend_from_slice(&DOS_TIME.to_le_bytes());
        header.extend_from_slice(&DOS_DATE.to_le_bytes());
        header.extend_from_slice(&crc32.to_le_bytes());
        header.extend_from_slice(&length.to_le_bytes()); // compressed
        header.extend_from_slice(&length.to_le_bytes()); // uncompressed
        header.extend_from_slice(&(name.len() as u16).to_le_bytes());
        header.extend_from_slice(&0u16.to_le_bytes()); // extra
        header.extend_from_slice(name.as_bytes());
        self.sink.write_all(&header)?;
        self.sink.write_all(payload)?;
        self.entries.push(EntryRecord {
            name: name.to_owned(),
            offset: u64::from(offset),
            length: u64::from(length),
            crc32,
            extra_len: 0,
        });
        self.offset += (header.len() + payload.len()) as u64;
        Ok(())
    }

    fn write_central_directory(&mut self) -> Result<()> {
        let start = self.offset;
        let mut dir = Vec::with_capacity(self.entries.len() * (CENTRAL_HEADER_LEN + 8));
        for e in &self.entries {
            dir.extend_from_slice(&CENTRAL_HEADER_SIG.to_le_bytes());
            dir.extend_from_slice(&VERSION_NEEDED.to_le_bytes()); // made by
            dir.extend_from_slice(&VERSION_NEEDED.to_le_bytes());
            dir.extend_from_slice(&0u16.to_le_bytes()); // flags
            dir.extend_from_slice(&METHOD_STORED.to_le_bytes());
            dir.extend_from_slice(&DOS_TIME.to_le_bytes());
            dir.extend_from_slice(&DOS_DATE.to_le_bytes());
            dir.extend_from_slice(&e.crc32.to_le_bytes());
            dir.extend_from_slice(&(e.length as u32).to_le_bytes());
            dir.extend_from_slice(&(e.length as u32).to_le_bytes());
            dir.extend_from_slice(&(e.name.len() as u16).to_le_bytes());
            dir.extend_from_slice(&0u16.to_le_bytes()); // extra
            dir.extend_from_slice(&0u16.to_le_bytes()); // comment
            dir.extend_from_slice(&0u16.to_le_bytes()); // disk start
            dir.extend_from_slice(&0u16.to_le_bytes()); // internal attributes
            dir.extend_from_slice(&0u32.to_le_bytes()); // external attributes
            dir.extend_from_slice(&(e.offset as u32).to_le_bytes());
            dir.extend_from_slice(e.name.as_bytes());
        }
        let size = u32::try_from(dir.len())
            .map_err(|_| Error::LimitExceeded("central directory exceeds 4 GiB".into()))?;
        let dir_offset = u32::try_from(start)
            .map_err(|_| Error::LimitExceeded("archive exceeds 4 GiB".into()))?;
        let count = self.entries.len() as u16;
        dir.extend_from_slice(&END_RECORD_SIG.to_le_bytes());
        dir.extend_from_slice(&0u16.to_le_bytes()); // this disk
        dir.extend_from_slice(&0u16.to_le_bytes()); // directory disk
        dir.extend_from_slice(&count.to_le_bytes());
        dir.extend_from_slice(&count.to_le_bytes());
        dir.extend_from_slice(&size.to_le_bytes());
        dir.extend_from_slice(&dir_offset.to_le_bytes());
        dir.extend_from_slice(&0u16.to_le_bytes()); // comment
        self.sink.write_all(&dir)?;
        self.offset += dir.len() as u64;
        Ok(())
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Random-access reader. After [`Reader::open`] the reader is immutable and
/// may be shared between threads.
#[derive(Debug)]
pub struct Reader<S> {
    source: S,
    descriptor: FileDescriptor,
    entries: Vec<EntryRecord>,
    by_name: HashMap<String, usize>,
    /// Entry position of event `k`.
    events: Vec<usize>,
    index: OnceLock<EventIndex>,
}

impl Reader<FileSource> {
    pub fn open_path(path: impl AsRef<Path>) -> Result<Self> {
        Reader::open(FileSource::open(path)?)
    }
}

impl<S: ByteSource> Reader<S> {
    /// Reads the end record, the central directory and the `header` entry.
    /// Event payloads are not touched.
    pub fn open(source: S) -> Result<Self> {
        let entries = read_directory(&source)?;
        let mut by_name = HashMap::with_capacity(entries.len());
        let mut ordinals = vec![];
        for (i, e) in entries.iter().enumerate() {
            if by_name.insert(e.name.clone(), i).is_some() {
                return Err(Error::NotAnArchive(format!("duplicate entry '{}'", e.name)));
            }
            if let Some(k) = event_ordinal(&e.name) {
                ordinals.push((k, i));
            }
        }
        ordinals.sort_unstable();
        if let Some(pos) = ordinals
            .iter()
            .enumerate()
            .position(|(k, &(o, _))| k as u64 != o)
        {
            return Err(Error::malformed(format!("event entry {pos} is missing")));
        }
        let events = ordinals.into_iter().map(|(_, i)| i).collect();
        let header = *by_name.get(HEADER_ENTRY).ok_or(Error::MissingHeader)?;
        let descriptor = decode_descriptor(&read_entry_from(&source, &entries[header])?)?;
        Ok(Reader {
            source,
            descriptor,
            entries,
            by_name,
            events,
            index: OnceLock::new(),
        })
    }

    pub fn descriptor(&self) -> &FileDescriptor {
        &self.descriptor
    }

    pub fn event_count(&self) -> u64 {
        self.events.len() as u64
    }

    /// Entries in central-directory order.
    pub fn entries(&self) -> &[EntryRecord] {
        &self.entries
    }

    pub fn entry(&self, name: &str) -> Option<&EntryRecord> {
        self.by_name.get(name).map(|&i| &self.entries[i])
    }

    pub fn source(&self) -> &S {
        &self.source
    }

    /// Payload of entry `name`, CRC-checked.
    pub fn read_entry(&self, name: &str) -> Result<Vec<u8>> {
        let entry = self
            .entry(name)
            .ok_or_else(|| Error::malformed(format!("no entry '{name}'")))?;
        read_entry_from(&self.source, entry)
    }

    /// Raw message bytes of event `k`.
    pub fn read_event_bytes(&self, k: u64) -> Result<Vec<u8>> {
        let i = usize::try_from(k)
            .ok()
            .and_then(|k| self.events.get(k))
            .ok_or(Error::OutOfRange {
                index: k,
                len: self.event_count(),
            })?;
        read_entry_from(&self.source, &self.entries[*i])
    }

    pub fn read_event(&self, k: u64) -> Result<EventRecord> {
        decode_event(&self.read_event_bytes(k)?)
    }

    pub fn events(&self) -> impl Iterator<Item = Result<EventRecord>> + '_ {
        (0..self.event_count()).map(|k| self.read_event(k))
    }

    /// The `index` entry, read once and cached.
    pub fn index(&self) -> Result<&EventIndex> {
        if let Some(index) = self.index.get() {
            return Ok(index);
        }
        if self.entry(INDEX_ENTRY).is_none() {
            return Err(Error::MissingIndex);
        }
        let index = EventIndex::decode(&self.read_entry(INDEX_ENTRY)?)?;
        if index.len() as u64 != self.event_count() {
            return Err(Error::invariant(format!(
                "index lists {} events, file has {}",
                index.len(),
                self.event_count()
            )));
        }
        Ok(self.index.get_or_init(|| index))
    }

    /// Ordinals whose `(particle_count, max_pt)` satisfy `predicate`,
    /// evaluated on the index alone.
    pub fn select_events<F>(&self, mut predicate: F) -> Result<Vec<u64>>
    where
        F: FnMut(u64, u64) -> bool,
    {
        let index = self.index()?;
        Ok(index
            .particle_count
            .iter()
            .zip(&index.max_pt)
            .enumerate()
            .filter(|(_, (&n, &pt))| predicate(n, pt))
            .map(|(k, _)| k as u64)
            .collect())
    }

    pub fn statistics(&self) -> Result<FileStatistics> {
        if self.entry(STATISTICS_ENTRY).is_none() {
            return Err(Error::MissingStatistics);
        }
        FileStatistics::decode(&self.read_entry(STATISTICS_ENTRY)?)
    }
}

/// `Some(k)` for canonical decimal names ("0", "17"; not "007").
fn event_ordinal(name: &str) -> Option<u64> {
    let canonical = !name.is_empty()
        && name.bytes().all(|b| b.is_ascii_digit())
        && (name == "0" || !name.starts_with('0'));
    canonical.then(|| name.parse().ok()).flatten()
}

fn read_directory<S: ByteSource>(source: &S) -> Result<Vec<EntryRecord>> {
    let len = source.len();
    if len < END_RECORD_LEN as u64 {
        return Err(Error::NotAnArchive("file too short".into()));
    }
    // common case: no archive comment, the end record is the last 22 bytes
    let mut tail = source.read_at(len - END_RECORD_LEN as u64, END_RECORD_LEN)?;
    let mut tail_start = len - END_RECORD_LEN as u64;
    let mut at = 0;
    if u32_at(&tail, 0) != END_RECORD_SIG {
        let span = (END_RECORD_LEN + MAX_COMMENT_LEN).min(len as usize);
        tail_start = len - span as u64;
        tail = source.read_at(tail_start, span)?;
        at = (0..=span - END_RECORD_LEN)
            .rev()
            .find(|&i| {
                u32_at(&tail, i) == END_RECORD_SIG
                    && i + END_RECORD_LEN + u16_at(&tail, i + 20) as usize == span
            })
            .ok_or_else(|| Error::NotAnArchive("no end-of-central-directory record".into()))?;
    }
    let end = &tail[at..at + END_RECORD_LEN];
    let count = u16_at(end, 10) as usize;
    let dir_size = u32_at(end, 12) as u64;
    let dir_offset = u32_at(end, 16) as u64;
    if u16_at(end, 4) != 0 || u16_at(end, 6) != 0 || u16_at(end, 8) as usize != count {
        return Err(Error::NotAnArchive(
            "multi-disk archives are not supported".into(),
        ));
    }
    let end_pos = tail_start + at as u64;
    if dir_offset.checked_add(dir_size).is_none_or(|e| e > end_pos) {
        return Err(Error::NotAnArchive(
            "central directory out of bounds".into(),
        ));
    }
    let dir = source.read_at(dir_offset, dir_size as usize)?;
    let mut entries = Vec::with_capacity(count);
    let mut pos = 0;
    for _ in 0..count {
        if pos + CENTRAL_HEADER_LEN > dir.len() || u32_at(&dir, pos) != CENTRAL_HEADER_SIG {
            return Err(Error::NotAnArchive("bad central directory header".into()));
        }
        let h = &dir[pos..pos + CENTRAL_HEADER_LEN];
        let flags = u16_at(h, 8);
        let method = u16_at(h, 10);
        let crc32 = u32_at(h, 16);
        let compressed = u32_at(h, 20) as u64;
        let length = u32_at(h, 24) as u64;
        let name_len = u16_at(h, 28) as usize;
        let extra_len = u16_at(h, 30);
        let comment_len = u16_at(h, 32) as usize;
        let offset = u32_at(h, 42) as u64;
        let name_start = pos + CENTRAL_HEADER_LEN;
        let next = name_start + name_len + extra_len as usize + comment_len;
        if next > dir.len() {
            return Err(Error::NotAnArchive("truncated central directory".into()));
        }
        let name = std::str::from_utf8(&dir[name_start..name_start + name_len])
            .map_err(|_| Error::NotAnArchive("entry name is not UTF-8".into()))?
            .to_owned();
        if method != METHOD_STORED || compressed != length || flags & 0x1 != 0 {
            return Err(Error::NotAnArchive(format!(
                "entry '{name}' is not a plain stored entry"
            )));
        }
        entries.push(EntryRecord {
            name,
            offset,
            length,
            crc32,
            extra_len,
        });
        pos = next;
    }
    Ok(entries)
}

fn read_entry_from<S: ByteSource>(source: &S, entry: &EntryRecord) -> Result<Vec<u8>> {
    let span = usize::try_from(entry.span())
        .map_err(|_| Error::LimitExceeded(format!("entry '{}' too large", entry.name)))?;
    if entry
        .offset
        .checked_add(span as u64)
        .is_none_or(|e| e > source.len())
    {
        return Err(Error::NotAnArchive(format!(
            "entry '{}' extends past end of file",
            entry.name
        )));
    }
    let mut buf = source.read_at(entry.offset, span)?;
    if u32_at(&buf, 0) != LOCAL_HEADER_SIG {
        return Err(Error::NotAnArchive(format!(
            "bad local header for entry '{}'",
            entry.name
        )));
    }
    let name_len = u16_at(&buf, 26) as usize;
    let extra_len = u16_at(&buf, 28) as usize;
    let data_start = LOCAL_HEADER_LEN + name_len + extra_len;
    if &buf[LOCAL_HEADER_LEN..LOCAL_HEADER_LEN + name_len.min(span - LOCAL_HEADER_LEN)]
        != entry.name.as_bytes()
    {
        return Err(Error::NotAnArchive(format!(
            "local header name differs for entry '{}'",
            entry.name
        )));
    }
    let payload = if data_start as u64 + entry.length == span as u64 {
        buf.split_off(data_start)
    } else {
        // local extra field differs from the central one
        source.read_at(entry.offset + data_start as u64, entry.length as usize)?
    };
    if crc32fast::hash(&payload) != entry.crc32 {
        return Err(Error::ChecksumMismatch {
            entry: entry.name.clone(),
        });
    }
    Ok(payload)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Particle;
    use crate::source::{CountingSource, MemorySource};

    fn event(k: u64, n: usize) -> EventRecord {
        let mut e = EventRecord {
            event_number: k,
            ..Default::default()
        };
        for i in 0..n {
            e.particles.push(&Particle {
                pdg_id: 211,
                status: 1,
                px: 1000 * (i as i64 + 1),
                py: -500,
                pz: k as i64,
                mass: 13957,
                ..Default::default()
            });
        }
        e
    }

    fn write(events: &[EventRecord]) -> Vec<u8> {
        let mut w = Writer::new(
            Vec::new(),
            FileDescriptor::new("test file", Default::default()),
        )
        .unwrap();
        for e in events {
            w.append_event(e).unwrap();
        }
        w.finish().unwrap().0
    }

    #[test]
    fn starts_with_local_header() {
        let bytes = write(&[]);
        assert_eq!(&bytes[..4], &[0x50, 0x4B, 0x03, 0x04]);
    }

    #[test]
    fn empty_file_has_metadata_entries() {
        let r = Reader::open(MemorySource::new(write(&[]))).unwrap();
        let names: Vec<_> = r.entries().iter().map(|e| e.name.as_str()).collect();
        assert_eq!(
            names,
            [
                HEADER_ENTRY,
                INDEX_ENTRY,
                STATISTICS_ENTRY,
                DESCRIPTION_ENTRY,
                NEVENTS_ENTRY
            ]
        );
        assert_eq!(r.event_count(), 0);
        assert_eq!(r.read_entry(NEVENTS_ENTRY).unwrap(), b"0\n");
    }

    #[test]
    fn entries_named_by_ordinal() {
        let events: Vec<_> = (0..3).map(|k| event(k, 2)).collect();
        let r = Reader::open(MemorySource::new(write(&events))).unwrap();
        let names: Vec<_> = r.entries().iter().map(|e| e.name.as_str()).collect();
        assert_eq!(&names[1..4], ["0", "1", "2"]);
        assert_eq!(r.entries().len(), 3 + METADATA_ENTRIES);
        assert_eq!(r.read_entry(NEVENTS_ENTRY).unwrap(), b"3\n");
        assert_eq!(r.read_entry(DESCRIPTION_ENTRY).unwrap(), b"test file");
        for (k, e) in events.iter().enumerate() {
            assert_eq!(&r.read_event(k as u64).unwrap(), e);
        }
        let stats = r.statistics().unwrap();
        assert_eq!(stats.actual_events, 3);
        assert_eq!(stats.total_particles, 6);
    }

    #[test]
    fn append_after_close() {
        let mut w = Writer::new(Vec::new(), FileDescriptor::default()).unwrap();
        w.close().unwrap();
        assert!(matches!(w.append_event(&event(0, 1)), Err(Error::Usage(_))));
        assert!(matches!(w.close(), Err(Error::Usage(_))));
    }

    #[test]
    fn event_number_must_match_ordinal() {
        let mut w = Writer::new(Vec::new(), FileDescriptor::default()).unwrap();
        assert!(matches!(
            w.append_event(&event(3, 1)),
            Err(Error::InvariantViolation(_))
        ));
    }

    #[test]
    fn out_of_range_and_random_bytes() {
        let r = Reader::open(MemorySource::new(write(&[event(0, 1)]))).unwrap();
        assert!(matches!(
            r.read_event(1),
            Err(Error::OutOfRange { index: 1, len: 1 })
        ));
        let junk: Vec<u8> = (0..4096u32)
            .map(|i| (i.wrapping_mul(2654435761) >> 13) as u8)
            .collect();
        assert!(matches!(
            Reader::open(MemorySource::new(junk)),
            Err(Error::NotAnArchive(_))
        ));
        assert!(matches!(
            Reader::open(MemorySource::new(vec![1, 2, 3])),
            Err(Error::NotAnArchive(_))
        ));
    }

    #[test]
    fn flipped_payload_byte_detected() {
        let events: Vec<_> = (0..4).map(|k| event(k, 3)).collect();
        let mut bytes = write(&events);
        let r = Reader::open(MemorySource::new(bytes.clone())).unwrap();
        let e2 = r.entry("2").unwrap();
        let payload_start = e2.offset as usize + LOCAL_HEADER_LEN + 1;
        bytes[payload_start + 3] ^= 0x10;
        let r = Reader::open(MemorySource::new(bytes)).unwrap();
        assert!(r.read_event(1).is_ok());
        match r.read_event(2) {
            Err(Error::ChecksumMismatch { entry }) => assert_eq!(entry, "2"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_header() {
        // build an archive with only an event entry by hand
        let mut w = Writer {
            sink: Vec::new(),
            offset: 0,
            entries: vec![],
            descriptor: FileDescriptor::default(),
            index: EventIndex::default(),
            stats: FileStatistics::default(),
            closed: false,
        };
        w.write_entry("0", b"").unwrap();
        w.write_central_directory().unwrap();
        assert!(matches!(
            Reader::open(MemorySource::new(w.sink)),
            Err(Error::MissingHeader)
        ));
    }

    #[test]
    fn select_reads_only_index() {
        let events: Vec<_> = (0..20).map(|k| event(k, (k % 4) as usize)).collect();
        let src = CountingSource::new(MemorySource::new(write(&events)));
        let r = Reader::open(&src).unwrap();
        src.reset();
        let picked = r.select_events(|n, _| n == 3).unwrap();
        assert_eq!(picked, [3, 7, 11, 15, 19]);
        assert_eq!(src.read_calls(), 1);
        let index_span = r.entry(INDEX_ENTRY).unwrap().span();
        assert_eq!(src.bytes_read(), index_span);
        // cached
        r.select_events(|_, _| true).unwrap();
        assert_eq!(src.read_calls(), 1);
    }

    #[test]
    fn read_event_is_one_read() {
        let events: Vec<_> = (0..10).map(|k| event(k, 5)).collect();
        let src = CountingSource::new(MemorySource::new(write(&events)));
        let r = Reader::open(&src).unwrap();
        assert!(
            src.read_calls() <= 3,
            "open used {} reads",
            src.read_calls()
        );
        src.reset();
        r.read_event(7).unwrap();
        assert_eq!(src.read_calls(), 1);
        assert_eq!(src.bytes_read(), r.entry("7").unwrap().span());
    }

    #[test]
    fn missing_index() {
        let mut w = Writer::new(Vec::new(), FileDescriptor::default()).unwrap();
        w.append_event(&event(0, 1)).unwrap();
        w.write_central_directory().unwrap();
        let r = Reader::open(MemorySource::new(w.sink)).unwrap();
        assert!(matches!(
            r.select_events(|_, _| true),
            Err(Error::MissingIndex)
        ));
        assert!(matches!(r.statistics(), Err(Error::MissingStatistics)));
    }

    #[test]
    fn archive_comment_tolerated() {
        let mut bytes = write(&[event(0, 2)]);
        let n = bytes.len();
        bytes[n - 2..].copy_from_slice(&5u16.to_le_bytes());
        bytes.extend_from_slice(b"hello");
        let r = Reader::open(MemorySource::new(bytes)).unwrap();
        assert_eq!(r.event_count(), 1);
    }

    #[test]
    fn ordinal_names() {
        assert_eq!(event_ordinal("0"), Some(0));
        assert_eq!(event_ordinal("123"), Some(123));
        assert_eq!(event_ordinal("007"), None);
        assert_eq!(event_ordinal("header"), None);
        assert_eq!(event_ordinal(""), None);
    }

    #[test]
    fn deterministic_output() {
        let events: Vec<_> = (0..5).map(|k| event(k, 3)).collect();
        assert_eq!(write(&events), write(&events));
    }
}
