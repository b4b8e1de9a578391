use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use provent::container::{
    EventIndex, DESCRIPTION_ENTRY, INDEX_ENTRY, LARGE_MESSAGE_BYTES, NEVENTS_ENTRY,
    STATISTICS_ENTRY,
};
use provent::ingest::{
    parse_ascii_stream, to_event_record, ConversionReport, EventGenerator, SpectrumConfig,
};
use provent::model::{decode_event, FileDescriptor, FORMAT_VERSION};
use provent::schema::{generic_decode, parse_schema};
use provent::{sizes, FileSource, QuantizationScheme, Reader, Writer};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Input(#[from] provent::Error),
    #[error("{path}: {source}")]
    Open {
        path: PathBuf,
        source: provent::Error,
    },
    #[error("{0} verification check(s) failed")]
    VerifyFailed(usize),
}

fn open(path: &Path) -> Result<Reader<FileSource>> {
    Reader::open_path(path).map_err(|source| CliError::Open {
        path: path.to_owned(),
        source,
    })
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Input(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "provent",
    version,
    about = "Inspect, build and check compact event files"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Summarize a file: version, units, counts, overhead.
    Info { file: PathBuf },
    /// Print the embedded layout description.
    Schema { file: PathBuf },
    /// Copy the first N events into a new file.
    Extract { src: PathBuf, dst: PathBuf, n: u64 },
    /// Convert HepMC2 ASCII into a new file.
    Convert {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value = "")]
        description: String,
    },
    /// Write synthetic signal + pileup events.
    Generate {
        #[command(flatten)]
        spectrum: SpectrumFlags,
        output: PathBuf,
    },
    /// Compare sizes of one generated stream across encodings.
    Sizes {
        #[command(flatten)]
        spectrum: SpectrumFlags,
    },
    /// Check signatures, checksums, layout and index consistency.
    Verify { file: PathBuf },
    /// Dump one event through the schema-driven decoder.
    Cat {
        file: PathBuf,
        k: u64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
struct SpectrumFlags {
    #[arg(long, default_value_t = 1000)]
    events: u64,
    #[arg(long, default_value_t = 100.0, allow_negative_numbers = true)]
    pileup_mean: f64,
    /// Mean soft pT, GeV.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pt_soft: f64,
    #[arg(long, default_value_t = 2)]
    n_signal: u32,
    #[arg(long, default_value_t = 500.0, allow_negative_numbers = true)]
    pt_hard_min: f64,
    #[arg(long, default_value_t = 2000.0, allow_negative_numbers = true)]
    pt_hard_max: f64,
    /// Probability that an event carries the signal particles.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    signal_fraction: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl SpectrumFlags {
    fn config(&self) -> SpectrumConfig {
        SpectrumConfig {
            events: self.events,
            pileup_mean: self.pileup_mean,
            pt_soft: self.pt_soft,
            signal_particles: self.n_signal,
            pt_hard_min: self.pt_hard_min,
            pt_hard_max: self.pt_hard_max,
            signal_fraction: self.signal_fraction,
            seed: self.seed,
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Info { file } => info(&file, &mut out),
        Command::Schema { file } => {
            let reader = open(&file)?;
            out.write_all(reader.descriptor().schema_text.as_bytes())?;
            Ok(())
        }
        Command::Extract { src, dst, n } => extract(&src, &dst, n, &mut out),
        Command::Convert {
            input,
            output,
            description,
        } => convert(&input, &output, description, &mut out),
        Command::Generate { spectrum, output } => generate(&spectrum, &output, &mut out),
        Command::Sizes { spectrum } => {
            let events = EventGenerator::new(spectrum.config(), QuantizationScheme::default())?
                .collect::<provent::Result<Vec<_>>>()?;
            let report = sizes::measure(&events, &FileDescriptor::default())?;
            writeln!(out, "{report}")?;
            Ok(())
        }
        Command::Verify { file } => verify(&file, &mut out),
        Command::Cat { file, k, format } => cat(&file, k, format, &mut out),
    }
}

/// "0.01 MeV" style rendering of one quantization step.
fn step(per_unit: u64, milli_unit: &str) -> String {
    format!("{} {milli_unit}", 1000.0 / per_unit as f64)
}

fn info(path: &Path, out: &mut impl Write) -> Result<()> {
    let reader = open(path)?;
    let d = reader.descriptor();
    let stats = reader.statistics()?;
    let file_size = provent::ByteSource::len(reader.source());
    let payload: u64 = reader.entries().iter().map(|e| e.length).sum();
    let overhead = file_size - payload;
    let entries = reader.entries().len() as u64;
    let mu = d.scheme.momentum_unit();
    let lu = d.scheme.length_unit();
    writeln!(out, "file: {}", path.display())?;
    writeln!(out, "format version: {}", d.format_version)?;
    writeln!(out, "description: {}", d.description)?;
    writeln!(
        out,
        "momentum unit: {mu} per GeV ({} step)",
        step(mu, "MeV")
    )?;
    writeln!(out, "length unit: {lu} per mm ({} step)", step(lu, "um"))?;
    writeln!(out, "events: {}", reader.event_count())?;
    writeln!(out, "total particles: {}", stats.total_particles)?;
    writeln!(out, "file size: {file_size} bytes")?;
    writeln!(out, "entries: {entries}")?;
    writeln!(out, "payload bytes: {payload}")?;
    writeln!(
        out,
        "container overhead: {overhead} bytes ({:.1} per entry)",
        overhead as f64 / entries.max(1) as f64
    )?;
    Ok(())
}

fn extract(src: &Path, dst: &Path, n: u64, out: &mut impl Write) -> Result<()> {
    let reader = open(src)?;
    let take = n.min(reader.event_count());
    let mut descriptor = reader.descriptor().clone();
    descriptor.requested_events = take;
    let mut writer = Writer::create(dst, descriptor)?;
    for k in 0..take {
        let mut e = reader.read_event(k)?;
        e.event_number = k;
        writer.append_event(&e)?;
    }
    let summary = writer.close()?;
    writeln!(
        out,
        "extracted {} of {} events",
        summary.events,
        reader.event_count()
    )?;
    Ok(())
}

fn convert(input: &Path, output: &Path, description: String, out: &mut impl Write) -> Result<()> {
    let file = File::open(input).map_err(|e| CliError::Open {
        path: input.to_owned(),
        source: e.into(),
    })?;
    let scheme = QuantizationScheme::default();
    let result = (|| -> provent::Result<ConversionReport> {
        let mut writer = Writer::create(output, FileDescriptor::new(description, scheme))?;
        let mut report = ConversionReport::default();
        for (k, event) in parse_ascii_stream(BufReader::new(file)).enumerate() {
            let (record, r) = to_event_record(&event?, &scheme, k as u64)?;
            writer.append_event(&record)?;
            report.add(&r);
        }
        writer.close()?;
        Ok(report)
    })();
    match result {
        Ok(report) => {
            eprintln!("{report}");
            writeln!(out, "wrote {} events to {}", report.events, output.display())?;
            Ok(())
        }
        Err(e) => {
            let _ = std::fs::remove_file(output);
            Err(e.into())
        }
    }
}

fn generate(flags: &SpectrumFlags, output: &Path, out: &mut impl Write) -> Result<()> {
    let cfg = flags.config();
    let descriptor = FileDescriptor {
        description: format!(
            "generated: pileup mean {}, soft pT {} GeV, {} signal, seed {}",
            cfg.pileup_mean, cfg.pt_soft, cfg.signal_particles, cfg.seed
        ),
        requested_events: cfg.events,
        ..FileDescriptor::default()
    };
    let generator = EventGenerator::new(cfg.clone(), descriptor.scheme)?;
    let mut writer = Writer::create(output, descriptor)?;
    for e in generator {
        writer.append_event(&e?)?;
    }
    let summary = writer.close()?;
    writeln!(out, "seed: {}", cfg.seed)?;
    writeln!(out, "events: {}", summary.events)?;
    writeln!(out, "particles: {}", summary.total_particles)?;
    writeln!(out, "bytes: {}", summary.bytes_written)?;
    Ok(())
}

fn verify(path: &Path, out: &mut impl Write) -> Result<()> {
    let source = FileSource::open(path).map_err(|e| CliError::Open {
        path: path.to_owned(),
        source: e.into(),
    })?;
    let reader = match Reader::open(source) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("FAIL open: {e}");
            return Err(CliError::VerifyFailed(1));
        }
    };
    let mut failures = 0usize;
    let mut fail = |msg: String| {
        eprintln!("FAIL {msg}");
        failures += 1;
    };

    let d = reader.descriptor();
    if d.format_version != FORMAT_VERSION {
        fail(format!("unsupported format version {}", d.format_version));
    }
    if let Err(e) = parse_schema(&d.schema_text) {
        fail(format!("embedded schema: {e}"));
    }

    let mut recomputed = EventIndex::default();
    let mut particles = 0u64;
    let mut events_ok = true;
    for k in 0..reader.event_count() {
        let bytes = match reader.read_event_bytes(k) {
            Ok(b) => b,
            Err(e) => {
                fail(format!("event {k}: {e}"));
                events_ok = false;
                continue;
            }
        };
        if bytes.len() > LARGE_MESSAGE_BYTES {
            eprintln!(
                "warning: event {k} is {} bytes, above the 1 MB guideline",
                bytes.len()
            );
        }
        match decode_event(&bytes) {
            Ok(e) if e.event_number != k => {
                fail(format!("event {k}: stored event number {}", e.event_number));
                events_ok = false;
            }
            Ok(e) => {
                particles += e.particles.len() as u64;
                recomputed.push(&e);
            }
            Err(e) => {
                fail(format!("event {k}: {e}"));
                events_ok = false;
            }
        }
    }

    match reader.index() {
        Ok(stored) if events_ok && *stored != recomputed => {
            let first = (0..stored.len())
                .find(|&i| {
                    stored.particle_count[i] != recomputed.particle_count[i]
                        || stored.max_pt[i] != recomputed.max_pt[i]
                })
                .unwrap_or(0);
            fail(format!("index mismatch at event {first}"));
        }
        Ok(_) => {}
        Err(e) => fail(format!("{INDEX_ENTRY}: {e}")),
    }

    match reader.statistics() {
        Ok(s)
            if events_ok
                && (s.actual_events, s.total_particles) != (reader.event_count(), particles) =>
        {
            fail("statistics mismatch".to_owned());
        }
        Ok(_) => {}
        Err(e) => fail(format!("{STATISTICS_ENTRY}: {e}")),
    }

    for (name, expected) in [
        (NEVENTS_ENTRY, format!("{}\n", reader.event_count())),
        (DESCRIPTION_ENTRY, d.description.clone()),
    ] {
        match reader.read_entry(name) {
            Ok(bytes) if bytes != expected.as_bytes() => fail(format!("{name} mirror mismatch")),
            Ok(_) => {}
            Err(e) => fail(format!("{name}: {e}")),
        }
    }

    if failures > 0 {
        return Err(CliError::VerifyFailed(failures));
    }
    writeln!(
        out,
        "ok: {} events, {} particles, {} entries",
        reader.event_count(),
        particles,
        reader.entries().len()
    )?;
    Ok(())
}

fn cat(path: &Path, k: u64, format: Format, out: &mut impl Write) -> Result<()> {
    let reader = open(path)?;
    let d = reader.descriptor();
    let table = parse_schema(&d.schema_text).map_err(provent::Error::from)?;
    let bytes = reader.read_event_bytes(k)?;
    let decoded = generic_decode(&bytes, &table, "EventRecord", &d.scheme)?
        .with_defaults(&table, "EventRecord")?;
    match format {
        Format::Json => {
            writeln!(out, "{:#}", decoded.to_json())?;
        }
        Format::Text => {
            writeln!(out, "event {k} (momenta in GeV, lengths in mm)")?;
            out.write_all(decoded.to_text().as_bytes())?;
        }
    }
    Ok(())
}
