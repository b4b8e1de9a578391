#![allow(dead_code)]

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use provent::ingest::{
    parse_ascii_stream, to_event_record, ConversionReport, EventGenerator, SpectrumConfig,
};
use provent::model::{EventRecord, FileDescriptor};
use provent::{QuantizationScheme, Writer};
use serde_json::{json, Value};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub const GOLDEN: &str = "golden.pvt";
pub const LINEAGE: &str = "lineage.pvt";

pub fn golden_config() -> SpectrumConfig {
    SpectrumConfig {
        events: 2,
        pileup_mean: 5.0,
        pt_soft: 0.5,
        signal_particles: 2,
        pt_hard_min: 500.0,
        pt_hard_max: 2000.0,
        signal_fraction: 1.0,
        seed: 7,
    }
}

pub fn golden_events() -> Vec<EventRecord> {
    EventGenerator::new(golden_config(), QuantizationScheme::default())
        .unwrap()
        .map(Result::unwrap)
        .collect()
}

pub fn write_container(events: &[EventRecord], description: &str) -> Vec<u8> {
    let mut d = FileDescriptor::new(description, QuantizationScheme::default());
    d.requested_events = events.len() as u64;
    let mut w = Writer::new(Vec::new(), d).unwrap();
    for e in events {
        w.append_event(e).unwrap();
    }
    w.finish().unwrap().0
}

pub fn golden_bytes() -> Vec<u8> {
    write_container(&golden_events(), "golden two-event fixture, seed 7")
}

/// HepMC fixture, expected events, particles, mother and daughter
/// truncations.
pub const HEPMC_FIXTURES: [(&str, u64, u64, u64, u64); 2] =
    [("single.hepmc", 1, 2, 0, 0), ("lineage.hepmc", 2, 18, 2, 2)];

pub fn convert_fixture(name: &str) -> (Vec<EventRecord>, ConversionReport) {
    let scheme = QuantizationScheme::default();
    let file = BufReader::new(File::open(fixture(name)).unwrap());
    let mut report = ConversionReport::default();
    let mut events = vec![];
    for (k, a) in parse_ascii_stream(file).enumerate() {
        let (e, r) = to_event_record(&a.unwrap(), &scheme, k as u64).unwrap();
        report.add(&r);
        events.push(e);
    }
    (events, report)
}

pub fn lineage_bytes() -> Vec<u8> {
    write_container(&convert_fixture("lineage.hepmc").0, "lineage fixture")
}

/// Container fixtures shipped in the repository.
pub fn container_fixtures() -> Vec<(&'static str, Vec<u8>)> {
    [GOLDEN, LINEAGE]
        .into_iter()
        .map(|name| (name, std::fs::read(fixture(name)).unwrap()))
        .collect()
}

/// Expected schema-driven JSON for a typed event: every column present,
/// quantized columns dequantized, links 1-based with 0 for none.
pub fn typed_json(e: &EventRecord, scheme: &QuantizationScheme) -> Value {
    let p = &e.particles;
    let mom = |c: &[i64]| c.iter().map(|&q| scheme.momentum(q)).collect::<Vec<_>>();
    let len = |c: &[i64]| c.iter().map(|&q| scheme.length(q)).collect::<Vec<_>>();
    let link = |c: &[Option<u32>]| {
        c.iter()
            .map(|l| l.map_or(0, |i| u64::from(i) + 1))
            .collect::<Vec<_>>()
    };
    json!({
        "event_number": e.event_number,
        "process_id": e.process_id,
        "weight": e.weight,
        "particles": {
            "pdg_id": p.pdg_id,
            "status": p.status,
            "px": mom(&p.px),
            "py": mom(&p.py),
            "pz": mom(&p.pz),
            "mass": mom(&p.mass),
            "mother1": link(&p.mother1),
            "mother2": link(&p.mother2),
            "daughter1": link(&p.daughter1),
            "daughter2": link(&p.daughter2),
            "barcode": p.barcode,
            "x": len(&p.x),
            "y": len(&p.y),
            "z": len(&p.z),
            "t": len(&p.t),
        }
    })
}
