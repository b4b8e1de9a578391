//! HepMC2 `IO_GenEvent` ASCII subset.
//!
//! Only `E`, `V`, `P` and `U` records are interpreted; every other line
//! (version banner, `N`, `C`, `H`, `F` records, listing delimiters) is
//! skipped. Fields are positional:
//!
//! ```text
//! E number n_mpi scale alpha_qcd alpha_qed process_id signal_vertex n_vertices
//!   beam1 beam2 n_random [random...] n_weights [weight...]
//! V barcode id x y z t n_orphan_in n_out n_weights [weight...]
//! P barcode pdg_id px py pz e m status theta phi end_vertex n_flow [flow...]
//! U momentum_unit length_unit
//! ```
//!
//! The first `n_orphan_in` particles after a `V` line are incoming to that
//! vertex and have no production vertex; the rest are produced there.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use super::IngestError;
use crate::error::Result;
use crate::model::{EventRecord, Particle, ParticleBlock};
use crate::quant::QuantizationScheme;

#[derive(Debug, Clone, PartialEq)]
pub struct AsciiParticle {
    pub barcode: i64,
    pub pdg_id: i32,
    /// px, py, pz, E in GeV.
    pub momentum: [f64; 4],
    pub mass: f64,
    pub status: u32,
    /// 0 for stable particles.
    pub end_vertex: i64,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsciiVertex {
    pub barcode: i64,
    /// x, y, z in mm; t in mm/c.
    pub position: [f64; 4],
    pub n_orphan_in: usize,
    /// Orphan incoming particles first, then outgoing ones.
    pub particles: Vec<AsciiParticle>,
    pub line: usize,
}

impl AsciiVertex {
    pub fn outgoing(&self) -> &[AsciiParticle] {
        &self.particles[self.n_orphan_in.min(self.particles.len())..]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsciiEvent {
    pub number: i64,
    pub process_id: i64,
    /// First entry of the weight list, 1.0 when the list is empty.
    pub weight: f64,
    pub declared_vertices: usize,
    pub vertices: Vec<AsciiVertex>,
    pub line: usize,
}

impl AsciiEvent {
    pub fn particles(&self) -> impl Iterator<Item = &AsciiParticle> {
        self.vertices.iter().flat_map(|v| v.particles.iter())
    }

    pub fn particle_count(&self) -> usize {
        self.vertices.iter().map(|v| v.particles.len()).sum()
    }
}

struct Fields<'a> {
    kind: char,
    line: usize,
    tokens: std::str::SplitWhitespace<'a>,
}

impl<'a> Fields<'a> {
    fn next_raw(&mut self, what: &str) -> Result<&'a str, IngestError> {
        self.tokens
            .next()
            .ok_or_else(|| IngestError::MalformedLine {
                line: self.line,
                kind: self.kind,
                token: String::new(),
                reason: format!("missing {what}"),
            })
    }

    fn next<T: FromStr>(&mut self, what: &str) -> Result<T, IngestError> {
        let token = self.next_raw(what)?;
        token.parse().map_err(|_| IngestError::MalformedLine {
            line: self.line,
            kind: self.kind,
            token: token.to_owned(),
            reason: format!("invalid {what}"),
        })
    }

    fn next_finite(&mut self, what: &str) -> Result<f64, IngestError> {
        let token = self.next_raw(what)?;
        match token.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(IngestError::MalformedLine {
                line: self.line,
                kind: self.kind,
                token: token.to_owned(),
                reason: format!("invalid {what}"),
            }),
        }
    }
}

/// Streaming parser; yields one [`AsciiEvent`] per `E` record.
pub struct AsciiParser<R> {
    lines: io::Lines<R>,
    line: usize,
    current: Option<AsciiEvent>,
    failed: bool,
}

pub fn parse_ascii_stream<R: BufRead>(input: R) -> AsciiParser<R> {
    AsciiParser {
        lines: input.lines(),
        line: 0,
        current: None,
        failed: false,
    }
}

impl<R: BufRead> AsciiParser<R> {
    fn finish(event: AsciiEvent) -> Result<AsciiEvent, IngestError> {
        if event.vertices.len() != event.declared_vertices {
            return Err(IngestError::Inconsistent {
                line: event.line,
                message: format!(
                    "event {} declares {} vertices, found {}",
                    event.number,
                    event.declared_vertices,
                    event.vertices.len()
                ),
            });
        }
        let known: std::collections::HashSet<i64> =
            event.vertices.iter().map(|v| v.barcode).collect();
        for p in event.particles() {
            if p.end_vertex != 0 && !known.contains(&p.end_vertex) {
                return Err(IngestError::DanglingReference {
                    line: p.line,
                    barcode: p.barcode,
                    vertex: p.end_vertex,
                });
            }
        }
        Ok(event)
    }

    fn parse_event_line(&self, text: &str) -> Result<AsciiEvent, IngestError> {
        let mut f = Fields {
            kind: 'E',
            line: self.line,
            tokens: text.split_whitespace(),
        };
        f.next_raw("record type")?;
        let number = f.next("event number")?;
        f.next::<i64>("n_mpi")?;
        f.next::<f64>("event scale")?;
        f.next::<f64>("alpha_qcd")?;
        f.next::<f64>("alpha_qed")?;
        let process_id = f.next("signal process id")?;
        f.next::<i64>("signal vertex barcode")?;
        let declared_vertices = f.next("vertex count")?;
        let mut weight = 1.0;
        // beams, random states and weights are optional trailers
        if f.tokens.clone().next().is_some() {
            f.next::<i64>("beam 1 barcode")?;
            f.next::<i64>("beam 2 barcode")?;
            let n_random: usize = f.next("random state count")?;
            for _ in 0..n_random {
                f.next::<i64>("random state")?;
            }
            let n_weights: usize = f.next("weight count")?;
            for i in 0..n_weights {
                let w = f.next_finite("weight")?;
                if i == 0 {
                    weight = w;
                }
            }
        }
        Ok(AsciiEvent {
            number,
            process_id,
            weight,
            declared_vertices,
            vertices: vec![],
            line: self.line,
        })
    }

    fn parse_vertex_line(&self, text: &str) -> Result<AsciiVertex, IngestError> {
        let mut f = Fields {
            kind: 'V',
            line: self.line,
            tokens: text.split_whitespace(),
        };
        f.next_raw("record type")?;
        let barcode = f.next("vertex barcode")?;
        f.next::<i64>("vertex id")?;
        let position = [
            f.next_finite("x")?,
            f.next_finite("y")?,
            f.next_finite("z")?,
            f.next_finite("t")?,
        ];
        let n_orphan_in = f.next("orphan count")?;
        f.next::<usize>("outgoing count")?;
        Ok(AsciiVertex {
            barcode,
            position,
            n_orphan_in,
            particles: vec![],
            line: self.line,
        })
    }

    fn parse_particle_line(&self, text: &str) -> Result<AsciiParticle, IngestError> {
        let mut f = Fields {
            kind: 'P',
            line: self.line,
            tokens: text.split_whitespace(),
        };
        f.next_raw("record type")?;
        let barcode = f.next("particle barcode")?;
        let pdg_id = f.next("pdg id")?;
        let momentum = [
            f.next_finite("px")?,
            f.next_finite("py")?,
            f.next_finite("pz")?,
            f.next_finite("energy")?,
        ];
        let mass = f.next_finite("mass")?;
        let status = f.next("status")?;
        f.next::<f64>("theta")?;
        f.next::<f64>("phi")?;
        let end_vertex = f.next("end vertex barcode")?;
        Ok(AsciiParticle {
            barcode,
            pdg_id,
            momentum,
            mass,
            status,
            end_vertex,
            line: self.line,
        })
    }

    fn step(&mut self, text: &str) -> Result<Option<AsciiEvent>, IngestError> {
        let malformed = |line, kind, reason: &str| IngestError::MalformedLine {
            line,
            kind,
            token: String::new(),
            reason: reason.to_owned(),
        };
        let mut tokens = text.split_whitespace();
        match tokens.next() {
            Some("E") => {
                let next = self.parse_event_line(text)?;
                match self.current.replace(next) {
                    Some(done) => Self::finish(done).map(Some),
                    None => Ok(None),
                }
            }
            Some("V") => {
                let v = self.parse_vertex_line(text)?;
                let line = self.line;
                let event = self
                    .current
                    .as_mut()
                    .ok_or_else(|| malformed(line, 'V', "vertex before any event"))?;
                event.vertices.push(v);
                Ok(None)
            }
            Some("P") => {
                let p = self.parse_particle_line(text)?;
                let line = self.line;
                let vertex = self
                    .current
                    .as_mut()
                    .and_then(|e| e.vertices.last_mut())
                    .ok_or_else(|| malformed(line, 'P', "particle before any vertex"))?;
                vertex.particles.push(p);
                Ok(None)
            }
            Some("U") => {
                let units: Vec<&str> = tokens.collect();
                if units != ["GEV", "MM"] {
                    return Err(IngestError::Units {
                        line: self.line,
                        found: units.join(" "),
                    });
                }
                Ok(None)
            }
            _ => Ok(None),
        }
    }
}

impl<R: BufRead> Iterator for AsciiParser<R> {
    type Item = Result<AsciiEvent, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let Some(line) = self.lines.next() else {
                return self.current.take().map(Self::finish);
            };
            self.line += 1;
            let result = match line {
                Ok(text) => self.step(&text),
                Err(e) => Err(IngestError::Read {
                    line: self.line,
                    message: e.to_string(),
                }),
            };
            match result {
                Ok(None) => continue,
                Ok(Some(event)) => return Some(Ok(event)),
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

/// Counters reported by a conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConversionReport {
    pub events: u64,
    pub particles: u64,
    /// Vertices with more than two incoming particles; only the two
    /// lowest barcodes are kept as mothers.
    pub mother_truncations: u64,
    /// Vertices with more than two outgoing particles; only the two lowest
    /// barcodes are kept as daughters.
    pub daughter_truncations: u64,
}

impl ConversionReport {
    pub fn add(&mut self, other: &ConversionReport) {
        self.events += other.events;
        self.particles += other.particles;
        self.mother_truncations += other.mother_truncations;
        self.daughter_truncations += other.daughter_truncations;
    }
}

impl fmt::Display for ConversionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "events converted: {}", self.events)?;
        writeln!(f, "particles converted: {}", self.particles)?;
        writeln!(
            f,
            "vertices with >2 mothers (truncated to 2): {}",
            self.mother_truncations
        )?;
        writeln!(
            f,
            "vertices with >2 daughters (truncated to 2): {}",
            self.daughter_truncations
        )?;
        write!(
            f,
            "kept: barcode, pdg id, status, px, py, pz, generated mass, production vertex; \
             dropped: energy, theta, phi, flow, vertex weights"
        )
    }
}

/// Converts one parsed event into a record with ordinal `event_number`.
pub fn to_event_record(
    a: &AsciiEvent,
    scheme: &QuantizationScheme,
    event_number: u64,
) -> Result<(EventRecord, ConversionReport)> {
    // (particle, production vertex position in a.vertices)
    let mut rows: Vec<(&AsciiParticle, Option<usize>)> = Vec::with_capacity(a.particle_count());
    for (vi, v) in a.vertices.iter().enumerate() {
        for (pi, p) in v.particles.iter().enumerate() {
            rows.push((p, (pi >= v.n_orphan_in).then_some(vi)));
        }
    }
    rows.sort_by_key(|(p, _)| p.barcode);
    if let Some(w) = rows.windows(2).find(|w| w[0].0.barcode == w[1].0.barcode) {
        return Err(IngestError::Inconsistent {
            line: w[1].0.line,
            message: format!("duplicate particle barcode {}", w[0].0.barcode),
        }
        .into());
    }

    let vertex_pos: HashMap<i64, usize> = a
        .vertices
        .iter()
        .enumerate()
        .map(|(i, v)| (v.barcode, i))
        .collect();
    // sorted by barcode because rows are
    let mut incoming: Vec<Vec<u32>> = vec![vec![]; a.vertices.len()];
    let mut outgoing: Vec<Vec<u32>> = vec![vec![]; a.vertices.len()];
    for (i, (p, prod)) in rows.iter().enumerate() {
        if let Some(v) = prod {
            outgoing[*v].push(i as u32);
        }
        if p.end_vertex != 0 {
            let v = vertex_pos
                .get(&p.end_vertex)
                .ok_or(IngestError::DanglingReference {
                    line: p.line,
                    barcode: p.barcode,
                    vertex: p.end_vertex,
                })?;
            incoming[*v].push(i as u32);
        }
    }

    let mut report = ConversionReport {
        events: 1,
        particles: rows.len() as u64,
        ..Default::default()
    };
    for (inc, out) in incoming.iter().zip(&outgoing) {
        if inc.len() > 2 && !out.is_empty() {
            report.mother_truncations += 1;
        }
        if out.len() > 2 && !inc.is_empty() {
            report.daughter_truncations += 1;
        }
    }

    let first_two = |links: &[u32]| [links.first().copied(), links.get(1).copied()];
    let mut block = ParticleBlock::new();
    for (p, prod) in &rows {
        let mothers = prod.map_or([None, None], |v| first_two(&incoming[v]));
        let daughters = match p.end_vertex {
            0 => [None, None],
            bc => first_two(&outgoing[vertex_pos[&bc]]),
        };
        let position = prod.map_or([0.0; 4], |v| a.vertices[v].position);
        let mut vertex = [0i64; 4];
        for (q, x) in vertex.iter_mut().zip(position) {
            *q = scheme.quantize_length(x)?;
        }
        let [px, py, pz, _energy] = p.momentum;
        block.push(&Particle {
            pdg_id: p.pdg_id,
            status: p.status,
            px: scheme.quantize_momentum(px)?,
            py: scheme.quantize_momentum(py)?,
            pz: scheme.quantize_momentum(pz)?,
            mass: scheme.quantize_momentum(p.mass)?,
            mothers,
            daughters,
            barcode: Some(p.barcode),
            vertex: Some(vertex),
        });
    }

    let record = EventRecord {
        event_number,
        process_id: a.process_id,
        weight: a.weight,
        particles: block,
    };
    Ok((record, report))
}

/// Writes events as HepMC2 ASCII with every particle outgoing from a single
/// vertex at the origin. Lineage and vertex positions are not exported; this
/// is the text baseline for size comparisons and parser round trips.
pub fn write_ascii<'a, W, I>(out: &mut W, events: I, scheme: &QuantizationScheme) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a EventRecord>,
{
    writeln!(out)?;
    writeln!(out, "HepMC::Version 2.06.09")?;
    writeln!(out, "HepMC::IO_GenEvent-START_EVENT_LISTING")?;
    for e in events {
        let n = e.particles.len();
        writeln!(
            out,
            "E {} -1 -1.0000000000000000e+00 -1.0000000000000000e+00 -1.0000000000000000e+00 {} -1 1 0 0 0 1 {:.16e}",
            e.event_number, e.process_id, e.weight
        )?;
        writeln!(out, "U GEV MM")?;
        writeln!(out, "V -1 0 0 0 0 0 0 {n} 0")?;
        for i in 0..n {
            let p = &e.particles;
            let [px, py, pz, m] =
                [p.px[i], p.py[i], p.pz[i], p.mass[i]].map(|q| scheme.momentum(q));
            let energy = p.energy(i, scheme);
            let barcode = p.barcode.get(i).copied().unwrap_or(i as i64 + 1);
            let pt = px.hypot(py);
            let theta = pt.atan2(pz);
            let phi = py.atan2(px);
            writeln!(
                out,
                "P {barcode} {} {px:.16e} {py:.16e} {pz:.16e} {energy:.16e} {m:.16e} {} {theta:.16e} {phi:.16e} 0 0",
                p.pdg_id[i], p.status[i]
            )?;
        }
    }
    writeln!(out, "HepMC::IO_GenEvent-END_EVENT_LISTING")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    const SINGLE: &str = "\
HepMC::Version 2.06.09
HepMC::IO_GenEvent-START_EVENT_LISTING
E 1 -1 -1.0e+00 -1.0e+00 -1.0e+00 20 -1 1 0 0 0 1 2.5e+00
U GEV MM
V -1 0 0.1 0.2 0.3 0.4 0 2 0
P 1 211 1.25 -0.5 10.0 10.09 0.13957 1 0 0 0 0
P 2 -211 -1.25 0.5 -10.0 10.09 0.13957 1 0 0 0 0
HepMC::IO_GenEvent-END_EVENT_LISTING
";

    fn parse(text: &str) -> Vec<Result<AsciiEvent, IngestError>> {
        parse_ascii_stream(text.as_bytes()).collect()
    }

    #[test]
    fn empty_input() {
        assert!(parse("").is_empty());
        assert!(parse("HepMC::Version 2.06.09\n").is_empty());
    }

    #[test]
    fn single_event() {
        let events = parse(SINGLE);
        assert_eq!(events.len(), 1);
        let e = events[0].as_ref().unwrap();
        assert_eq!(e.number, 1);
        assert_eq!(e.process_id, 20);
        assert_eq!(e.weight, 2.5);
        assert_eq!(e.particle_count(), 2);
        let p = &e.vertices[0].particles[0];
        assert_eq!(p.pdg_id, 211);
        assert_eq!(p.momentum, [1.25, -0.5, 10.0, 10.09]);
        assert_eq!(p.line, 6);
    }

    #[test]
    fn non_numeric_momentum() {
        let bad = SINGLE.replace("P 2 -211 -1.25", "P 2 -211 abc");
        let events = parse(&bad);
        match &events[0] {
            Err(IngestError::MalformedLine {
                line, kind, token, ..
            }) => {
                assert_eq!((*line, *kind, token.as_str()), (7, 'P', "abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(events.len(), 1);
    }

    #[test]
    fn dangling_end_vertex() {
        let bad = SINGLE.replace("0.13957 1 0 0 0 0\nP 2", "0.13957 2 0 0 -7 0\nP 2");
        assert!(matches!(
            parse(&bad)[0],
            Err(IngestError::DanglingReference { vertex: -7, .. })
        ));
    }

    #[test]
    fn units_must_be_gev_mm() {
        let bad = SINGLE.replace("U GEV MM", "U MEV MM");
        assert!(matches!(
            parse(&bad)[0],
            Err(IngestError::Units { line: 4, .. })
        ));
    }

    #[test]
    fn particle_before_vertex() {
        let bad = "E 1 -1 -1 -1 -1 0 0 0\nP 1 22 0 0 0 0 0 1 0 0 0 0\n";
        assert!(matches!(
            parse(bad)[0],
            Err(IngestError::MalformedLine {
                line: 2,
                kind: 'P',
                ..
            })
        ));
    }

    #[test]
    fn stable_particles_have_no_daughters() {
        let e = parse(SINGLE).remove(0).unwrap();
        let scheme = QuantizationScheme::default();
        let (rec, report) = to_event_record(&e, &scheme, 0).unwrap();
        assert_eq!(rec.particles.len(), 2);
        assert_eq!(rec.particles.daughter1, [None, None]);
        assert_eq!(rec.particles.mother1, [None, None]);
        assert_eq!(rec.particles.px, [125_000, -125_000]);
        assert_eq!(rec.particles.x, [100, 100]);
        assert_eq!(rec.weight, 2.5);
        assert_eq!(report.mother_truncations, 0);
    }

    #[test]
    fn lineage_and_truncation() {
        // three incoming beams annihilate at -1 into two particles, one of
        // which decays at -2 into three
        let text = "\
E 0 -1 -1 -1 -1 7 -1 2 0 0 0 0
U GEV MM
V -1 0 0 0 0 0 3 2 0
P 3 2212 0 0 10 10 0.938 4 0 0 -1 0
P 1 2212 0 0 -10 10 0.938 4 0 0 -1 0
P 2 22 0 0 1 1 0 4 0 0 -1 0
P 5 23 1 0 0 91.2 91.2 2 0 0 -2 0
P 4 22 -1 0 0 1 0 1 0 0 0 0
V -2 0 1 0 0 0 0 3 0
P 8 11 1 0 0 1 0 1 0 0 0 0
P 6 -11 1 0 0 1 0 1 0 0 0 0
P 7 22 1 0 0 1 0 1 0 0 0 0
";
        let e = parse(text).remove(0).unwrap();
        let (rec, report) = to_event_record(&e, &QuantizationScheme::default(), 0).unwrap();
        let b = &rec.particles;
        assert_eq!(b.barcode, [1, 2, 3, 4, 5, 6, 7, 8]);
        // particle 4 (index 3) and 5 (index 4) come from -1: mothers 1, 2
        assert_eq!((b.mother1[3], b.mother2[3]), (Some(0), Some(1)));
        assert_eq!((b.mother1[4], b.mother2[4]), (Some(0), Some(1)));
        // beams have daughters 4, 5
        assert_eq!((b.daughter1[2], b.daughter2[2]), (Some(3), Some(4)));
        // Z decays to 6, 7, 8: first two kept
        assert_eq!((b.daughter1[4], b.daughter2[4]), (Some(5), Some(6)));
        assert_eq!((b.mother1[7], b.mother2[7]), (Some(4), None));
        assert_eq!(b.x[5], 1000);
        assert_eq!(report.mother_truncations, 1);
        assert_eq!(report.daughter_truncations, 1);
        assert_eq!(rec.process_id, 7);
    }

    #[test]
    fn duplicate_barcodes_rejected() {
        let bad = SINGLE.replace("P 2 -211", "P 1 -211");
        let e = parse(&bad).remove(0).unwrap();
        assert!(matches!(
            to_event_record(&e, &QuantizationScheme::default(), 0),
            Err(Error::Ingest(IngestError::Inconsistent { .. }))
        ));
    }

    #[test]
    fn vertex_count_checked() {
        let bad = SINGLE.replace("20 -1 1 0", "20 -1 2 0");
        assert!(matches!(
            parse(&bad)[0],
            Err(IngestError::Inconsistent { .. })
        ));
    }

    #[test]
    fn ascii_writer_roundtrip() {
        let scheme = QuantizationScheme::default();
        let e = parse(SINGLE).remove(0).unwrap();
        let (rec, _) = to_event_record(&e, &scheme, 0).unwrap();
        let mut text = vec![];
        write_ascii(&mut text, [&rec], &scheme).unwrap();
        let back = parse(std::str::from_utf8(&text).unwrap())
            .remove(0)
            .unwrap();
        let (rec2, _) = to_event_record(&back, &scheme, 0).unwrap();
        assert_eq!(rec2.particles.px, rec.particles.px);
        assert_eq!(rec2.particles.pz, rec.particles.pz);
        assert_eq!(rec2.particles.mass, rec.particles.mass);
        assert_eq!(rec2.particles.pdg_id, rec.particles.pdg_id);
        assert_eq!(rec2.weight, rec.weight);
    }
}
