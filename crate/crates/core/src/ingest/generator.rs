//! Deterministic signal + pileup event generator.
//!
//! Stream: xoshiro256** seeded through SplitMix64 from a single `u64`.
//! Uniform doubles take the top 53 bits of each output. Per event, draws
//! happen in this order:
//!
//! 1. one uniform deciding whether the event carries signal
//!    (`u < signal_fraction`),
//! 2. the pileup multiplicity, Poisson(`pileup_mean`) by Knuth's product
//!    method, split into chunks of mean at most 500,
//! 3. for each signal particle: pT ~ U(pt_hard_min, pt_hard_max), phi, eta,
//! 4. for each pileup particle: pT ~ Exp(mean `pt_soft`), phi, eta, charge.
//!
//! Signal particles come first in the block. `process_id` is 1 for events
//! with signal and 0 otherwise. No lineage and no vertices are generated.

use std::f64::consts::TAU;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use super::IngestError;
use crate::error::Result;
use crate::model::{EventRecord, Particle};
use crate::quant::QuantizationScheme;

pub const PION_MASS_GEV: f64 = 0.13957;
pub const HARD_MASS_GEV: f64 = 125.0;
const HARD_PDG: i32 = 25;
const ETA_MAX: f64 = 2.5;
const POISSON_CHUNK: f64 = 500.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumConfig {
    pub events: u64,
    pub pileup_mean: f64,
    /// Mean of the exponential soft-pT spectrum, GeV.
    pub pt_soft: f64,
    pub signal_particles: u32,
    pub pt_hard_min: f64,
    pub pt_hard_max: f64,
    /// Probability that an event carries the signal particles.
    pub signal_fraction: f64,
    pub seed: u64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            events: 1000,
            pileup_mean: 100.0,
            pt_soft: 0.5,
            signal_particles: 2,
            pt_hard_min: 500.0,
            pt_hard_max: 2000.0,
            signal_fraction: 1.0,
            seed: 1,
        }
    }
}

impl SpectrumConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |msg: &str| Err(IngestError::Config(msg.to_owned()));
        if !(self.pileup_mean.is_finite() && self.pileup_mean >= 0.0) {
            return bad("pileup mean must be finite and >= 0");
        }
        if !(self.pt_soft.is_finite() && self.pt_soft > 0.0) {
            return bad("soft pT mean must be finite and > 0");
        }
        if !(self.pt_hard_min.is_finite() && self.pt_hard_min > 0.0) {
            return bad("hard pT minimum must be finite and > 0");
        }
        if !(self.pt_hard_max.is_finite() && self.pt_hard_max >= self.pt_hard_min) {
            return bad("hard pT maximum must be finite and >= the minimum");
        }
        if !(0.0..=1.0).contains(&self.signal_fraction) {
            return bad("signal fraction must lie in [0, 1]");
        }
        Ok(())
    }

    /// Expected particles per event.
    pub fn mean_multiplicity(&self) -> f64 {
        self.pileup_mean + self.signal_fraction * f64::from(self.signal_particles)
    }
}

#[derive(Debug, Clone)]
pub struct EventGenerator {
    cfg: SpectrumConfig,
    scheme: QuantizationScheme,
    rng: Xoshiro256StarStar,
    next: u64,
}

impl EventGenerator {
    pub fn new(cfg: SpectrumConfig, scheme: QuantizationScheme) -> Result<Self> {
        cfg.validate()?;
        Ok(EventGenerator {
            rng: Xoshiro256StarStar::seed_from_u64(cfg.seed),
            cfg,
            scheme,
            next: 0,
        })
    }

    pub fn config(&self) -> &SpectrumConfig {
        &self.cfg
    }

    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn poisson(&mut self, mean: f64) -> u64 {
        let mut remaining = mean;
        let mut total = 0;
        while remaining > 0.0 {
            let chunk = remaining.min(POISSON_CHUNK);
            remaining -= chunk;
            let limit = (-chunk).exp();
            let mut p = 1.0;
            loop {
                p *= self.uniform();
                if p <= limit {
                    break;
                }
                total += 1;
            }
        }
        total
    }

    fn particle(&mut self, pdg_id: i32, pt: f64, mass: f64) -> Result<Particle> {
        let phi = TAU * self.uniform();
        let eta = ETA_MAX * (2.0 * self.uniform() - 1.0);
        let s = &self.scheme;
        Ok(Particle {
            pdg_id,
            status: 1,
            px: s.quantize_momentum(pt * phi.cos())?,
            py: s.quantize_momentum(pt * phi.sin())?,
            pz: s.quantize_momentum(pt * eta.sinh())?,
            mass: s.quantize_momentum(mass)?,
            ..Particle::default()
        })
    }

    fn event(&mut self) -> Result<EventRecord> {
        let has_signal = self.uniform() < self.cfg.signal_fraction;
        let n_soft = self.poisson(self.cfg.pileup_mean);
        let mut event = EventRecord {
            event_number: self.next,
            process_id: i64::from(has_signal),
            ..EventRecord::default()
        };
        if has_signal {
            let (lo, hi) = (self.cfg.pt_hard_min, self.cfg.pt_hard_max);
            for _ in 0..self.cfg.signal_particles {
                let pt = lo + (hi - lo) * self.uniform();
                let p = self.particle(HARD_PDG, pt, HARD_MASS_GEV)?;
                event.particles.push(&p);
            }
        }
        for _ in 0..n_soft {
            let pt = -self.cfg.pt_soft * (1.0 - self.uniform()).ln();
            let mut p = self.particle(211, pt, PION_MASS_GEV)?;
            if self.uniform() < 0.5 {
                p.pdg_id = -211;
            }
            event.particles.push(&p);
        }
        self.next += 1;
        Ok(event)
    }
}

impl Iterator for EventGenerator {
    type Item = Result<EventRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        (self.next < self.cfg.events).then(|| self.event())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = usize::try_from(self.cfg.events - self.next).unwrap_or(usize::MAX);
        (left, Some(left))
    }
}
