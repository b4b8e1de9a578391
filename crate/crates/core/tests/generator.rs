use provent::ingest::{EventGenerator, SpectrumConfig};
use provent::wire::{uvarint_len, zigzag_encode};
use provent::QuantizationScheme;

fn events(cfg: SpectrumConfig) -> impl Iterator<Item = provent::EventRecord> {
    EventGenerator::new(cfg, QuantizationScheme::default())
        .unwrap()
        .map(Result::unwrap)
}

#[test]
fn single_signal_particle_without_pileup() {
    let cfg = SpectrumConfig {
        events: 500,
        pileup_mean: 0.0,
        signal_particles: 1,
        ..Default::default()
    };
    for e in events(cfg) {
        assert_eq!(e.particles.len(), 1);
        assert_eq!(e.particles.pdg_id, [25]);
        assert_eq!(e.particles.status, [1]);
    }
}

#[test]
fn sample_mean_multiplicity() {
    let n = 10_000u64;
    let cfg = SpectrumConfig {
        events: n,
        pileup_mean: 100.0,
        signal_particles: 2,
        seed: 99,
        ..Default::default()
    };
    let expected = cfg.mean_multiplicity();
    let total: usize = events(cfg).map(|e| e.particles.len()).sum();
    let mean = total as f64 / n as f64;
    // the signal count is fixed, so the variance is the Poisson one
    let se = (100.0 / n as f64).sqrt();
    assert!((mean - expected).abs() < 3.0 * se, "mean {mean}, expected {expected}");
}

fn momentum_bytes_per_particle(cfg: SpectrumConfig) -> f64 {
    let (mut bytes, mut n) = (0usize, 0usize);
    for e in events(cfg) {
        let p = &e.particles;
        for col in [&p.px, &p.py, &p.pz] {
            bytes += col.iter().map(|&q| uvarint_len(zigzag_encode(q))).sum::<usize>();
        }
        n += p.len();
    }
    bytes as f64 / n as f64
}

#[test]
fn soft_particles_cost_fewer_momentum_bytes() {
    let soft = momentum_bytes_per_particle(SpectrumConfig {
        events: 200,
        pileup_mean: 50.0,
        pt_soft: 0.5,
        signal_particles: 0,
        ..Default::default()
    });
    let hard = momentum_bytes_per_particle(SpectrumConfig {
        events: 200,
        pileup_mean: 0.0,
        signal_particles: 50,
        pt_hard_min: 90.0,
        pt_hard_max: 110.0,
        ..Default::default()
    });
    assert!(soft < hard, "soft {soft} vs hard {hard}");
}

#[test]
fn signal_fraction_labels_events() {
    let cfg = SpectrumConfig {
        events: 2000,
        pileup_mean: 3.0,
        signal_fraction: 0.25,
        ..Default::default()
    };
    let mut with_signal = 0;
    for e in events(cfg) {
        let has = e.particles.pdg_id.contains(&25);
        assert_eq!(e.process_id, i64::from(has));
        with_signal += usize::from(has);
    }
    // binomial(2000, 0.25): sd about 19
    assert!((with_signal as i64 - 500).abs() < 100, "{with_signal}");
}
