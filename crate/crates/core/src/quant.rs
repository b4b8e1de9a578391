//! Fixed-point quantization of momenta, masses and vertex positions.
//!
//! A real value `v` is stored as `round(v * unit)` where `unit` is the number
//! of integer steps per GeV (momenta, masses) or per millimetre (positions).
//! Ties round away from zero, so `quantize(-v) == -quantize(v)`.

use thiserror::Error;

use crate::wire::{uvarint_len, zigzag_encode};

/// 0.01 MeV steps.
pub const DEFAULT_MOMENTUM_UNIT: u64 = 100_000;
/// 1 µm steps.
pub const DEFAULT_LENGTH_UNIT: u64 = 1_000;

// 2^63 as f64; anything with |x| >= this does not fit in i64 symmetrically.
const I64_LIMIT: f64 = 9_223_372_036_854_775_808.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum QuantError {
    #[error("value {value} overflows a 64-bit integer at unit {unit}")]
    Overflow { value: f64, unit: u64 },
    #[error("value {0} is not finite")]
    NonFinite(f64),
    #[error("quantization unit must be at least 1")]
    ZeroUnit,
}

/// Per-file conversion factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuantizationScheme {
    momentum_unit: u64,
    length_unit: u64,
}

impl QuantizationScheme {
    pub fn new(momentum_unit: u64, length_unit: u64) -> Result<Self, QuantError> {
        if momentum_unit == 0 || length_unit == 0 {
            return Err(QuantError::ZeroUnit);
        }
        Ok(QuantizationScheme {
            momentum_unit,
            length_unit,
        })
    }

    /// Integer steps per GeV.
    pub fn momentum_unit(&self) -> u64 {
        self.momentum_unit
    }

    /// Integer steps per millimetre.
    pub fn length_unit(&self) -> u64 {
        self.length_unit
    }

    pub fn quantize_momentum(&self, gev: f64) -> Result<i64, QuantError> {
        quantize(gev, self.momentum_unit)
    }

    pub fn quantize_length(&self, mm: f64) -> Result<i64, QuantError> {
        quantize(mm, self.length_unit)
    }

    pub fn momentum(&self, q: i64) -> f64 {
        dequantize(q, self.momentum_unit)
    }

    pub fn length(&self, q: i64) -> f64 {
        dequantize(q, self.length_unit)
    }
}

impl Default for QuantizationScheme {
    fn default() -> Self {
        QuantizationScheme {
            momentum_unit: DEFAULT_MOMENTUM_UNIT,
            length_unit: DEFAULT_LENGTH_UNIT,
        }
    }
}

pub fn quantize(value: f64, unit: u64) -> Result<i64, QuantError> {
    if !value.is_finite() {
        return Err(QuantError::NonFinite(value));
    }
    if unit == 0 {
        return Err(QuantError::ZeroUnit);
    }
    // f64::round rounds half away from zero
    let scaled = (value * unit as f64).round();
    if scaled.abs() >= I64_LIMIT {
        return Err(QuantError::Overflow { value, unit });
    }
    Ok(scaled as i64)
}

pub fn dequantize(q: i64, unit: u64) -> f64 {
    q as f64 / unit as f64
}

/// Bytes the quantized value occupies inside a packed signed column.
pub fn wire_cost(value: f64, unit: u64) -> Result<usize, QuantError> {
    quantize(value, unit).map(|q| uvarint_len(zigzag_encode(q)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MEV: f64 = 1e-3;
    const U: u64 = DEFAULT_MOMENTUM_UNIT;

    #[test]
    fn table_values() {
        assert_eq!(quantize(1.0, U), Ok(100_000));
        assert_eq!(quantize(0.0, U), Ok(0));
        assert_eq!(quantize(20_000.0, U), Ok(2_000_000_000));
        assert_eq!(quantize(0.01 * MEV, U), Ok(1));
        assert_eq!(quantize(0.1 * MEV, U), Ok(10));
        assert_eq!(quantize(1.0 * MEV, U), Ok(100));
        assert_eq!(quantize(1000.0, U), Ok(100_000_000));
    }

    #[test]
    fn dequantize_examples() {
        assert_eq!(dequantize(100_000, U), 1.0);
        assert_eq!(dequantize(0, 7), 0.0);
        assert_eq!(dequantize(1, U), 1.0e-5);
    }

    #[test]
    fn wire_cost_examples() {
        assert_eq!(wire_cost(0.1 * MEV, U), Ok(1));
        assert_eq!(wire_cost(1.0 * MEV, U), Ok(2));
        assert_eq!(wire_cost(1.0, U), Ok(3));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            quantize(f64::NAN, U),
            Err(QuantError::NonFinite(_))
        ));
        assert!(matches!(
            quantize(f64::INFINITY, U),
            Err(QuantError::NonFinite(_))
        ));
        assert!(matches!(
            quantize(1e15, U),
            Err(QuantError::Overflow { .. })
        ));
        assert!(matches!(
            quantize(-1e15, U),
            Err(QuantError::Overflow { .. })
        ));
        assert_eq!(quantize(1.0, 0), Err(QuantError::ZeroUnit));
        assert_eq!(QuantizationScheme::new(0, 1), Err(QuantError::ZeroUnit));
        assert_eq!(QuantizationScheme::new(1, 0), Err(QuantError::ZeroUnit));
    }

    #[test]
    fn ties_round_away_from_zero() {
        for unit in [1u64, 2, 10, 1000, U, 1 << 20] {
            let half = 0.5 / unit as f64;
            assert_eq!(quantize(half, unit), Ok(1), "unit {unit}");
            assert_eq!(quantize(-half, unit), Ok(-1), "unit {unit}");
        }
        assert_eq!(quantize(2.5, 1), Ok(3));
        assert_eq!(quantize(-2.5, 1), Ok(-3));
    }

    #[test]
    fn default_scheme() {
        let s = QuantizationScheme::default();
        assert_eq!(s.momentum_unit(), 100_000);
        assert_eq!(s.length_unit(), 1_000);
        assert_eq!(s.quantize_length(1.0), Ok(1000));
    }

    proptest! {
        #[test]
        fn reconstruction_bound(v in -1.0e6f64..1.0e6, unit in 1u64..1_000_000) {
            let q = quantize(v, unit).unwrap();
            let err = (dequantize(q, unit) - v).abs();
            // half a step, plus float rounding in v * unit and q / unit
            let slack = 4.0 * f64::EPSILON * v.abs().max(1.0 / unit as f64);
            prop_assert!(err <= 0.5 / unit as f64 + slack, "err {err}");
        }

        #[test]
        fn sign_symmetric(v in -1.0e6f64..1.0e6, unit in 1u64..1_000_000) {
            prop_assert_eq!(quantize(-v, unit).unwrap(), -quantize(v, unit).unwrap());
        }

        // beyond 2^50 the f64 round trip q / unit * unit can drift by more
        // than half a step
        #[test]
        fn idempotent_on_grid(q in -(1i64 << 50)..(1i64 << 50), unit in 1u64..1_000_000) {
            prop_assert_eq!(quantize(dequantize(q, unit), unit), Ok(q));
        }

        #[test]
        fn monotone_cost(a in -1.0e6f64..1.0e6, b in -1.0e6f64..1.0e6) {
            let (small, large) = if a.abs() <= b.abs() { (a, b) } else { (b, a) };
            prop_assert!(wire_cost(small, U).unwrap() <= wire_cost(large, U).unwrap());
        }
    }
}
