//! Base-128 varints, zigzag mapping and tagged field framing.
//!
//! This is the byte-level encoding shared by every persisted message. Only
//! the subset needed by the container is supported: four wire types, packed
//! repeated varints, and IEEE-754 doubles as `FIXED64`.

use std::fmt;

use thiserror::Error;

/// Longest valid uvarint encoding of a `u64`.
pub const MAX_VARINT_LEN: usize = 10;

/// Largest field number representable in a tag.
pub const MAX_FIELD_NUMBER: u32 = (1 << 29) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("truncated input at byte {offset}")]
    Truncated { offset: usize },
    #[error("overlong or overflowing varint at byte {offset}")]
    Overlong { offset: usize },
    #[error("unknown wire type {wire_type} at byte {offset}")]
    UnknownWireType { wire_type: u8, offset: usize },
    #[error("invalid field number 0 at byte {offset}")]
    ZeroFieldNumber { offset: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum WireType {
    Varint = 0,
    Fixed64 = 1,
    LengthDelimited = 2,
    Fixed32 = 5,
}

impl WireType {
    pub fn from_bits(bits: u8) -> Option<Self> {
        match bits {
            0 => Some(WireType::Varint),
            1 => Some(WireType::Fixed64),
            2 => Some(WireType::LengthDelimited),
            5 => Some(WireType::Fixed32),
            _ => None,
        }
    }
}

impl fmt::Display for WireType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            WireType::Varint => "VARINT",
            WireType::Fixed64 => "FIXED64",
            WireType::LengthDelimited => "LENGTH_DELIMITED",
            WireType::Fixed32 => "FIXED32",
        };
        f.write_str(name)
    }
}

/// Field number plus wire type, encoded as `uvarint(field << 3 | wire_type)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldTag {
    pub field_number: u32,
    pub wire_type: WireType,
}

impl FieldTag {
    /// Panics if `field_number` is outside `1..=MAX_FIELD_NUMBER`; field
    /// numbers are compile-time constants of the format.
    pub fn new(field_number: u32, wire_type: WireType) -> Self {
        assert!(
            (1..=MAX_FIELD_NUMBER).contains(&field_number),
            "field number {field_number} out of range"
        );
        FieldTag {
            field_number,
            wire_type,
        }
    }

    pub fn key(self) -> u64 {
        (u64::from(self.field_number) << 3) | self.wire_type as u64
    }
}

/// Number of bytes `encode_uvarint(value)` produces.
#[inline]
pub fn uvarint_len(value: u64) -> usize {
    let bits = 64 - (value | 1).leading_zeros() as usize;
    bits.div_ceil(7)
}

pub fn put_uvarint(buf: &mut Vec<u8>, mut value: u64) {
    while value >= 0x80 {
        buf.push((value as u8) | 0x80);
        value >>= 7;
    }
    buf.push(value as u8);
}

pub fn encode_uvarint(value: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(uvarint_len(value));
    put_uvarint(&mut out, value);
    out
}

/// Decodes one uvarint starting at `offset`, returning `(value, consumed)`.
///
/// Non-canonical encodings (a trailing zero group such as `[0x80, 0x00]`)
/// and anything past 64 bits are rejected as [`WireError::Overlong`].
pub fn decode_uvarint(bytes: &[u8], offset: usize) -> Result<(u64, usize), WireError> {
    let mut value: u64 = 0;
    for i in 0..MAX_VARINT_LEN {
        let pos = offset + i;
        let Some(&byte) = bytes.get(pos) else {
            return Err(WireError::Truncated { offset: pos });
        };
        let payload = u64::from(byte & 0x7f);
        if i == MAX_VARINT_LEN - 1 && (byte & 0xfe) != 0 {
            // tenth byte may only carry bit 63
            return Err(WireError::Overlong { offset });
        }
        value |= payload << (7 * i);
        if byte & 0x80 == 0 {
            if i > 0 && byte == 0 {
                return Err(WireError::Overlong { offset });
            }
            return Ok((value, i + 1));
        }
    }
    Err(WireError::Overlong { offset })
}

#[inline]
pub fn zigzag_encode(value: i64) -> u64 {
    ((value << 1) ^ (value >> 63)) as u64
}

#[inline]
pub fn zigzag_decode(value: u64) -> i64 {
    ((value >> 1) as i64) ^ -((value & 1) as i64)
}

/// Payload of a single field, matched against the tag's wire type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payload<'a> {
    Varint(u64),
    Fixed64(u64),
    Double(f64),
    Bytes(&'a [u8]),
}

impl Payload<'_> {
    fn wire_type(&self) -> WireType {
        match self {
            Payload::Varint(_) => WireType::Varint,
            Payload::Fixed64(_) | Payload::Double(_) => WireType::Fixed64,
            Payload::Bytes(_) => WireType::LengthDelimited,
        }
    }
}

/// Appends `tag` followed by `payload`.
///
/// Panics if the payload kind does not match `tag.wire_type`.
pub fn write_field(buf: &mut Vec<u8>, tag: FieldTag, payload: Payload<'_>) {
    assert_eq!(
        tag.wire_type,
        payload.wire_type(),
        "payload does not match wire type of field {}",
        tag.field_number
    );
    put_uvarint(buf, tag.key());
    match payload {
        Payload::Varint(v) => put_uvarint(buf, v),
        Payload::Fixed64(v) => buf.extend_from_slice(&v.to_le_bytes()),
        Payload::Double(v) => buf.extend_from_slice(&v.to_le_bytes()),
        Payload::Bytes(b) => {
            put_uvarint(buf, b.len() as u64);
            buf.extend_from_slice(b);
        }
    }
}

pub fn write_varint_field(buf: &mut Vec<u8>, field_number: u32, value: u64) {
    write_field(
        buf,
        FieldTag::new(field_number, WireType::Varint),
        Payload::Varint(value),
    );
}

pub fn write_double_field(buf: &mut Vec<u8>, field_number: u32, value: f64) {
    write_field(
        buf,
        FieldTag::new(field_number, WireType::Fixed64),
        Payload::Double(value),
    );
}

pub fn write_bytes_field(buf: &mut Vec<u8>, field_number: u32, value: &[u8]) {
    write_field(
        buf,
        FieldTag::new(field_number, WireType::LengthDelimited),
        Payload::Bytes(value),
    );
}

/// Writes `values` as one packed LENGTH_DELIMITED field. Empty columns emit
/// nothing.
pub fn write_packed_varints<I>(buf: &mut Vec<u8>, field_number: u32, values: I)
where
    I: IntoIterator<Item = u64>,
    I::IntoIter: Clone,
{
    let values = values.into_iter();
    let payload_len: usize = values.clone().map(uvarint_len).sum();
    if payload_len == 0 {
        return;
    }
    put_uvarint(
        buf,
        FieldTag::new(field_number, WireType::LengthDelimited).key(),
    );
    put_uvarint(buf, payload_len as u64);
    buf.reserve(payload_len);
    for v in values {
        put_uvarint(buf, v);
    }
}

/// Signed column: zigzag-maps each value, then packs.
pub fn write_packed_zigzag<I>(buf: &mut Vec<u8>, field_number: u32, values: I)
where
    I: IntoIterator<Item = i64>,
    I::IntoIter: Clone,
{
    write_packed_varints(buf, field_number, values.into_iter().map(zigzag_encode));
}

/// A raw field as found in a message body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawField<'a> {
    pub tag: FieldTag,
    /// Byte offset of the tag within the message.
    pub offset: usize,
    /// For VARINT the varint bytes; for LENGTH_DELIMITED the body without
    /// its length prefix; for FIXED32/64 the little-endian bytes.
    pub payload: &'a [u8],
}

impl<'a> RawField<'a> {
    pub fn as_varint(&self) -> Option<u64> {
        match self.tag.wire_type {
            WireType::Varint => decode_uvarint(self.payload, 0).ok().map(|(v, _)| v),
            _ => None,
        }
    }

    pub fn as_fixed64(&self) -> Option<u64> {
        match self.tag.wire_type {
            WireType::Fixed64 => Some(u64::from_le_bytes(self.payload.try_into().ok()?)),
            _ => None,
        }
    }

    pub fn as_bytes(&self) -> Option<&'a [u8]> {
        match self.tag.wire_type {
            WireType::LengthDelimited => Some(self.payload),
            _ => None,
        }
    }
}

/// Iterator over the fields of one message body, in encounter order.
///
/// Stops after the first error.
#[derive(Debug, Clone)]
pub struct FieldReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    failed: bool,
}

pub fn read_message_fields(bytes: &[u8]) -> FieldReader<'_> {
    FieldReader {
        bytes,
        pos: 0,
        failed: false,
    }
}

impl<'a> FieldReader<'a> {
    /// Bytes consumed so far.
    pub fn position(&self) -> usize {
        self.pos
    }

    fn next_field(&mut self) -> Result<RawField<'a>, WireError> {
        let start = self.pos;
        let (key, n) = decode_uvarint(self.bytes, start)?;
        let bits = (key & 0x7) as u8;
        let wire_type = WireType::from_bits(bits).ok_or(WireError::UnknownWireType {
            wire_type: bits,
            offset: start,
        })?;
        let field_number = key >> 3;
        if field_number == 0 {
            return Err(WireError::ZeroFieldNumber { offset: start });
        }
        if field_number > u64::from(MAX_FIELD_NUMBER) {
            return Err(WireError::Overlong { offset: start });
        }
        let tag = FieldTag {
            field_number: field_number as u32,
            wire_type,
        };
        let body = start + n;
        let (payload_start, payload_end) = match wire_type {
            WireType::Varint => {
                let (_, len) = decode_uvarint(self.bytes, body)?;
                (body, body + len)
            }
            WireType::Fixed64 => (body, body + 8),
            WireType::Fixed32 => (body, body + 4),
            WireType::LengthDelimited => {
                let (len, consumed) = decode_uvarint(self.bytes, body)?;
                let payload_start = body + consumed;
                let end = usize::try_from(len)
                    .ok()
                    .and_then(|len| payload_start.checked_add(len))
                    .ok_or(WireError::Truncated {
                        offset: payload_start,
                    })?;
                (payload_start, end)
            }
        };
        if payload_end > self.bytes.len() {
            return Err(WireError::Truncated {
                offset: self.bytes.len(),
            });
        }
        self.pos = payload_end;
        Ok(RawField {
            tag,
            offset: start,
            payload: &self.bytes[payload_start..payload_end],
        })
    }
}

impl<'a> Iterator for FieldReader<'a> {
    type Item = Result<RawField<'a>, WireError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.pos >= self.bytes.len() {
            return None;
        }
        let item = self.next_field();
        if item.is_err() {
            self.failed = true;
        }
        Some(item)
    }
}

/// Decodes the body of a packed varint column.
pub fn read_packed_varints(payload: &[u8]) -> Result<Vec<u64>, WireError> {
    // every value takes at least one byte
    let mut out = Vec::with_capacity(payload.len());
    let mut pos = 0;
    while pos < payload.len() {
        let (v, n) = decode_uvarint(payload, pos)?;
        out.push(v);
        pos += n;
    }
    Ok(out)
}

pub fn read_packed_zigzag(payload: &[u8]) -> Result<Vec<i64>, WireError> {
    read_packed_varints(payload).map(|v| v.into_iter().map(zigzag_decode).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Reference encoder: explicit 7-bit group extraction.
    fn oracle_encode(mut v: u64) -> Vec<u8> {
        let mut groups = vec![];
        loop {
            groups.push((v & 0x7f) as u8);
            v >>= 7;
            if v == 0 {
                break;
            }
        }
        let last = groups.len() - 1;
        for g in &mut groups[..last] {
            *g |= 0x80;
        }
        groups
    }

    fn bitlength(v: u64) -> usize {
        64 - v.leading_zeros() as usize
    }

    #[test]
    fn uvarint_examples() {
        assert_eq!(encode_uvarint(0), vec![0x00]);
        assert_eq!(encode_uvarint(300), vec![0xAC, 0x02]);
        let big = encode_uvarint(1 << 63);
        assert_eq!(big.len(), 10);
        assert_eq!(*big.last().unwrap(), 0x01);
        assert_eq!(big, oracle_encode(1 << 63));
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode_uvarint(&[0x00], 0), Ok((0, 1)));
        assert_eq!(decode_uvarint(&[0xAC, 0x02], 0), Ok((300, 2)));
        assert_eq!(
            decode_uvarint(&[0x80], 0),
            Err(WireError::Truncated { offset: 1 })
        );
        assert_eq!(decode_uvarint(&[0xff, 0xAC, 0x02], 1), Ok((300, 2)));
    }

    #[test]
    fn rejects_overlong_and_overflow() {
        assert!(matches!(
            decode_uvarint(&[0x80, 0x00], 0),
            Err(WireError::Overlong { .. })
        ));
        let mut eleven = vec![0x80; 10];
        eleven.push(0x01);
        assert!(matches!(
            decode_uvarint(&eleven, 0),
            Err(WireError::Overlong { .. })
        ));
        // bit 64 set in the tenth group
        let mut overflow = vec![0xff; 9];
        overflow.push(0x02);
        assert!(matches!(
            decode_uvarint(&overflow, 0),
            Err(WireError::Overlong { .. })
        ));
        let mut max = vec![0xff; 9];
        max.push(0x01);
        assert_eq!(decode_uvarint(&max, 0), Ok((u64::MAX, 10)));
    }

    #[test]
    fn length_law() {
        for u in [0u64, 1, 127, 128, 16383, 16384, 1 << 63] {
            let expected = bitlength(u).div_ceil(7).max(1);
            assert_eq!(encode_uvarint(u).len(), expected, "u = {u}");
            assert_eq!(uvarint_len(u), expected, "u = {u}");
        }
    }

    #[test]
    fn boundary_roundtrip() {
        for k in 1..=9u32 {
            let base = 1u64 << (7 * k);
            for u in [base - 1, base, base + 1] {
                let bytes = encode_uvarint(u);
                assert_eq!(bytes, oracle_encode(u));
                assert_eq!(decode_uvarint(&bytes, 0), Ok((u, bytes.len())));
            }
        }
    }

    #[test]
    fn zigzag_examples() {
        assert_eq!(zigzag_encode(0), 0);
        assert_eq!(zigzag_encode(-1), 1);
        assert_eq!(zigzag_encode(100_000), 200_000);
        assert_eq!(zigzag_decode(0), 0);
        assert_eq!(zigzag_decode(1), -1);
        assert_eq!(zigzag_decode(200_000), 100_000);
        assert_eq!(zigzag_encode(i64::MIN), u64::MAX);
        assert_eq!(zigzag_decode(u64::MAX), i64::MIN);
    }

    #[test]
    fn write_field_examples() {
        let mut buf = vec![];
        write_field(
            &mut buf,
            FieldTag::new(1, WireType::Varint),
            Payload::Varint(0),
        );
        assert_eq!(buf, [0x08, 0x00]);

        let mut buf = vec![];
        write_field(
            &mut buf,
            FieldTag::new(2, WireType::LengthDelimited),
            Payload::Bytes(&[]),
        );
        assert_eq!(buf, [0x12, 0x00]);

        let mut buf = vec![];
        write_field(
            &mut buf,
            FieldTag::new(3, WireType::Fixed64),
            Payload::Double(1.0),
        );
        assert_eq!(buf, [0x19, 0, 0, 0, 0, 0, 0, 0xF0, 0x3F]);
    }

    #[test]
    #[should_panic]
    fn write_field_kind_mismatch_panics() {
        write_field(
            &mut vec![],
            FieldTag::new(1, WireType::Varint),
            Payload::Bytes(&[]),
        );
    }

    #[test]
    fn packed_examples() {
        let mut buf = vec![];
        write_packed_varints(&mut buf, 3, Vec::<u64>::new());
        assert!(buf.is_empty());

        write_packed_varints(&mut buf, 3, vec![0]);
        assert_eq!(buf, [0x1A, 0x01, 0x00]);

        let mut buf = vec![];
        write_packed_varints(&mut buf, 3, vec![200_000, 200_000]);
        assert_eq!(&buf[..2], &[0x1A, 6]);
        assert_eq!(buf.len(), 2 + 6);
        assert_eq!(
            read_packed_varints(&buf[2..]).unwrap(),
            vec![200_000, 200_000]
        );
    }

    #[test]
    fn read_fields_examples() {
        assert_eq!(read_message_fields(&[]).count(), 0);

        let fields: Vec<_> = read_message_fields(&[0x08, 0x2A])
            .collect::<Result<_, _>>()
            .unwrap();
        assert_eq!(fields.len(), 1);
        assert_eq!(fields[0].tag, FieldTag::new(1, WireType::Varint));
        assert_eq!(fields[0].as_varint(), Some(42));

        let err = read_message_fields(&[0x0C, 0x00]).next().unwrap();
        assert_eq!(
            err,
            Err(WireError::UnknownWireType {
                wire_type: 4,
                offset: 0
            })
        );
    }

    #[test]
    fn read_fields_truncated_payload() {
        // length says 5, only 2 bytes follow
        let mut it = read_message_fields(&[0x12, 0x05, 0x01, 0x02]);
        assert!(matches!(it.next(), Some(Err(WireError::Truncated { .. }))));
        assert!(it.next().is_none());
        let mut it = read_message_fields(&[0x19, 0x00]);
        assert!(matches!(it.next(), Some(Err(WireError::Truncated { .. }))));
    }

    #[test]
    fn zero_field_number_rejected() {
        let mut it = read_message_fields(&[0x00, 0x00]);
        assert!(matches!(
            it.next(),
            Some(Err(WireError::ZeroFieldNumber { .. }))
        ));
    }

    proptest! {
        #[test]
        fn uvarint_roundtrip(u in any::<u64>()) {
            let bytes = encode_uvarint(u);
            prop_assert_eq!(&bytes, &oracle_encode(u));
            prop_assert_eq!(decode_uvarint(&bytes, 0), Ok((u, bytes.len())));
        }

        #[test]
        fn zigzag_bijection(v in any::<i64>()) {
            prop_assert_eq!(zigzag_decode(zigzag_encode(v)), v);
        }

        #[test]
        fn zigzag_monotone_len(a in any::<i64>(), b in any::<i64>()) {
            let (small, large) = if a.unsigned_abs() <= b.unsigned_abs() { (a, b) } else { (b, a) };
            prop_assert!(uvarint_len(zigzag_encode(small)) <= uvarint_len(zigzag_encode(large)));
        }

        #[test]
        fn skipping_fields_consumes_message(
            cols in proptest::collection::vec(proptest::collection::vec(any::<u64>(), 0..8), 0..6),
            scalars in proptest::collection::vec(any::<u64>(), 0..4),
            weight in any::<f64>(),
        ) {
            let mut msg = vec![];
            for (i, v) in scalars.iter().enumerate() {
                write_varint_field(&mut msg, 1 + i as u32, *v);
            }
            write_double_field(&mut msg, 20, weight);
            for (i, c) in cols.iter().enumerate() {
                write_packed_varints(&mut msg, 30 + i as u32, c.iter().copied());
            }
            let mut reader = read_message_fields(&msg);
            for f in reader.by_ref() {
                f.unwrap();
            }
            prop_assert_eq!(reader.position(), msg.len());
        }
    }
}
