//! Self-description: the layout text embedded in every file, its parser, and
//! a decoder that interprets any message using only that text.
//!
//! The layout language has one declaration per line:
//!
//! ```text
//! message <Name>
//!   <number> <kind> <name> [unit:<momentum|length|none>] [type:<Message>] [default:<number>]
//! end
//! ```
//!
//! `kind` is one of `varint`, `zigzag`, `fixed64`, `bytes`, `message`,
//! `packed-varint`, `packed-zigzag`. Fields of kind `message` name their
//! nested layout with `type:`. Columns with a `unit:` annotation hold
//! quantized values and are dequantized with the matching factor from the
//! file descriptor. The only thing a reader has to know up front is that the
//! schema text itself is field 5 of the `header` entry.

use std::fmt::{self, Write as _};

use serde_json::{Map, Number, Value as Json};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::quant::{dequantize, QuantizationScheme};
use crate::wire::{
    read_message_fields, read_packed_varints, read_packed_zigzag, zigzag_decode, RawField, WireType,
};

const CANONICAL_SCHEMA: &str = "\
message FileDescriptor
  1 varint format_version
  2 bytes description
  3 packed-varint units
  4 varint requested_events
  5 bytes schema_text
end
message EventRecord
  1 varint event_number
  2 zigzag process_id
  3 fixed64 weight default:1
  4 message particles type:ParticleBlock
end
message ParticleBlock
  1 packed-zigzag pdg_id
  2 packed-varint status
  3 packed-zigzag px unit:momentum
  4 packed-zigzag py unit:momentum
  5 packed-zigzag pz unit:momentum
  6 packed-zigzag mass unit:momentum
  7 packed-varint mother1
  8 packed-varint mother2
  9 packed-varint daughter1
  10 packed-varint daughter2
  11 packed-zigzag barcode
  12 packed-zigzag x unit:length
  13 packed-zigzag y unit:length
  14 packed-zigzag z unit:length
  15 packed-zigzag t unit:length
end
message EventIndex
  1 packed-varint particle_count
  2 packed-varint max_pt unit:momentum
end
message FileStatistics
  1 varint actual_events
  2 varint total_particles
end
";

/// Nesting limit for `message` fields during generic decoding.
const MAX_DEPTH: usize = 32;

/// The frozen layout of format version 1.
pub fn canonical_schema() -> &'static str {
    CANONICAL_SCHEMA
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("schema line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("schema line {line}: duplicate field number {number} in message {message}")]
    DuplicateField {
        line: usize,
        message: String,
        number: u32,
    },
    #[error("schema has no message named {0}")]
    UnknownMessage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Varint,
    Zigzag,
    Fixed64,
    Bytes,
    Message,
    PackedVarint,
    PackedZigzag,
}

impl FieldKind {
    fn parse(token: &str) -> Option<Self> {
        Some(match token {
            "varint" => FieldKind::Varint,
            "zigzag" => FieldKind::Zigzag,
            "fixed64" => FieldKind::Fixed64,
            "bytes" => FieldKind::Bytes,
            "message" => FieldKind::Message,
            "packed-varint" => FieldKind::PackedVarint,
            "packed-zigzag" => FieldKind::PackedZigzag,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::Varint => "varint",
            FieldKind::Zigzag => "zigzag",
            FieldKind::Fixed64 => "fixed64",
            FieldKind::Bytes => "bytes",
            FieldKind::Message => "message",
            FieldKind::PackedVarint => "packed-varint",
            FieldKind::PackedZigzag => "packed-zigzag",
        }
    }

    pub fn wire_type(self) -> WireType {
        match self {
            FieldKind::Varint | FieldKind::Zigzag => WireType::Varint,
            FieldKind::Fixed64 => WireType::Fixed64,
            _ => WireType::LengthDelimited,
        }
    }

    fn is_numeric(self) -> bool {
        !matches!(self, FieldKind::Bytes | FieldKind::Message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    Momentum,
    Length,
}

impl Unit {
    pub fn factor(self, scheme: &QuantizationScheme) -> u64 {
        match self {
            Unit::Momentum => scheme.momentum_unit(),
            Unit::Length => scheme.length_unit(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Momentum => "momentum",
            Unit::Length => "length",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDef {
    pub number: u32,
    pub kind: FieldKind,
    pub name: String,
    pub unit: Option<Unit>,
    /// Nested layout name, for `message` fields.
    pub message_type: Option<String>,
    /// Value assumed when the field is absent (scalars only).
    pub default: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessageDef {
    pub name: String,
    /// Ascending by field number.
    pub fields: Vec<FieldDef>,
}

impl MessageDef {
    pub fn field(&self, number: u32) -> Option<&FieldDef> {
        self.fields
            .binary_search_by_key(&number, |f| f.number)
            .ok()
            .map(|i| &self.fields[i])
    }
}

/// Parsed layout: message name to ordered fields.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaTable {
    pub messages: Vec<MessageDef>,
}

impl SchemaTable {
    pub fn message(&self, name: &str) -> Option<&MessageDef> {
        self.messages.iter().find(|m| m.name == name)
    }

    /// The table for [`canonical_schema`].
    pub fn canonical() -> Self {
        parse_schema(CANONICAL_SCHEMA).expect("canonical schema parses")
    }
}

impl fmt::Display for SchemaTable {
    /// Prints canonical text.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.messages {
            writeln!(f, "message {}", m.name)?;
            for field in &m.fields {
                write!(
                    f,
                    "  {} {} {}",
                    field.number,
                    field.kind.as_str(),
                    field.name
                )?;
                if let Some(unit) = field.unit {
                    write!(f, " unit:{}", unit.as_str())?;
                }
                if let Some(ty) = &field.message_type {
                    write!(f, " type:{ty}")?;
                }
                if let Some(d) = field.default {
                    write!(f, " default:{d}")?;
                }
                writeln!(f)?;
            }
            writeln!(f, "end")?;
        }
        Ok(())
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub fn parse_schema(text: &str) -> Result<SchemaTable, SchemaError> {
    let syntax = |line: usize, message: String| SchemaError::Syntax { line, message };
    let mut messages: Vec<MessageDef> = vec![];
    let mut current: Option<MessageDef> = None;
    let mut type_refs: Vec<(usize, String)> = vec![];

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        match tokens.as_slice() {
            [] => continue,
            ["message", name] => {
                if current.is_some() {
                    return Err(syntax(line, "nested message declaration".into()));
                }
                if !is_identifier(name) {
                    return Err(syntax(line, format!("invalid message name {name:?}")));
                }
                if messages.iter().any(|m| m.name == *name) {
                    return Err(syntax(line, format!("message {name} declared twice")));
                }
                current = Some(MessageDef {
                    name: (*name).to_owned(),
                    fields: vec![],
                });
            }
            ["end"] => {
                let mut m = current
                    .take()
                    .ok_or_else(|| syntax(line, "'end' without 'message'".into()))?;
                m.fields.sort_by_key(|f| f.number);
                messages.push(m);
            }
            [number, kind, name, annotations @ ..] => {
                let m = current
                    .as_mut()
                    .ok_or_else(|| syntax(line, "field outside of a message".into()))?;
                let number: u32 = number
                    .parse()
                    .ok()
                    .filter(|n| (1..=crate::wire::MAX_FIELD_NUMBER).contains(n))
                    .ok_or_else(|| syntax(line, format!("invalid field number {number:?}")))?;
                let kind = FieldKind::parse(kind)
                    .ok_or_else(|| syntax(line, format!("unknown kind {kind:?}")))?;
                if !is_identifier(name) {
                    return Err(syntax(line, format!("invalid field name {name:?}")));
                }
                let mut field = FieldDef {
                    number,
                    kind,
                    name: (*name).to_owned(),
                    unit: None,
                    message_type: None,
                    default: None,
                };
                for ann in annotations {
                    match ann.split_once(':') {
                        Some(("unit", "momentum")) => field.unit = Some(Unit::Momentum),
                        Some(("unit", "length")) => field.unit = Some(Unit::Length),
                        Some(("unit", "none")) => field.unit = None,
                        Some(("type", ty)) if is_identifier(ty) => {
                            field.message_type = Some(ty.to_owned())
                        }
                        Some(("default", d)) => {
                            field.default = Some(
                                d.parse()
                                    .map_err(|_| syntax(line, format!("invalid default {d:?}")))?,
                            )
                        }
                        _ => return Err(syntax(line, format!("unknown annotation {ann:?}"))),
                    }
                }
                if field.unit.is_some() && !kind.is_numeric() {
                    return Err(syntax(
                        line,
                        format!("{} fields take no unit", kind.as_str()),
                    ));
                }
                match (kind, &field.message_type) {
                    (FieldKind::Message, None) => {
                        return Err(syntax(line, "message field needs type:<Name>".into()))
                    }
                    (FieldKind::Message, Some(ty)) => type_refs.push((line, ty.clone())),
                    (_, Some(_)) => {
                        return Err(syntax(line, "type: is only valid on message fields".into()))
                    }
                    _ => {}
                }
                if field.default.is_some()
                    && !matches!(
                        kind,
                        FieldKind::Varint | FieldKind::Zigzag | FieldKind::Fixed64
                    )
                {
                    return Err(syntax(
                        line,
                        "default: is only valid on scalar fields".into(),
                    ));
                }
                if m.fields.iter().any(|f| f.number == number) {
                    return Err(SchemaError::DuplicateField {
                        line,
                        message: m.name.clone(),
                        number,
                    });
                }
                if m.fields.iter().any(|f| f.name == field.name) {
                    return Err(syntax(line, format!("duplicate field name {name}")));
                }
                m.fields.push(field);
            }
            _ => return Err(syntax(line, format!("cannot parse {:?}", raw.trim()))),
        }
    }
    if let Some(m) = current {
        return Err(SchemaError::Syntax {
            line: text.lines().count(),
            message: format!("message {} is missing 'end'", m.name),
        });
    }
    for (line, ty) in type_refs {
        if !messages.iter().any(|m| m.name == ty) {
            return Err(syntax(line, format!("unknown message type {ty}")));
        }
    }
    Ok(SchemaTable { messages })
}

/// A decoded value. Quantized columns come back as reals.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    UInt(u64),
    Int(i64),
    Real(f64),
    Text(String),
    Bytes(Vec<u8>),
    UIntArray(Vec<u64>),
    IntArray(Vec<i64>),
    RealArray(Vec<f64>),
    Message(DecodedMessage),
}

impl Value {
    pub fn to_json(&self) -> Json {
        fn real(v: f64) -> Json {
            Number::from_f64(v).map_or(Json::Null, Json::Number)
        }
        match self {
            Value::UInt(v) => Json::from(*v),
            Value::Int(v) => Json::from(*v),
            Value::Real(v) => real(*v),
            Value::Text(s) => Json::from(s.as_str()),
            Value::Bytes(b) => Json::from(b.clone()),
            Value::UIntArray(v) => Json::from(v.clone()),
            Value::IntArray(v) => Json::from(v.clone()),
            Value::RealArray(v) => Json::Array(v.iter().map(|&x| real(x)).collect()),
            Value::Message(m) => m.to_json(),
        }
    }
}

/// `(name, value)` pairs in encounter order. Fields missing from the schema
/// appear as `unknown_<number>` with their raw payload bytes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecodedMessage {
    pub fields: Vec<(String, Value)>,
}

impl DecodedMessage {
    pub fn get(&self, name: &str) -> Option<&Value> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Re-orders fields by schema position and adds the implied value of
    /// every absent field, recursively. Unknown fields go last.
    pub fn with_defaults(mut self, table: &SchemaTable, message: &str) -> Result<Self> {
        let def = table
            .message(message)
            .ok_or_else(|| SchemaError::UnknownMessage(message.to_owned()))?;
        let mut out = Vec::with_capacity(def.fields.len());
        for f in &def.fields {
            let present = self
                .fields
                .iter()
                .position(|(n, _)| *n == f.name)
                .map(|i| self.fields.remove(i).1);
            let value = match (present, f.kind) {
                (Some(Value::Message(m)), FieldKind::Message) => {
                    Value::Message(m.with_defaults(table, type_of(f)?)?)
                }
                (Some(v), _) => v,
                (None, FieldKind::Message) => {
                    Value::Message(DecodedMessage::default().with_defaults(table, type_of(f)?)?)
                }
                (None, _) => default_value(f),
            };
            out.push((f.name.clone(), value));
        }
        out.append(&mut self.fields);
        Ok(DecodedMessage { fields: out })
    }

    pub fn to_json(&self) -> Json {
        let mut map = Map::new();
        for (name, value) in &self.fields {
            map.insert(name.clone(), value.to_json());
        }
        Json::Object(map)
    }

    /// Indented `name: value` listing.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write_text(&mut out, 0);
        out
    }

    fn write_text(&self, out: &mut String, depth: usize) {
        let pad = "  ".repeat(depth);
        for (name, value) in &self.fields {
            match value {
                Value::Message(m) => {
                    let _ = writeln!(out, "{pad}{name}:");
                    m.write_text(out, depth + 1);
                }
                Value::Text(s) => {
                    let _ = writeln!(out, "{pad}{name}: {s:?}");
                }
                other => {
                    let _ = writeln!(out, "{pad}{name}: {}", other.to_json());
                }
            }
        }
    }
}

fn type_of(f: &FieldDef) -> Result<&str> {
    f.message_type
        .as_deref()
        .ok_or_else(|| Error::malformed(format!("message field {} has no type", f.name)))
}

fn default_value(f: &FieldDef) -> Value {
    let d = f.default.unwrap_or(0.0);
    match (f.kind, f.unit) {
        (FieldKind::Fixed64, _) | (FieldKind::Varint | FieldKind::Zigzag, Some(_)) => {
            Value::Real(d)
        }
        (FieldKind::Varint, None) => Value::UInt(d as u64),
        (FieldKind::Zigzag, None) => Value::Int(d as i64),
        (FieldKind::Bytes, _) => Value::Text(String::new()),
        (FieldKind::PackedVarint, None) => Value::UIntArray(vec![]),
        (FieldKind::PackedZigzag, None) => Value::IntArray(vec![]),
        (FieldKind::PackedVarint | FieldKind::PackedZigzag, Some(_)) => Value::RealArray(vec![]),
        (FieldKind::Message, _) => Value::Message(DecodedMessage::default()),
    }
}

/// Decodes `bytes` as message `message` using only `table` and the unit
/// factors in `scheme`.
pub fn generic_decode(
    bytes: &[u8],
    table: &SchemaTable,
    message: &str,
    scheme: &QuantizationScheme,
) -> Result<DecodedMessage> {
    decode_at_depth(bytes, table, message, scheme, 0)
}

fn decode_at_depth(
    bytes: &[u8],
    table: &SchemaTable,
    message: &str,
    scheme: &QuantizationScheme,
    depth: usize,
) -> Result<DecodedMessage> {
    if depth > MAX_DEPTH {
        return Err(Error::malformed("message nesting too deep"));
    }
    let def = table
        .message(message)
        .ok_or_else(|| SchemaError::UnknownMessage(message.to_owned()))?;
    let mut out = DecodedMessage::default();
    for raw in read_message_fields(bytes) {
        let raw = raw?;
        let Some(f) = def.field(raw.tag.field_number) else {
            out.fields.push((
                format!("unknown_{}", raw.tag.field_number),
                Value::Bytes(raw.payload.to_vec()),
            ));
            continue;
        };
        if raw.tag.wire_type != f.kind.wire_type() {
            return Err(Error::malformed(format!(
                "{message}.{} has wire type {}, schema says {}",
                f.name,
                raw.tag.wire_type,
                f.kind.as_str()
            )));
        }
        let value = decode_field(&raw, f, table, scheme, depth)?;
        out.fields.push((f.name.clone(), value));
    }
    Ok(out)
}

fn decode_field(
    raw: &RawField<'_>,
    f: &FieldDef,
    table: &SchemaTable,
    scheme: &QuantizationScheme,
    depth: usize,
) -> Result<Value> {
    let unit = f.unit.map(|u| u.factor(scheme));
    let payload = raw.payload;
    Ok(match f.kind {
        FieldKind::Varint => {
            let v = raw.as_varint().unwrap_or_default();
            match unit {
                Some(u) => Value::Real(dequantize(v as i64, u)),
                None => Value::UInt(v),
            }
        }
        FieldKind::Zigzag => {
            let v = zigzag_decode(raw.as_varint().unwrap_or_default());
            match unit {
                Some(u) => Value::Real(dequantize(v, u)),
                None => Value::Int(v),
            }
        }
        FieldKind::Fixed64 => Value::Real(f64::from_bits(raw.as_fixed64().unwrap_or_default())),
        FieldKind::Bytes => match std::str::from_utf8(payload) {
            Ok(s) => Value::Text(s.to_owned()),
            Err(_) => Value::Bytes(payload.to_vec()),
        },
        FieldKind::Message => Value::Message(decode_at_depth(
            payload,
            table,
            type_of(f)?,
            scheme,
            depth + 1,
        )?),
        FieldKind::PackedVarint => {
            let v = read_packed_varints(payload)?;
            match unit {
                Some(u) => {
                    Value::RealArray(v.into_iter().map(|x| dequantize(x as i64, u)).collect())
                }
                None => Value::UIntArray(v),
            }
        }
        FieldKind::PackedZigzag => {
            let v = read_packed_zigzag(payload)?;
            match unit {
                Some(u) => Value::RealArray(v.into_iter().map(|x| dequantize(x, u)).collect()),
                None => Value::IntArray(v),
            }
        }
    })
}
