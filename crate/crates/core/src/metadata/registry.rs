//! The closed registry of metadata fields.
//!
//! Two schemas are registered: the fifteen unqualified Dublin Core elements
//! (`dc`) and the capture extension (`lago`) that documents detector and
//! simulation data files. Every field of a record must resolve to exactly one
//! entry here.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schema {
    Dc,
    Lago,
}

impl Schema {
    pub fn as_str(self) -> &'static str {
        match self {
            Schema::Dc => "dc",
            Schema::Lago => "lago",
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Schema {
    type Err = UnknownToken;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dc" => Ok(Schema::Dc),
            "lago" => Ok(Schema::Lago),
            other => Err(UnknownToken(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown token {0:?}")]
pub struct UnknownToken(pub String);

/// The data classes a collection can hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DataType {
    #[serde(rename = "calibration")]
    Calibration,
    #[serde(rename = "wcd-raw")]
    WcdRaw,
    #[serde(rename = "simulated")]
    Simulated,
    #[serde(rename = "document")]
    Document,
}

impl DataType {
    pub const ALL: [DataType; 4] = [
        DataType::Calibration,
        DataType::WcdRaw,
        DataType::Simulated,
        DataType::Document,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DataType::Calibration => "calibration",
            DataType::WcdRaw => "wcd-raw",
            DataType::Simulated => "simulated",
            DataType::Document => "document",
        }
    }

    /// Instrument and simulation items must carry at least one file.
    pub fn requires_bitstreams(self) -> bool {
        !matches!(self, DataType::Document)
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DataType {
    type Err = UnknownToken;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DataType::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| UnknownToken(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Text,
    /// `YYYY-MM-DDThh:mm:ssZ`
    DatetimeUtc,
    Decimal,
    /// A single token without whitespace.
    Identifier,
    /// A member of the data type vocabulary.
    Controlled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cardinality {
    Single,
    Multi,
}

#[derive(Debug)]
pub struct RegistryEntry {
    pub schema: Schema,
    pub element: &'static str,
    pub qualifier: Option<&'static str>,
    pub kind: ValueKind,
    pub cardinality: Cardinality,
    pub required_for: &'static [DataType],
}

impl RegistryEntry {
    pub fn key(&self) -> String {
        match self.qualifier {
            Some(q) => format!("{}.{}.{}", self.schema, self.element, q),
            None => format!("{}.{}", self.schema, self.element),
        }
    }
}

const ALL_TYPES: &[DataType] = &[
    DataType::Calibration,
    DataType::WcdRaw,
    DataType::Simulated,
    DataType::Document,
];
const INSTRUMENT_TYPES: &[DataType] = &[DataType::Calibration, DataType::WcdRaw, DataType::Simulated];
const CAPTURE_TYPES: &[DataType] = &[DataType::WcdRaw];

const fn dc(element: &'static str) -> RegistryEntry {
    RegistryEntry {
        schema: Schema::Dc,
        element,
        qualifier: None,
        kind: ValueKind::Text,
        cardinality: Cardinality::Multi,
        required_for: &[],
    }
}

const fn lago(
    element: &'static str,
    qualifier: Option<&'static str>,
    kind: ValueKind,
    cardinality: Cardinality,
    required_for: &'static [DataType],
) -> RegistryEntry {
    RegistryEntry {
        schema: Schema::Lago,
        element,
        qualifier,
        kind,
        cardinality,
        required_for,
    }
}

static ENTRIES: [RegistryEntry; 26] = [
    RegistryEntry {
        required_for: ALL_TYPES,
        ..dc("title")
    },
    dc("creator"),
    dc("subject"),
    dc("description"),
    dc("publisher"),
    dc("contributor"),
    dc("date"),
    dc("type"),
    dc("format"),
    dc("identifier"),
    dc("source"),
    dc("language"),
    dc("relation"),
    dc("coverage"),
    dc("rights"),
    lago("responsible", None, ValueKind::Text, Cardinality::Single, INSTRUMENT_TYPES),
    lago("contact", None, ValueKind::Text, Cardinality::Single, INSTRUMENT_TYPES),
    lago("capture", Some("start"), ValueKind::DatetimeUtc, Cardinality::Single, CAPTURE_TYPES),
    lago("capture", Some("end"), ValueKind::DatetimeUtc, Cardinality::Single, CAPTURE_TYPES),
    lago("calibration", Some("ref"), ValueKind::Identifier, Cardinality::Single, &[]),
    lago("resources", None, ValueKind::Text, Cardinality::Multi, &[]),
    lago("problems", None, ValueKind::Text, Cardinality::Multi, &[]),
    lago("pmt", Some("temperature"), ValueKind::Decimal, Cardinality::Single, &[]),
    lago("pmt", Some("voltage"), ValueKind::Decimal, Cardinality::Single, &[]),
    lago("site", None, ValueKind::Text, Cardinality::Single, &[]),
    lago("datatype", None, ValueKind::Controlled, Cardinality::Single, ALL_TYPES),
];

/// The registry is static; [`SchemaRegistry::standard`] is the only instance.
#[derive(Debug)]
pub struct SchemaRegistry {
    entries: &'static [RegistryEntry],
}

static STANDARD: SchemaRegistry = SchemaRegistry { entries: &ENTRIES };

impl SchemaRegistry {
    pub fn standard() -> &'static SchemaRegistry {
        &STANDARD
    }

    pub fn entries(&self) -> &'static [RegistryEntry] {
        self.entries
    }

    /// Position in registry order and the entry for a field triple.
    pub fn lookup(&self, schema: Schema, element: &str, qualifier: Option<&str>) -> Option<(usize, &'static RegistryEntry)> {
        self.entries
            .iter()
            .enumerate()
            .find(|(_, e)| e.schema == schema && e.element == element && e.qualifier == qualifier)
    }

    pub fn required_for(&self, datatype: DataType) -> impl Iterator<Item = &'static RegistryEntry> {
        self.entries.iter().filter(move |e| e.required_for.contains(&datatype))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifteen_dublin_core_elements() {
        let reg = SchemaRegistry::standard();
        let mut dc: Vec<&str> = reg.entries().iter().filter(|e| e.schema == Schema::Dc).map(|e| e.element).collect();
        assert!(reg.entries().iter().filter(|e| e.schema == Schema::Dc).all(|e| e.qualifier.is_none()));
        dc.sort_unstable();
        let mut expected = vec![
            "title", "subject", "description", "source", "language", "relation", "coverage", "creator",
            "publisher", "contributor", "rights", "date", "type", "format", "identifier",
        ];
        expected.sort_unstable();
        assert_eq!(dc, expected);
    }

    #[test]
    fn eleven_extension_elements() {
        let keys: Vec<String> = SchemaRegistry::standard()
            .entries()
            .iter()
            .filter(|e| e.schema == Schema::Lago)
            .map(|e| e.key())
            .collect();
        assert_eq!(
            keys,
            [
                "lago.responsible",
                "lago.contact",
                "lago.capture.start",
                "lago.capture.end",
                "lago.calibration.ref",
                "lago.resources",
                "lago.problems",
                "lago.pmt.temperature",
                "lago.pmt.voltage",
                "lago.site",
                "lago.datatype",
            ]
        );
    }

    #[test]
    fn value_kinds() {
        let reg = SchemaRegistry::standard();
        let kind = |s, e, q| reg.lookup(Schema::Lago, e, q).map(|(_, x)| x.kind).unwrap_or_else(|| panic!("{s}"));
        assert_eq!(kind("start", "capture", Some("start")), ValueKind::DatetimeUtc);
        assert_eq!(kind("end", "capture", Some("end")), ValueKind::DatetimeUtc);
        assert_eq!(kind("temp", "pmt", Some("temperature")), ValueKind::Decimal);
        assert_eq!(kind("volt", "pmt", Some("voltage")), ValueKind::Decimal);
        assert_eq!(kind("dt", "datatype", None), ValueKind::Controlled);
    }

    #[test]
    fn datatype_tokens() {
        let tokens: Vec<&str> = DataType::ALL.iter().map(|d| d.as_str()).collect();
        assert_eq!(tokens, ["calibration", "wcd-raw", "simulated", "document"]);
        assert_eq!("wcd-raw".parse::<DataType>().unwrap(), DataType::WcdRaw);
        assert!("raw".parse::<DataType>().is_err());
    }
}
