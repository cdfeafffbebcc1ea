use std::collections::BTreeMap;
use std::fmt;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::record::MetadataRecord;
use super::registry::{Cardinality, DataType, SchemaRegistry, ValueKind};
use crate::clock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationCode {
    MissingRequired,
    UnknownField,
    TypeMismatch,
    VocabularyViolation,
    IntervalInverted,
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub code: ViolationCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        ValidationReport {
            ok: violations.is_empty(),
            violations,
        }
    }

    pub fn codes(&self) -> Vec<(String, ViolationCode)> {
        self.violations.iter().map(|v| (v.field.clone(), v.code)).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return f.write_str("valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{} {}: {}", v.field, v.code, v.message)?;
        }
        Ok(())
    }
}

/// Checks `record` against the registry and the required-field set of
/// `datatype`. Violations are data; this never fails.
pub fn validate_record(record: &MetadataRecord, datatype: DataType) -> ValidationReport {
    ValidationReport::from_violations(check(record, Some(datatype)))
}

/// Field-level checks only: registry membership, value kinds, cardinality,
/// vocabulary and capture interval. The required-field set is applied only
/// when the record names its own data type.
pub(crate) fn validate_fields(record: &MetadataRecord) -> ValidationReport {
    let own = record.first("lago.datatype").and_then(|v| v.parse().ok());
    ValidationReport::from_violations(check(record, own))
}

fn check(record: &MetadataRecord, datatype: Option<DataType>) -> Vec<Violation> {
    let registry = SchemaRegistry::standard();
    let mut violations = Vec::new();
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();

    for field in &record.fields {
        let key = field.key().to_string();
        let Some((idx, entry)) = registry.lookup(field.schema, &field.element, field.qualifier.as_deref()) else {
            violations.push(Violation {
                field: key.clone(),
                code: ViolationCode::UnknownField,
                message: format!("{key} is not a registered field"),
            });
            continue;
        };
        *counts.entry(idx).or_default() += 1;

        if let Some(lang) = &field.lang {
            if !is_iso639_1(lang) {
                violations.push(Violation {
                    field: key.clone(),
                    code: ViolationCode::TypeMismatch,
                    message: format!("language tag {lang:?} is not an ISO 639-1 code"),
                });
            }
        }
        let value = field.value.trim();
        if value.is_empty() {
            violations.push(Violation {
                field: key,
                code: ViolationCode::TypeMismatch,
                message: "empty value".to_string(),
            });
            continue;
        }
        if !field.value.chars().all(crate::xmlutil::is_xml_char) {
            violations.push(Violation {
                field: key,
                code: ViolationCode::TypeMismatch,
                message: "value contains control characters".to_string(),
            });
            continue;
        }
        match entry.kind {
            ValueKind::Text => {}
            ValueKind::DatetimeUtc => {
                if clock::parse_utc(value).is_none() {
                    violations.push(Violation {
                        field: key,
                        code: ViolationCode::TypeMismatch,
                        message: format!("{value:?} is not a UTC datetime (YYYY-MM-DDThh:mm:ssZ)"),
                    });
                }
            }
            ValueKind::Decimal => {
                if !is_decimal(value) {
                    violations.push(Violation {
                        field: key,
                        code: ViolationCode::TypeMismatch,
                        message: format!("{value:?} is not a decimal number"),
                    });
                }
            }
            ValueKind::Identifier => {
                if value.chars().any(char::is_whitespace) {
                    violations.push(Violation {
                        field: key,
                        code: ViolationCode::TypeMismatch,
                        message: format!("{value:?} is not a single identifier token"),
                    });
                }
            }
            ValueKind::Controlled => match value.parse::<DataType>() {
                Err(_) => violations.push(Violation {
                    field: key,
                    code: ViolationCode::VocabularyViolation,
                    message: format!("{value:?} is not a data type ({})", vocabulary()),
                }),
                Ok(found) if datatype.is_some_and(|d| d != found) => violations.push(Violation {
                    field: key,
                    code: ViolationCode::VocabularyViolation,
                    message: format!("{value:?} does not match the collection data type {}", datatype.unwrap()),
                }),
                Ok(_) => {}
            },
        }
    }

    for (idx, n) in &counts {
        let entry = &registry.entries()[*idx];
        if entry.cardinality == Cardinality::Single && *n > 1 {
            violations.push(Violation {
                field: entry.key(),
                code: ViolationCode::TypeMismatch,
                message: format!("single-valued field given {n} values"),
            });
        }
    }

    if let Some(dt) = datatype {
        for entry in registry.required_for(dt) {
            let present = record.fields.iter().any(|f| {
                f.schema == entry.schema && f.element == entry.element && f.qualifier.as_deref() == entry.qualifier
            });
            if !present {
                violations.push(Violation {
                    field: entry.key(),
                    code: ViolationCode::MissingRequired,
                    message: format!("{} is required for {dt} items", entry.key()),
                });
            }
        }
    }

    // Only a single, well-formed pair is ordered; other defects are reported above.
    let starts: Vec<&str> = record.values("lago.capture.start").collect();
    let ends: Vec<&str> = record.values("lago.capture.end").collect();
    if let ([start], [end]) = (starts.as_slice(), ends.as_slice()) {
        if let (Some(s), Some(e)) = (clock::parse_utc(start.trim()), clock::parse_utc(end.trim())) {
            if e < s {
                violations.push(Violation {
                    field: "lago.capture.end".to_string(),
                    code: ViolationCode::IntervalInverted,
                    message: format!("capture end {end} precedes start {start}"),
                });
            }
        }
    }
    violations
}

fn vocabulary() -> String {
    DataType::ALL.iter().map(|d| d.as_str()).collect::<Vec<_>>().join(", ")
}

fn is_decimal(s: &str) -> bool {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[+-]?(\d+(\.\d*)?|\.\d+)$").unwrap())
        .is_match(s)
}

fn is_iso639_1(s: &str) -> bool {
    s.len() == 2 && s.bytes().all(|b| b.is_ascii_lowercase())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wcd() -> MetadataRecord {
        MetadataRecord::new()
            .with("dc.title", "run-042")
            .with("lago.responsible", "Ana Pérez")
            .with("lago.contact", "ana@example.org")
            .with("lago.capture.start", "2008-05-01T10:00:00Z")
            .with("lago.capture.end", "2008-05-02T10:00:00Z")
            .with("lago.datatype", "wcd-raw")
    }

    fn has(report: &ValidationReport, field: &str, code: ViolationCode) -> bool {
        report.violations.iter().any(|v| v.field == field && v.code == code)
    }

    #[test]
    fn full_wcd_record_is_valid() {
        let r = validate_record(&wcd(), DataType::WcdRaw);
        assert!(r.ok, "{r}");
        assert!(r.violations.is_empty());
    }

    #[test]
    fn missing_title() {
        let mut rec = wcd();
        rec.fields.retain(|f| !f.is("dc.title"));
        let r = validate_record(&rec, DataType::WcdRaw);
        assert!(!r.ok);
        assert_eq!(r.codes(), vec![("dc.title".to_string(), ViolationCode::MissingRequired)]);
    }

    #[test]
    fn non_decimal_voltage() {
        let r = validate_record(&wcd().with("lago.pmt.voltage", "high"), DataType::WcdRaw);
        assert_eq!(r.codes(), vec![("lago.pmt.voltage".to_string(), ViolationCode::TypeMismatch)]);
        assert!(validate_record(&wcd().with("lago.pmt.voltage", "-1.5e3"), DataType::WcdRaw).violations.len() == 1);
        assert!(validate_record(&wcd().with("lago.pmt.voltage", "1650.0"), DataType::WcdRaw).ok);
    }

    #[test]
    fn inverted_capture_interval() {
        let mut rec = wcd();
        rec.fields.retain(|f| !f.is("lago.capture.start") && !f.is("lago.capture.end"));
        rec.push("lago.capture.start", "2008-05-02T10:00:00Z");
        rec.push("lago.capture.end", "2008-05-01T10:00:00Z");
        let r = validate_record(&rec, DataType::WcdRaw);
        assert_eq!(r.codes(), vec![("lago.capture.end".to_string(), ViolationCode::IntervalInverted)]);
    }

    #[test]
    fn equal_capture_bounds_are_allowed() {
        let mut rec = wcd();
        rec.fields.retain(|f| !f.is("lago.capture.end"));
        rec.push("lago.capture.end", "2008-05-01T10:00:00Z");
        assert!(validate_record(&rec, DataType::WcdRaw).ok);
    }

    #[test]
    fn capture_interval_optional_for_calibration_and_simulated() {
        let rec = MetadataRecord::new()
            .with("dc.title", "cal")
            .with("lago.responsible", "x")
            .with("lago.contact", "y")
            .with("lago.datatype", "calibration");
        assert!(validate_record(&rec, DataType::Calibration).ok);
        let sim = MetadataRecord::new()
            .with("dc.title", "shower")
            .with("lago.responsible", "x")
            .with("lago.contact", "y")
            .with("lago.datatype", "simulated");
        assert!(validate_record(&sim, DataType::Simulated).ok);
        // The same record is missing the capture interval for wcd-raw.
        let r = validate_record(&sim.with("lago.datatype", "wcd-raw"), DataType::WcdRaw);
        assert!(has(&r, "lago.capture.start", ViolationCode::MissingRequired));
        assert!(has(&r, "lago.capture.end", ViolationCode::MissingRequired));
    }

    #[test]
    fn unknown_fields_and_vocabulary() {
        let r = validate_record(&wcd().with("dc.title.alternative", "x").with("lago.colour", "red"), DataType::WcdRaw);
        assert!(has(&r, "dc.title.alternative", ViolationCode::UnknownField));
        assert!(has(&r, "lago.colour", ViolationCode::UnknownField));

        let mut rec = wcd();
        rec.fields.retain(|f| !f.is("lago.datatype"));
        let r = validate_record(&rec.clone().with("lago.datatype", "raw"), DataType::WcdRaw);
        assert_eq!(r.codes(), vec![("lago.datatype".to_string(), ViolationCode::VocabularyViolation)]);
        let r = validate_record(&rec.with("lago.datatype", "simulated"), DataType::WcdRaw);
        assert_eq!(r.codes(), vec![("lago.datatype".to_string(), ViolationCode::VocabularyViolation)]);
    }

    #[test]
    fn cardinality_lang_and_blank_values() {
        let r = validate_record(&wcd().with("lago.site", "Pico Espejo").with("lago.site", "Mérida"), DataType::WcdRaw);
        assert_eq!(r.codes(), vec![("lago.site".to_string(), ViolationCode::TypeMismatch)]);
        let ok = wcd().with("lago.problems", "a").with("lago.problems", "b").with("dc.subject", "x").with("dc.subject", "y");
        assert!(validate_record(&ok, DataType::WcdRaw).ok);

        let mut rec = wcd();
        rec.fields[0].lang = Some("eng".into());
        assert_eq!(validate_record(&rec, DataType::WcdRaw).codes(), vec![("dc.title".to_string(), ViolationCode::TypeMismatch)]);
        let r = validate_record(&wcd().with("dc.subject", "   "), DataType::WcdRaw);
        assert_eq!(r.codes(), vec![("dc.subject".to_string(), ViolationCode::TypeMismatch)]);
    }

    #[test]
    fn bad_datetime_is_type_mismatch() {
        let mut rec = wcd();
        rec.fields.retain(|f| !f.is("lago.capture.start"));
        rec.push("lago.capture.start", "2008-05-01 10:00");
        assert_eq!(
            validate_record(&rec, DataType::WcdRaw).codes(),
            vec![("lago.capture.start".to_string(), ViolationCode::TypeMismatch)]
        );
    }
}
