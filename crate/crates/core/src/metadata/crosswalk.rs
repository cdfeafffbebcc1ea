//! Fixed mapping from the capture extension onto unqualified Dublin Core.
//!
//! | source                          | target                                   |
//! |---------------------------------|------------------------------------------|
//! | `lago.responsible`              | `dc.creator`                             |
//! | `lago.contact`                  | `dc.contributor`                         |
//! | `lago.capture.start` / `.end`   | one `dc.coverage`, ISO 8601 `start/end`   |
//! | `lago.site`                     | `dc.coverage` (spatial, after temporal)  |
//! | `lago.datatype`                 | `dc.type`                                |
//! | `lago.calibration.ref`          | `dc.relation`                            |
//! | `lago.resources`, `lago.problems`, `lago.pmt.*` | `dc.description`, prefixed `"<field>: "` |
//!
//! Existing `dc` fields pass through first, in record order. A capture
//! interval with only one bound becomes an open interval (`start/..` or
//! `../end`).

use std::ops::Deref;

use super::record::{MetadataField, MetadataRecord};
use super::registry::Schema;
use super::validate::{validate_fields, ValidationReport};

/// A record holding only Dublin Core fields.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DcRecord(MetadataRecord);

impl DcRecord {
    pub fn into_inner(self) -> MetadataRecord {
        self.0
    }
}

impl Deref for DcRecord {
    type Target = MetadataRecord;

    fn deref(&self) -> &MetadataRecord {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("record contains non-dc fields")]
pub struct NotDcOnly;

impl TryFrom<MetadataRecord> for DcRecord {
    type Error = NotDcOnly;

    fn try_from(record: MetadataRecord) -> Result<Self, NotDcOnly> {
        if record.is_dc_only() {
            Ok(DcRecord(record))
        } else {
            Err(NotDcOnly)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid record: {0}")]
pub struct InvalidRecord(pub ValidationReport);

/// Projects `record` onto Dublin Core. Fails when the record does not
/// validate (against its own `lago.datatype` when it names one).
pub fn crosswalk_to_dc(record: &MetadataRecord) -> Result<DcRecord, InvalidRecord> {
    let report = validate_fields(record);
    if !report.ok {
        return Err(InvalidRecord(report));
    }

    let mut out: Vec<MetadataField> = record.fields.iter().filter(|f| f.schema == Schema::Dc).cloned().collect();
    let dc = |element: &str, value: String, lang: Option<String>| MetadataField {
        schema: Schema::Dc,
        element: element.to_string(),
        qualifier: None,
        value,
        lang,
    };
    let lago = |key: &'static str| record.fields.iter().filter(move |f| f.is(key));

    for f in lago("lago.responsible") {
        out.push(dc("creator", f.value.clone(), f.lang.clone()));
    }
    for f in lago("lago.contact") {
        out.push(dc("contributor", f.value.clone(), f.lang.clone()));
    }
    let start = record.first("lago.capture.start");
    let end = record.first("lago.capture.end");
    if start.is_some() || end.is_some() {
        let interval = format!("{}/{}", start.unwrap_or(".."), end.unwrap_or(".."));
        out.push(dc("coverage", interval, None));
    }
    for f in lago("lago.site") {
        out.push(dc("coverage", f.value.clone(), f.lang.clone()));
    }
    for f in lago("lago.datatype") {
        out.push(dc("type", f.value.clone(), None));
    }
    for f in lago("lago.calibration.ref") {
        out.push(dc("relation", f.value.clone(), None));
    }
    for key in ["lago.resources", "lago.problems", "lago.pmt.temperature", "lago.pmt.voltage"] {
        for f in lago(key) {
            out.push(dc("description", format!("{key}: {}", f.value), f.lang.clone()));
        }
    }
    Ok(DcRecord(out.into_iter().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metadata::registry::SchemaRegistry;
    use proptest::prelude::*;

    fn full() -> MetadataRecord {
        MetadataRecord::new()
            .with("dc.title", "run-042")
            .with("dc.subject", "muon flux")
            .with("lago.responsible", "Ana Pérez")
            .with("lago.contact", "ana@example.org")
            .with("lago.capture.start", "2008-03-01T00:00:00Z")
            .with("lago.capture.end", "2008-03-02T00:00:00Z")
            .with("lago.calibration.ref", "lago/3")
            .with("lago.resources", "WCD #1, DAQ board v2")
            .with("lago.problems", "power cut at 03:00")
            .with("lago.pmt.temperature", "12.5")
            .with("lago.pmt.voltage", "1650")
            .with("lago.site", "Pico Espejo")
            .with("lago.datatype", "wcd-raw")
    }

    #[test]
    fn datatype_becomes_dc_type() {
        let rec = MetadataRecord::new()
            .with("dc.title", "shower-1")
            .with("lago.responsible", "x")
            .with("lago.contact", "y")
            .with("lago.datatype", "simulated");
        let out = crosswalk_to_dc(&rec).unwrap();
        assert_eq!(out.values("dc.type").collect::<Vec<_>>(), ["simulated"]);
        assert!(out.is_dc_only());
    }

    #[test]
    fn dc_only_record_is_unchanged() {
        let rec = MetadataRecord::new().with("dc.title", "a").with("dc.creator", "b").with("dc.title", "c");
        assert_eq!(*crosswalk_to_dc(&rec).unwrap(), rec);
    }

    #[test]
    fn capture_interval_is_one_coverage_value() {
        let out = crosswalk_to_dc(&full()).unwrap();
        let coverage: Vec<&str> = out.values("dc.coverage").collect();
        assert_eq!(coverage, ["2008-03-01T00:00:00Z/2008-03-02T00:00:00Z", "Pico Espejo"]);
    }

    #[test]
    fn full_mapping() {
        let out = crosswalk_to_dc(&full()).unwrap();
        assert_eq!(out.values("dc.creator").collect::<Vec<_>>(), ["Ana Pérez"]);
        assert_eq!(out.values("dc.contributor").collect::<Vec<_>>(), ["ana@example.org"]);
        assert_eq!(out.values("dc.relation").collect::<Vec<_>>(), ["lago/3"]);
        assert_eq!(
            out.values("dc.description").collect::<Vec<_>>(),
            [
                "lago.resources: WCD #1, DAQ board v2",
                "lago.problems: power cut at 03:00",
                "lago.pmt.temperature: 12.5",
                "lago.pmt.voltage: 1650",
            ]
        );
    }

    #[test]
    fn open_intervals() {
        let rec = MetadataRecord::new()
            .with("dc.title", "cal")
            .with("lago.capture.start", "2008-03-01T00:00:00Z");
        assert_eq!(crosswalk_to_dc(&rec).unwrap().first("dc.coverage"), Some("2008-03-01T00:00:00Z/.."));
        let rec = MetadataRecord::new().with("dc.title", "cal").with("lago.capture.end", "2008-03-01T00:00:00Z");
        assert_eq!(crosswalk_to_dc(&rec).unwrap().first("dc.coverage"), Some("../2008-03-01T00:00:00Z"));
    }

    #[test]
    fn invalid_record_is_rejected() {
        let err = crosswalk_to_dc(&full().with("lago.pmt.voltage", "x")).unwrap_err();
        assert!(!err.0.ok);
        assert!(crosswalk_to_dc(&MetadataRecord::new().with("lago.bogus", "1")).is_err());
    }

    /// Records built from the registry with values chosen to validate.
    fn valid_record() -> impl Strategy<Value = MetadataRecord> {
        let text = "[A-Za-z][A-Za-z0-9 ,.-]{0,12}";
        (
            proptest::collection::vec((0usize..15, text), 0..6),
            proptest::option::of(text),
            proptest::option::of(text),
            proptest::option::of((0i64..1_000_000, 0i64..1_000_000)),
            proptest::option::of("[a-z0-9/]{1,8}"),
            proptest::collection::vec(text, 0..3),
            proptest::option::of(-50.0f64..50.0),
            proptest::option::of(prop_oneof![Just("calibration"), Just("simulated"), Just("document")]),
        )
            .prop_map(|(dcs, responsible, site, interval, cal, problems, temp, datatype)| {
                let reg = SchemaRegistry::standard();
                let mut rec = MetadataRecord::new();
                for (i, v) in dcs {
                    rec.push(&reg.entries()[i].key(), v);
                }
                if let Some(v) = responsible {
                    rec.push("lago.responsible", v);
                }
                if let Some(v) = site {
                    rec.push("lago.site", v);
                }
                if let Some((a, b)) = interval {
                    let (s, e) = (a.min(b), a.max(b));
                    let base = 1_200_000_000;
                    rec.push("lago.capture.start", crate::clock::format_utc(&crate::clock::from_unix(base + s)));
                    rec.push("lago.capture.end", crate::clock::format_utc(&crate::clock::from_unix(base + e)));
                }
                if let Some(v) = cal {
                    rec.push("lago.calibration.ref", v);
                }
                for p in problems {
                    rec.push("lago.problems", p);
                }
                if let Some(t) = temp {
                    rec.push("lago.pmt.temperature", format!("{t:.2}"));
                }
                if let Some(d) = datatype {
                    rec.push("lago.datatype", d);
                    rec.push("dc.title", "t");
                    if d != "document" {
                        if rec.first("lago.responsible").is_none() {
                            rec.push("lago.responsible", "r");
                        }
                        rec.push("lago.contact", "c");
                    }
                }
                assert!(validate_fields(&rec).ok, "generator produced an invalid record");
                rec
            })
    }

    proptest! {
        #[test]
        fn idempotent(rec in valid_record()) {
            let once = crosswalk_to_dc(&rec).unwrap();
            let twice = crosswalk_to_dc(&once).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn total(rec in valid_record()) {
            let out = crosswalk_to_dc(&rec).unwrap();
            let passthrough = rec.fields.iter().filter(|f| f.schema == Schema::Dc).count();
            let lago_fields: Vec<&MetadataField> = rec.fields.iter().filter(|f| f.schema == Schema::Lago).collect();
            let mapped = &out.fields[passthrough..];
            // Every lago value is found in exactly one mapped dc field.
            for f in &lago_fields {
                let hits = mapped.iter().filter(|d| d.value.contains(f.value.as_str())).count();
                prop_assert!(hits >= 1, "{} lost", f.key());
            }
            // Start and end share one coverage value; everything else maps one to one.
            let both = rec.first("lago.capture.start").is_some() && rec.first("lago.capture.end").is_some();
            prop_assert_eq!(mapped.len() + usize::from(both), lago_fields.len());
            prop_assert_eq!(&out.fields[..passthrough], &rec.fields.iter().filter(|f| f.schema == Schema::Dc).cloned().collect::<Vec<_>>()[..]);
        }
    }
}
