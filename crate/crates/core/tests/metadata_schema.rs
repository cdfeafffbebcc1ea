use lago_dr_core::metadata::xml::{serialize_lago, serialize_oai_dc, LAGO_XSD};
use lago_dr_core::metadata::{
    crosswalk_to_dc, validate_record, DataType, DcRecord, MetadataRecord, SchemaRegistry, ViolationCode,
};
use lago_xmlcheck::SchemaSet;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;

fn schemas() -> SchemaSet {
    let mut set = lago_xmlcheck::oai_schemas();
    set.add_str("lago.xsd", LAGO_XSD).unwrap();
    set
}

fn form_record() -> MetadataRecord {
    MetadataRecord::new()
        .with("dc.title", "Pico Espejo run 17 <test> & \"quotes\"")
        .with("lago.responsible", "Ana Pérez")
        .with("lago.contact", "ana@ula.ve")
        .with("lago.capture.start", "2008-05-01T10:00:00Z")
        .with("lago.capture.end", "2008-05-02T10:00:00Z")
        .with("lago.calibration.ref", "lago/3")
        .with("lago.resources", "WCD 1, DAQ v2")
        .with("lago.problems", "none")
        .with("lago.pmt.temperature", "12.5")
        .with("lago.pmt.voltage", "1650")
        .with("lago.site", "Pico Espejo")
        .with("lago.datatype", "wcd-raw")
}

#[test]
fn empty_oai_dc_is_schema_valid() {
    let xml = serialize_oai_dc(&DcRecord::default());
    schemas().validate_str(&xml).unwrap();
    let doc = roxmltree::Document::parse(&xml).unwrap();
    assert_eq!(doc.root_element().children().filter(|n| n.is_element()).count(), 0);
}

#[test]
fn crosswalked_form_record_is_schema_valid() {
    let dc = crosswalk_to_dc(&form_record()).unwrap();
    schemas().validate_str(&serialize_oai_dc(&dc)).unwrap();
}

#[test]
fn lago_format_is_schema_valid() {
    schemas().validate_str(&serialize_lago(&form_record())).unwrap();
    schemas().validate_str(&serialize_lago(&MetadataRecord::new())).unwrap();
}

#[test]
fn schema_rejects_unknown_schema_token() {
    let xml = serialize_lago(&form_record()).replace("schema=\"lago\"", "schema=\"marc\"");
    assert!(schemas().validate_str(&xml).is_err());
}

#[test]
fn spec_examples() {
    let ok = validate_record(&form_record(), DataType::WcdRaw);
    assert!(ok.ok, "{ok}");

    let mut no_title = form_record();
    no_title.fields.retain(|f| !f.is("dc.title"));
    assert_eq!(
        validate_record(&no_title, DataType::WcdRaw).codes(),
        [("dc.title".to_string(), ViolationCode::MissingRequired)]
    );

    let mut high = form_record();
    high.fields.retain(|f| !f.is("lago.pmt.voltage"));
    high.push("lago.pmt.voltage", "high");
    assert_eq!(
        validate_record(&high, DataType::WcdRaw).codes(),
        [("lago.pmt.voltage".to_string(), ViolationCode::TypeMismatch)]
    );

    let mut inverted = form_record();
    inverted.fields.retain(|f| !f.is("lago.capture.start") && !f.is("lago.capture.end"));
    inverted.push("lago.capture.start", "2008-05-02T10:00:00Z");
    inverted.push("lago.capture.end", "2008-05-01T10:00:00Z");
    assert_eq!(
        validate_record(&inverted, DataType::WcdRaw).codes(),
        [("lago.capture.end".to_string(), ViolationCode::IntervalInverted)]
    );
}

/// Arbitrary (often invalid) records over registered and unregistered keys.
fn any_record() -> impl Strategy<Value = MetadataRecord> {
    let values = prop_oneof![
        Just("".to_string()),
        Just("high".to_string()),
        Just("12.5".to_string()),
        Just("2008-05-01T10:00:00Z".to_string()),
        Just("2008-05-02T10:00:00Z".to_string()),
        Just("wcd-raw".to_string()),
        Just("calibration".to_string()),
        "[a-z ]{1,6}",
    ];
    let n = SchemaRegistry::standard().entries().len();
    proptest::collection::vec((0..n + 2, values), 0..14).prop_map(move |fs| {
        let reg = SchemaRegistry::standard();
        let mut rec = MetadataRecord::new();
        for (i, v) in fs {
            let key = match i.checked_sub(n) {
                None => reg.entries()[i].key(),
                Some(0) => "lago.bogus".to_string(),
                Some(_) => "dc.audience".to_string(),
            };
            rec.push(&key, v);
        }
        rec
    })
}

proptest! {
    #[test]
    fn validation_is_order_independent(rec in any_record(), seed in any::<u64>(), dt in 0usize..4) {
        let datatype = DataType::ALL[dt];
        let mut shuffled = rec.clone();
        shuffled.fields.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
        let mut a = validate_record(&rec, datatype).violations;
        let mut b = validate_record(&shuffled, datatype).violations;
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn report_ok_iff_no_violations(rec in any_record(), dt in 0usize..4) {
        let r = validate_record(&rec, DataType::ALL[dt]);
        prop_assert_eq!(r.ok, r.violations.is_empty());
    }
}
