//! XML renderings of metadata records: the `oai_dc` container and the native
//! `lago` format (schema in `schemas/lago.xsd`).

use std::io::{self, Write};

use roxmltree::Node;

use super::crosswalk::DcRecord;
use super::record::{FieldKey, MetadataField, MetadataRecord};
use super::registry::Schema;
use crate::xmlutil::XmlOut;

pub const OAI_DC_NS: &str = "http://www.openarchives.org/OAI/2.0/oai_dc/";
pub const OAI_DC_SCHEMA: &str = "http://www.openarchives.org/OAI/2.0/oai_dc.xsd";
pub const DC_NS: &str = "http://purl.org/dc/elements/1.1/";
pub const XSI_NS: &str = "http://www.w3.org/2001/XMLSchema-instance";
pub const XML_NS: &str = "http://www.w3.org/XML/1998/namespace";

pub const LAGO_NS: &str = "urn:lago-dr:metadata:1.0";
/// Served at `/schemas/lago.xsd`.
pub const LAGO_XSD: &str = include_str!("../../schemas/lago.xsd");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum XmlError {
    #[error("malformed XML: {0}")]
    Syntax(String),
    #[error("unexpected element {0}")]
    Unexpected(String),
    #[error("bad field: {0}")]
    BadField(String),
}

impl From<roxmltree::Error> for XmlError {
    fn from(e: roxmltree::Error) -> Self {
        XmlError::Syntax(e.to_string())
    }
}

/// Writes `<oai_dc:dc>` with one child per field, in registry order and
/// then record order.
pub fn write_oai_dc<W: Write>(out: &mut XmlOut<W>, record: &DcRecord) -> io::Result<()> {
    let schema_location = format!("{OAI_DC_NS} {OAI_DC_SCHEMA}");
    out.start(
        "oai_dc:dc",
        &[
            ("xmlns:oai_dc", OAI_DC_NS),
            ("xmlns:dc", DC_NS),
            ("xmlns:xsi", XSI_NS),
            ("xsi:schemaLocation", &schema_location),
        ],
    )?;
    let mut fields: Vec<&MetadataField> = record.fields.iter().collect();
    // Stable sort keeps record order within one element.
    fields.sort_by_key(|f| f.key().registry_index().unwrap_or(usize::MAX));
    for f in fields {
        let name = format!("dc:{}", f.element);
        match &f.lang {
            Some(lang) => out.leaf(&name, &[("xml:lang", lang)], &f.value)?,
            None => out.leaf(&name, &[], &f.value)?,
        }
    }
    out.end("oai_dc:dc")
}

pub fn serialize_oai_dc(record: &DcRecord) -> String {
    let mut out = XmlOut::new(Vec::new());
    write_oai_dc(&mut out, record).expect("writing to memory");
    String::from_utf8(out.into_inner()).expect("utf-8 output")
}

pub fn parse_oai_dc(xml: &str) -> Result<DcRecord, XmlError> {
    let doc = roxmltree::Document::parse(xml)?;
    read_oai_dc(doc.root_element())
}

pub fn read_oai_dc(node: Node<'_, '_>) -> Result<DcRecord, XmlError> {
    if node.tag_name().namespace() != Some(OAI_DC_NS) || node.tag_name().name() != "dc" {
        return Err(XmlError::Unexpected(node.tag_name().name().to_string()));
    }
    let mut record = MetadataRecord::new();
    for child in node.children().filter(Node::is_element) {
        if child.tag_name().namespace() != Some(DC_NS) {
            return Err(XmlError::Unexpected(child.tag_name().name().to_string()));
        }
        let key = FieldKey::new(Schema::Dc, child.tag_name().name(), None);
        if key.registry_index().is_none() {
            return Err(XmlError::BadField(format!("dc.{}", key.element)));
        }
        let mut field = MetadataField::new(&key, child.text().unwrap_or(""));
        field.lang = child.attribute((XML_NS, "lang")).map(str::to_string);
        record.push_field(field);
    }
    Ok(DcRecord::try_from(record).expect("only dc children accepted"))
}

/// Writes `<lago:record>` holding every field in record order.
pub fn write_lago<W: Write>(out: &mut XmlOut<W>, record: &MetadataRecord) -> io::Result<()> {
    let schema_location = format!("{LAGO_NS} lago.xsd");
    out.start(
        "lago:record",
        &[
            ("xmlns:lago", LAGO_NS),
            ("xmlns:xsi", XSI_NS),
            ("xsi:schemaLocation", &schema_location),
        ],
    )?;
    for f in &record.fields {
        let mut attrs: Vec<(&str, &str)> = vec![("schema", f.schema.as_str()), ("element", &f.element)];
        if let Some(q) = &f.qualifier {
            attrs.push(("qualifier", q));
        }
        if let Some(lang) = &f.lang {
            attrs.push(("xml:lang", lang));
        }
        out.leaf("lago:field", &attrs, &f.value)?;
    }
    out.end("lago:record")
}

pub fn serialize_lago(record: &MetadataRecord) -> String {
    let mut out = XmlOut::new(Vec::new());
    write_lago(&mut out, record).expect("writing to memory");
    String::from_utf8(out.into_inner()).expect("utf-8 output")
}

pub fn parse_lago(xml: &str) -> Result<MetadataRecord, XmlError> {
    let doc = roxmltree::Document::parse(xml)?;
    read_lago(doc.root_element())
}

pub fn read_lago(node: Node<'_, '_>) -> Result<MetadataRecord, XmlError> {
    if node.tag_name().namespace() != Some(LAGO_NS) || node.tag_name().name() != "record" {
        return Err(XmlError::Unexpected(node.tag_name().name().to_string()));
    }
    let mut record = MetadataRecord::new();
    for child in node.children().filter(Node::is_element) {
        if child.tag_name().namespace() != Some(LAGO_NS) || child.tag_name().name() != "field" {
            return Err(XmlError::Unexpected(child.tag_name().name().to_string()));
        }
        let attr = |name: &str| child.attribute(name);
        let schema: Schema = attr("schema")
            .ok_or_else(|| XmlError::BadField("missing schema".into()))?
            .parse()
            .map_err(|e| XmlError::BadField(format!("{e}")))?;
        let element = attr("element").ok_or_else(|| XmlError::BadField("missing element".into()))?;
        let key = FieldKey::new(schema, element, attr("qualifier"));
        let mut field = MetadataField::new(&key, child.text().unwrap_or(""));
        field.lang = child.attribute((XML_NS, "lang")).map(str::to_string);
        record.push_field(field);
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metadata::registry::SchemaRegistry;
    use proptest::prelude::*;

    fn dc(rec: MetadataRecord) -> DcRecord {
        DcRecord::try_from(rec).unwrap()
    }

    #[test]
    fn single_title() {
        let xml = serialize_oai_dc(&dc(MetadataRecord::new().with("dc.title", "run-042")));
        let doc = roxmltree::Document::parse(&xml).unwrap();
        let children: Vec<_> = doc.root_element().children().filter(Node::is_element).collect();
        assert_eq!(children.len(), 1);
        assert_eq!(children[0].tag_name().name(), "title");
        assert_eq!(children[0].tag_name().namespace(), Some(DC_NS));
        assert_eq!(children[0].text(), Some("run-042"));
    }

    #[test]
    fn special_characters_escaped() {
        let xml = serialize_oai_dc(&dc(MetadataRecord::new().with("dc.description", "a < b & c")));
        assert!(xml.contains("a &lt; b &amp; c"), "{xml}");
    }

    #[test]
    fn registry_then_record_order() {
        let rec = MetadataRecord::new()
            .with("dc.subject", "s1")
            .with("dc.title", "t1")
            .with("dc.subject", "s2")
            .with("dc.title", "t2");
        let xml = serialize_oai_dc(&dc(rec));
        let doc = roxmltree::Document::parse(&xml).unwrap();
        let seq: Vec<&str> = doc.root_element().children().filter(Node::is_element).map(|n| n.text().unwrap()).collect();
        assert_eq!(seq, ["t1", "t2", "s1", "s2"]);
    }

    #[test]
    fn lang_survives() {
        let mut rec = MetadataRecord::new();
        let mut f = MetadataField::new(&"dc.title".parse().unwrap(), "Datos");
        f.lang = Some("es".into());
        rec.push_field(f);
        let back = parse_oai_dc(&serialize_oai_dc(&dc(rec.clone()))).unwrap();
        assert_eq!(*back, rec);
        assert_eq!(parse_lago(&serialize_lago(&rec)).unwrap(), rec);
    }

    #[test]
    fn foreign_children_rejected() {
        let xml = format!(r#"<oai_dc:dc xmlns:oai_dc="{OAI_DC_NS}"><x/></oai_dc:dc>"#);
        assert!(parse_oai_dc(&xml).is_err());
    }

    fn text() -> impl Strategy<Value = String> {
        // Any XML-representable text with something left after trimming.
        proptest::collection::vec(
            prop_oneof![
                any::<char>().prop_filter("xml char", |c| crate::xmlutil::is_xml_char(*c)),
                Just('<'),
                Just('&'),
                Just('\r'),
                Just('\n'),
                Just(' '),
            ],
            0..12,
        )
        .prop_map(|cs| format!("v{}", cs.into_iter().collect::<String>()))
    }

    fn dc_record() -> impl Strategy<Value = MetadataRecord> {
        proptest::collection::vec((0usize..15, text(), proptest::option::of("[a-z]{2}")), 0..10).prop_map(|fs| {
            let reg = SchemaRegistry::standard();
            fs.into_iter()
                .map(|(i, v, lang)| {
                    let mut f = MetadataField::new(&reg.entries()[i].key().parse().unwrap(), v);
                    f.lang = lang;
                    f
                })
                .collect()
        })
    }

    fn multiset(rec: &MetadataRecord) -> Vec<MetadataField> {
        let mut v = rec.fields.clone();
        v.sort_by(|a, b| (a.key(), &a.value, &a.lang).cmp(&(b.key(), &b.value, &b.lang)));
        v
    }

    proptest! {
        #[test]
        fn oai_dc_round_trip(rec in dc_record()) {
            prop_assert!(crate::metadata::validate::validate_fields(&rec).ok);
            let back = parse_oai_dc(&serialize_oai_dc(&dc(rec.clone()))).unwrap();
            prop_assert_eq!(multiset(&back), multiset(&rec));
        }

        #[test]
        fn lago_round_trip_is_exact(rec in dc_record()) {
            prop_assert_eq!(parse_lago(&serialize_lago(&rec)).unwrap(), rec);
        }
    }
}
