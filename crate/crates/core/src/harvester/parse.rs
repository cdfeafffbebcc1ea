//! Reading ListRecords responses.

use roxmltree::{Document, Node};

use crate::clock::{parse_utc, Timestamp};
use crate::metadata::xml::read_oai_dc;
use crate::metadata::MetadataRecord;
use crate::oai::{OaiErrorCode, OAI_NS};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarvestedRecord {
    pub identifier: String,
    pub datestamp: Timestamp,
    pub deleted: bool,
    pub sets: Vec<String>,
    pub record: Option<MetadataRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Page {
    Records {
        response_date: Timestamp,
        records: Vec<HarvestedRecord>,
        /// Non-empty token of the next page.
        token: Option<String>,
    },
    Error {
        response_date: Timestamp,
        code: OaiErrorCode,
        message: String,
    },
}

fn oai<'a, 'i: 'a>(node: Node<'a, 'i>, name: &'a str) -> impl Iterator<Item = Node<'a, 'i>> + 'a {
    node.children().filter(move |c| c.is_element() && c.tag_name().namespace() == Some(OAI_NS) && c.tag_name().name() == name)
}

fn one<'a, 'i: 'a>(node: Node<'a, 'i>, name: &'a str) -> Result<Node<'a, 'i>, String> {
    let mut it = oai(node, name);
    match (it.next(), it.next()) {
        (Some(n), None) => Ok(n),
        (None, _) => Err(format!("missing <{name}>")),
        _ => Err(format!("repeated <{name}>")),
    }
}

fn text<'a>(node: Node<'a, '_>) -> &'a str {
    node.text().unwrap_or("").trim()
}

fn datestamp(s: &str) -> Result<Timestamp, String> {
    parse_utc(s).ok_or_else(|| format!("bad datestamp {s:?}"))
}

/// Parses a ListRecords (or error) response, checking the structure a
/// harvester relies on.
pub fn parse_page(xml: &str) -> Result<Page, String> {
    let doc = Document::parse(xml).map_err(|e| format!("malformed XML: {e}"))?;
    let root = doc.root_element();
    if root.tag_name().namespace() != Some(OAI_NS) || root.tag_name().name() != "OAI-PMH" {
        return Err("not an OAI-PMH response".into());
    }
    let response_date = datestamp(text(one(root, "responseDate")?))?;
    one(root, "request")?;
    if let Some(e) = oai(root, "error").next() {
        let raw = e.attribute("code").unwrap_or("");
        let code = OaiErrorCode::parse(raw).ok_or_else(|| format!("unknown error code {raw:?}"))?;
        return Ok(Page::Error { response_date, code, message: text(e).to_string() });
    }
    let list = one(root, "ListRecords")?;
    let mut records = Vec::new();
    for r in oai(list, "record") {
        let header = one(r, "header")?;
        let deleted = match header.attribute("status") {
            None => false,
            Some("deleted") => true,
            Some(s) => return Err(format!("bad header status {s:?}")),
        };
        let identifier = text(one(header, "identifier")?).to_string();
        if identifier.is_empty() {
            return Err("empty identifier".into());
        }
        let record = match (deleted, oai(r, "metadata").next()) {
            (true, _) => None,
            (false, None) => return Err(format!("record {identifier} has no metadata")),
            (false, Some(m)) => {
                let payload = m.first_element_child().ok_or_else(|| format!("record {identifier} has empty metadata"))?;
                Some(read_oai_dc(payload).map_err(|e| format!("record {identifier}: {e}"))?.into_inner())
            }
        };
        records.push(HarvestedRecord {
            datestamp: datestamp(text(one(header, "datestamp")?))?,
            sets: oai(header, "setSpec").map(|s| text(s).to_string()).collect(),
            identifier,
            deleted,
            record,
        });
    }
    if records.is_empty() {
        return Err("ListRecords without records".into());
    }
    let token = match oai(list, "resumptionToken").next() {
        Some(t) if !text(t).is_empty() => Some(text(t).to_string()),
        _ => None,
    };
    Ok(Page::Records { response_date, records, token })
}
