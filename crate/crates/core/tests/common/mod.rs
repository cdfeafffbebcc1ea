#![allow(dead_code)]

use std::sync::Arc;

use lago_dr_core::clock::{parse_utc, ManualClock};
use lago_dr_core::metadata::{DataType, MetadataRecord};
use lago_dr_core::repo::{NewFile, NodeId, NodeKind, RepoOptions, Repository, Role};

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub clock: ManualClock,
    pub repo: Repository,
}

pub fn empty() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let clock = ManualClock::new(parse_utc("2008-05-01T00:00:00Z").unwrap());
    let repo = open(&dir, &clock);
    Fixture { dir, clock, repo }
}

pub fn open(dir: &tempfile::TempDir, clock: &ManualClock) -> Repository {
    let options = RepoOptions {
        no_sync: true,
        ..Default::default()
    };
    Repository::open(dir.path(), Arc::new(clock.clone()), options).unwrap()
}

pub const SITES: [(&str, &str, &str, &str); 3] = [
    ("Bolivia", "bo", "UMSA", "umsa"),
    ("Venezuela", "ve", "ULA", "ula"),
    ("Mexico", "mx", "INAOE", "inaoe"),
];

pub const COLLECTIONS: [(&str, &str, DataType); 3] = [
    ("Calibration", "calibration", DataType::Calibration),
    ("WCD raw", "wcd-raw", DataType::WcdRaw),
    ("Simulated", "simulated", DataType::Simulated),
];

/// Three countries, one institution each, three collections each.
pub fn seeded() -> Fixture {
    let f = empty();
    seed_hierarchy(&f.repo);
    f
}

pub fn seed_hierarchy(repo: &Repository) {
    for (country, cslug, inst, islug) in SITES {
        let c = repo.create_node(NodeKind::Community, country, cslug, None, None).unwrap();
        let i = repo.create_node(NodeKind::Subcommunity, inst, islug, Some(c.id), None).unwrap();
        for (name, slug, dt) in COLLECTIONS {
            repo.create_node(NodeKind::Collection, name, slug, Some(i.id), Some(dt)).unwrap();
        }
    }
}

impl Fixture {
    pub fn collection(&self, spec: &str) -> NodeId {
        self.repo.node_by_set(spec).unwrap().id
    }
}

/// A valid record for `dt`.
pub fn record(dt: DataType, title: &str) -> MetadataRecord {
    let mut r = MetadataRecord::new().with("dc.title", title).with("lago.datatype", dt.as_str());
    if dt != DataType::Document {
        r.push("lago.responsible", "Ana Pérez");
        r.push("lago.contact", "ana@example.org");
    }
    if dt == DataType::WcdRaw {
        r.push("lago.capture.start", "2008-05-01T10:00:00Z");
        r.push("lago.capture.end", "2008-05-01T11:00:00Z");
    }
    r
}

pub fn data_file(name: &str, content: &str) -> NewFile {
    NewFile::bytes(name, Role::Data, content.as_bytes())
}

pub fn datatype_of(spec: &str) -> DataType {
    spec.rsplit(':').next().unwrap().parse().unwrap()
}

/// OAI-PMH, oai_dc and lago schemas.
pub fn schemas() -> &'static lago_xmlcheck::SchemaSet {
    static SET: std::sync::OnceLock<lago_xmlcheck::SchemaSet> = std::sync::OnceLock::new();
    SET.get_or_init(|| {
        let mut s = lago_xmlcheck::oai_schemas();
        s.add_str("lago.xsd", lago_dr_core::metadata::xml::LAGO_XSD).unwrap();
        s
    })
}

/// Validates a protocol response and every metadata payload inside it.
pub fn assert_conformant(xml: &str) {
    let set = schemas();
    if let Err(e) = set.validate_str(xml) {
        panic!("response violates the OAI-PMH schema: {e:?}\n{xml}");
    }
    let doc = roxmltree::Document::parse(xml).unwrap();
    for m in doc.descendants().filter(|n| n.has_tag_name("metadata")) {
        let payload = m.first_element_child().expect("metadata payload");
        if let Err(e) = set.validate_node(payload) {
            panic!("payload violates its schema: {e:?}\n{xml}");
        }
    }
}

pub fn query_pairs(q: &str) -> Vec<(String, String)> {
    q.split('&')
        .filter(|s| !s.is_empty())
        .map(|kv| {
            let (k, v) = kv.split_once('=').unwrap_or((kv, ""));
            (k.to_string(), v.to_string())
        })
        .collect()
}

/// A header as seen by a harvester.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub identifier: String,
    pub datestamp: String,
    pub deleted: bool,
    pub sets: Vec<String>,
}

pub fn headers(xml: &str) -> Vec<Header> {
    let doc = roxmltree::Document::parse(xml).unwrap();
    doc.descendants()
        .filter(|n| n.has_tag_name("header"))
        .map(|h| {
            let text = |name: &str| h.children().find(|c| c.has_tag_name(name)).and_then(|c| c.text()).unwrap().to_string();
            Header {
                identifier: text("identifier"),
                datestamp: text("datestamp"),
                deleted: h.attribute("status") == Some("deleted"),
                sets: h
                    .children()
                    .filter(|c| c.has_tag_name("setSpec"))
                    .map(|c| c.text().unwrap().to_string())
                    .collect(),
            }
        })
        .collect()
}

pub fn error_code(xml: &str) -> Option<String> {
    let doc = roxmltree::Document::parse(xml).unwrap();
    let code = doc.descendants().find(|n| n.has_tag_name("error")).map(|e| e.attribute("code").unwrap().to_string());
    code
}

/// `Some(token)` when the page carries a non-empty resumption token.
pub fn next_token(xml: &str) -> Option<String> {
    let doc = roxmltree::Document::parse(xml).unwrap();
    let token = doc
        .descendants()
        .find(|n| n.has_tag_name("resumptionToken"))
        .and_then(|t| t.text())
        .filter(|t| !t.is_empty())
        .map(str::to_string);
    token
}
