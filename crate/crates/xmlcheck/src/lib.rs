//! Conformance checkers for XML produced by the repository.
//!
//! [`SchemaSet`] implements the subset of W3C XML Schema 1.0 needed to
//! validate OAI-PMH 2.0 responses, `oai_dc` payloads and the native `lago`
//! format against their published schema documents. [`rss`] checks RSS 2.0
//! documents structurally, since RSS has no normative schema.
//!
//! This crate is deliberately independent from the serializers it checks:
//! it parses with `roxmltree` and reads the schema documents at runtime.

pub mod rss;
mod xsd;

pub use xsd::{SchemaError, SchemaSet};

use std::path::PathBuf;

/// Directory holding the bundled schema documents.
pub fn schema_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schemas")
}

/// Loads OAI-PMH 2.0, oai_dc, simple DC and the XML namespace schema.
pub fn oai_schemas() -> SchemaSet {
    let dir = schema_dir();
    SchemaSet::load(&[
        dir.join("xml.xsd"),
        dir.join("simpledc20021212.xsd"),
        dir.join("oai_dc.xsd"),
        dir.join("OAI-PMH.xsd"),
    ])
    .expect("bundled schemas parse")
}
