//! Escaping shared by the XML writers.
//!
//! Beyond the five predefined entities, carriage returns are written as
//! character references so parsers do not fold them into line feeds, and in
//! attribute values tabs and line feeds are too, so attribute-value
//! normalization leaves them intact.

use std::io::Write;

use quick_xml::events::{BytesDecl, BytesEnd, BytesStart, BytesText, Event};
use quick_xml::Writer;

pub fn escape_text(s: &str) -> String {
    escape(s, false)
}

pub fn escape_attr(s: &str) -> String {
    escape(s, true)
}

fn escape(s: &str, attr: bool) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attr => out.push_str("&quot;"),
            '\'' if attr => out.push_str("&apos;"),
            '\r' => out.push_str("&#13;"),
            '\n' if attr => out.push_str("&#10;"),
            '\t' if attr => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out
}

/// True for characters XML 1.0 can carry at all, escaped or not.
pub fn is_xml_char(c: char) -> bool {
    matches!(c, '\t' | '\n' | '\r' | '\u{20}'..='\u{D7FF}' | '\u{E000}'..='\u{FFFD}' | '\u{10000}'..='\u{10FFFF}')
}

/// Thin helper over `quick_xml::Writer` with explicit escaping.
pub struct XmlOut<W: Write> {
    inner: Writer<W>,
}

pub type IoResult = std::io::Result<()>;

impl<W: Write> XmlOut<W> {
    pub fn new(inner: W) -> Self {
        XmlOut {
            inner: Writer::new(inner),
        }
    }

    pub fn into_inner(self) -> W {
        self.inner.into_inner()
    }

    pub fn decl(&mut self) -> IoResult {
        self.inner
            .write_event(Event::Decl(BytesDecl::new("1.0", Some("UTF-8"), None)))?;
        self.raw("\n")
    }

    pub fn raw(&mut self, s: &str) -> IoResult {
        self.inner.get_mut().write_all(s.as_bytes())
    }

    pub fn start(&mut self, name: &str, attrs: &[(&str, &str)]) -> IoResult {
        self.inner.write_event(Event::Start(element(name, attrs)))
    }

    pub fn end(&mut self, name: &str) -> IoResult {
        self.inner.write_event(Event::End(BytesEnd::new(name)))
    }

    pub fn empty(&mut self, name: &str, attrs: &[(&str, &str)]) -> IoResult {
        self.inner.write_event(Event::Empty(element(name, attrs)))
    }

    pub fn text(&mut self, s: &str) -> IoResult {
        let escaped = escape_text(s);
        self.inner.write_event(Event::Text(BytesText::from_escaped(escaped)))
    }

    /// `<name attrs>text</name>`
    pub fn leaf(&mut self, name: &str, attrs: &[(&str, &str)], text: &str) -> IoResult {
        self.start(name, attrs)?;
        self.text(text)?;
        self.end(name)
    }
}

fn element<'a>(name: &'a str, attrs: &[(&str, &str)]) -> BytesStart<'a> {
    let mut start = BytesStart::new(name);
    for (k, v) in attrs {
        start.push_attribute(quick_xml::events::attributes::Attribute {
            key: quick_xml::name::QName(k.as_bytes()),
            value: escape_attr(v).into_bytes().into(),
        });
    }
    start
}
