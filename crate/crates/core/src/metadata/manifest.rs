//! The flat metadata manifest format.
//!
//! One field per line, `schema.element[.qualifier][@lang] = value`, UTF-8.
//! Blank lines and lines starting with `#` are ignored. Values are stored
//! with surrounding whitespace trimmed; the escapes `\\`, `\n`, `\r`, `\t`,
//! `\s` and `\u{hex}` (the last two only needed for whitespace at either end
//! of a value) keep every value representable on one line.
//!
//! Lines whose key has no dot (for example `bitstream = ...` in item
//! exports) are returned to the caller untouched.

use super::record::{FieldKey, MetadataField, MetadataRecord};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("manifest line {line}: {message}")]
pub struct ManifestError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub record: MetadataRecord,
    /// `(line number, key, value)` for non-field lines.
    pub extra: Vec<(usize, String, String)>,
}

pub fn parse(text: &str) -> Result<Manifest, ManifestError> {
    let mut out = Manifest::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| ManifestError { line: line_no, message };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err("expected `key = value`".to_string()))?;
        let key = key.trim();
        let value = unescape(value.trim()).map_err(err)?;
        if !key.contains('.') {
            out.extra.push((line_no, key.to_string(), value));
            continue;
        }
        let (name, lang) = match key.split_once('@') {
            Some((n, l)) => (n, Some(l.to_string())),
            None => (key, None),
        };
        let field_key: FieldKey = name.parse().map_err(|e| err(format!("{e}")))?;
        let mut field = MetadataField::new(&field_key, value);
        field.lang = lang;
        out.record.push_field(field);
    }
    Ok(out)
}

/// Renders the record lines of a manifest.
pub fn format(record: &MetadataRecord) -> String {
    let mut out = String::new();
    for f in &record.fields {
        out.push_str(&f.key().to_string());
        if let Some(lang) = &f.lang {
            out.push('@');
            out.push_str(lang);
        }
        out.push_str(" = ");
        out.push_str(&escape(&f.value));
        out.push('\n');
    }
    out
}

pub fn escape(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    let last = value.chars().count().saturating_sub(1);
    for (i, c) in value.chars().enumerate() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            ' ' if i == 0 || i == last => out.push_str("\\s"),
            c if c.is_whitespace() && (i == 0 || i == last) => out.push_str(&format!("\\u{{{:x}}}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape(value: &str) -> Result<String, String> {
    let mut out = String::with_capacity(value.len());
    let mut chars = value.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('t') => out.push('\t'),
            Some('s') => out.push(' '),
            Some('u') => {
                let rest: String = chars.by_ref().take_while(|c| *c != '}').collect();
                let hex = rest.strip_prefix('{').ok_or("malformed \\u escape")?;
                let c = u32::from_str_radix(hex, 16)
                    .ok()
                    .and_then(char::from_u32)
                    .ok_or("malformed \\u escape")?;
                out.push(c);
            }
            Some(other) => return Err(format!("unknown escape \\{other}")),
            None => return Err("dangling backslash".to_string()),
        }
    }
    Ok(out)
}
