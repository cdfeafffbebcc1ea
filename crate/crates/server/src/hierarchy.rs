//! Hierarchy seed files: one node per line,
//! `kind \t name \t slug \t parent-setSpec \t datatype`, parents first.
//! Communities leave the parent empty (or `-`); only collections carry a
//! data type. Blank lines and `#` comments are skipped.

use std::fs;
use std::path::Path;

use lago_dr_core::metadata::DataType;
use lago_dr_core::repo::{NodeKind, Repository};
use lago_dr_core::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SeedReport {
    pub created: usize,
    /// Lines describing a node that already exists identically.
    pub existing: usize,
}

pub fn seed_file(repo: &Repository, path: &Path) -> Result<SeedReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::Unreadable(format!("{}: {e}", path.display())))?;
    seed(repo, &text)
}

pub fn seed(repo: &Repository, text: &str) -> Result<SeedReport> {
    let mut report = SeedReport::default();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |m: String| Error::BadNode(format!("line {}: {m}", idx + 1));
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if !(4..=5).contains(&cols.len()) {
            return Err(bad(format!("expected 4 or 5 tab-separated columns, found {}", cols.len())));
        }
        let kind: NodeKind = cols[0].parse().map_err(|e: Error| bad(e.to_string()))?;
        let (name, slug) = (cols[1], cols[2]);
        let parent = match cols[3] {
            "" | "-" => None,
            spec => Some(repo.node_by_set(spec)?),
        };
        let datatype = match cols.get(4).copied().unwrap_or("") {
            "" | "-" => None,
            d => Some(d.parse::<DataType>().map_err(|_| bad(format!("unknown data type {d:?}")))?),
        };
        let spec = match &parent {
            Some(p) => format!("{}:{slug}", p.set_spec.as_str()),
            None => slug.to_string(),
        };
        match repo.node_by_set(&spec) {
            Ok(n) if n.kind == kind && n.name == name && n.datatype == datatype => {
                report.existing += 1;
                continue;
            }
            Ok(_) => return Err(Error::DuplicateSlug(spec)),
            Err(Error::UnknownSet(_)) => {}
            Err(e) => return Err(e),
        }
        repo.create_node(kind, name, slug, parent.map(|p| p.id), datatype)?;
        report.created += 1;
    }
    Ok(report)
}
