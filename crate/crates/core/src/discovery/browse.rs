use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metadata::DataType;
use crate::repo::{Item, ItemQuery, NodeId, NodeKind, Repository};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Country,
    Responsible,
    Filename,
    Filetype,
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "country" => Ok(Criterion::Country),
            "responsible" => Ok(Criterion::Responsible),
            "filename" => Ok(Criterion::Filename),
            "filetype" => Ok(Criterion::Filetype),
            other => Err(Error::UnknownCriterion(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrowseGroup {
    pub key: String,
    pub label: String,
    pub items: Vec<Item>,
}

/// Groups the visible items by `criterion`, newest first within a group.
///
/// * `country`: one group per community; `key` selects a community slug.
/// * `responsible`: `lago.responsible` equal to `key`, ignoring case.
/// * `filename`: some file name contains `key`, ignoring case.
/// * `filetype`: some file has role `key`, or the collection's data type is `key`.
///
/// Without a key every distinct value gets its own group.
pub fn browse(repo: &Repository, criterion: Criterion, key: Option<&str>) -> Result<Vec<BrowseGroup>> {
    let key = key.map(str::trim).filter(|k| !k.is_empty());
    let items = repo.list_items(&ItemQuery {
        newest_first: true,
        ..Default::default()
    })?;
    let nodes = repo.nodes()?;
    let mut groups: BTreeMap<String, (String, Vec<Item>)> = BTreeMap::new();

    match criterion {
        Criterion::Country => {
            for c in nodes.iter().filter(|n| n.kind == NodeKind::Community) {
                if key.is_some_and(|k| k != c.slug) {
                    continue;
                }
                let members = items.iter().filter(|i| i.set_spec.is_within(&c.slug)).cloned().collect();
                groups.insert(c.slug.clone(), (c.name.clone(), members));
            }
        }
        Criterion::Responsible => {
            for item in &items {
                let Some(who) = item.record.first("lago.responsible") else { continue };
                let who = who.trim();
                if key.is_some_and(|k| !k.to_lowercase().eq(&who.to_lowercase())) {
                    continue;
                }
                let group_key = key.map_or_else(|| who.to_string(), str::to_string);
                groups.entry(group_key).or_insert_with(|| (who.to_string(), Vec::new())).1.push(item.clone());
            }
        }
        Criterion::Filename => {
            let needle = key.map(str::to_lowercase);
            for item in &items {
                match &needle {
                    Some(n) => {
                        if item.bitstreams.iter().any(|b| b.filename.to_lowercase().contains(n.as_str())) {
                            let k = key.unwrap().to_string();
                            groups.entry(k.clone()).or_insert_with(|| (k, Vec::new())).1.push(item.clone());
                        }
                    }
                    None => {
                        for b in &item.bitstreams {
                            let entry = groups.entry(b.filename.clone()).or_insert_with(|| (b.filename.clone(), Vec::new()));
                            if entry.1.last().map(|i| i.pid) != Some(item.pid) {
                                entry.1.push(item.clone());
                            }
                        }
                    }
                }
            }
        }
        Criterion::Filetype => {
            let datatypes: HashMap<NodeId, DataType> =
                nodes.iter().filter_map(|n| n.datatype.map(|d| (n.id, d))).collect();
            for item in &items {
                let mut tokens: Vec<&str> = item.bitstreams.iter().map(|b| b.role.as_str()).collect();
                if let Some(dt) = datatypes.get(&item.collection) {
                    tokens.push(dt.as_str());
                }
                tokens.sort_unstable();
                tokens.dedup();
                for t in tokens {
                    if key.is_some_and(|k| k != t) {
                        continue;
                    }
                    groups.entry(t.to_string()).or_insert_with(|| (t.to_string(), Vec::new())).1.push(item.clone());
                }
            }
        }
    }
    Ok(groups
        .into_iter()
        .map(|(key, (label, items))| BrowseGroup { key, label, items })
        .collect())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SearchQuery {
    /// Whitespace-separated terms; each must occur, ignoring case, in some
    /// metadata value or file name.
    #[serde(default)]
    pub q: String,
    #[serde(default)]
    pub set: Option<String>,
    #[serde(default)]
    pub datatype: Option<DataType>,
    #[serde(default)]
    pub limit: Option<usize>,
}

/// Visible items matching `query`, newest first.
pub fn search(repo: &Repository, query: &SearchQuery) -> Result<Vec<Item>> {
    let terms: Vec<String> = query.q.split_whitespace().map(str::to_lowercase).collect();
    let items = repo.list_items(&ItemQuery {
        set: query.set.clone(),
        newest_first: true,
        ..Default::default()
    })?;
    let datatypes: HashMap<NodeId, DataType> = repo
        .nodes()?
        .into_iter()
        .filter_map(|n| n.datatype.map(|d| (n.id, d)))
        .collect();
    let hits = items.into_iter().filter(|item| {
        if query.datatype.is_some_and(|d| datatypes.get(&item.collection) != Some(&d)) {
            return false;
        }
        let haystack: Vec<String> = item
            .record
            .fields
            .iter()
            .map(|f| f.value.to_lowercase())
            .chain(item.bitstreams.iter().map(|b| b.filename.to_lowercase()))
            .collect();
        terms.iter().all(|t| haystack.iter().any(|h| h.contains(t.as_str())))
    });
    Ok(match query.limit {
        Some(n) => hits.take(n).collect(),
        None => hits.collect(),
    })
}
