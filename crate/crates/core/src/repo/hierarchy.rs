use std::fmt;
use std::str::FromStr;

use rusqlite::{params, Connection, OptionalExtension, Row};
use serde::{Deserialize, Serialize};

use super::Repository;
use crate::error::{Error, Result};
use crate::metadata::DataType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub i64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Community,
    Subcommunity,
    Collection,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Community => "community",
            NodeKind::Subcommunity => "subcommunity",
            NodeKind::Collection => "collection",
        }
    }

    fn parent_kind(self) -> Option<NodeKind> {
        match self {
            NodeKind::Community => None,
            NodeKind::Subcommunity => Some(NodeKind::Community),
            NodeKind::Collection => Some(NodeKind::Subcommunity),
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "community" => Ok(NodeKind::Community),
            "subcommunity" => Ok(NodeKind::Subcommunity),
            "collection" => Ok(NodeKind::Collection),
            other => Err(Error::BadNode(format!("unknown node kind {other:?}"))),
        }
    }
}

/// Colon-joined slug path from a community down to a node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SetSpec(String);

impl SetSpec {
    pub fn parse(s: &str) -> Option<SetSpec> {
        let parts: Vec<&str> = s.split(':').collect();
        (parts.len() <= 3 && parts.iter().all(|p| is_slug(p))).then(|| SetSpec(s.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn components(&self) -> impl Iterator<Item = &str> {
        self.0.split(':')
    }

    /// Every prefix, outermost first: `ve`, `ve:ula`, `ve:ula:wcd-raw`.
    pub fn chain(&self) -> Vec<String> {
        let parts: Vec<&str> = self.components().collect();
        (1..=parts.len()).map(|n| parts[..n].join(":")).collect()
    }

    /// True if `self` equals `prefix` or lies below it.
    pub fn is_within(&self, prefix: &str) -> bool {
        self.0 == prefix || (self.0.starts_with(prefix) && self.0[prefix.len()..].starts_with(':'))
    }

    fn child(&self, slug: &str) -> SetSpec {
        SetSpec(format!("{}:{slug}", self.0))
    }
}

impl fmt::Display for SetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn is_slug(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| matches!(b, b'a'..=b'z' | b'0'..=b'9' | b'-'))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub name: String,
    pub slug: String,
    pub parent: Option<NodeId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub datatype: Option<DataType>,
    pub set_spec: SetSpec,
}

const NODE_COLUMNS: &str = "id, kind, name, slug, parent, datatype, set_spec";

fn node_from_row(row: &Row<'_>) -> rusqlite::Result<HierarchyNode> {
    let kind: String = row.get(1)?;
    let datatype: Option<String> = row.get(5)?;
    Ok(HierarchyNode {
        id: NodeId(row.get(0)?),
        kind: kind.parse().expect("stored node kind"),
        name: row.get(2)?,
        slug: row.get(3)?,
        parent: row.get::<_, Option<i64>>(4)?.map(NodeId),
        datatype: datatype.map(|d| d.parse().expect("stored datatype")),
        set_spec: SetSpec(row.get(6)?),
    })
}

pub(crate) fn load_node(conn: &Connection, id: NodeId) -> Result<HierarchyNode> {
    conn.query_row(&format!("SELECT {NODE_COLUMNS} FROM nodes WHERE id = ?1"), [id.0], node_from_row)
        .optional()?
        .ok_or_else(|| Error::UnknownNode(id.to_string()))
}

impl Repository {
    pub fn create_node(
        &self,
        kind: NodeKind,
        name: &str,
        slug: &str,
        parent: Option<NodeId>,
        datatype: Option<DataType>,
    ) -> Result<HierarchyNode> {
        if name.trim().is_empty() {
            return Err(Error::BadNode("name must not be empty".into()));
        }
        if !is_slug(slug) {
            return Err(Error::BadNode(format!("slug {slug:?} must match [a-z0-9-]+")));
        }
        match (kind, datatype) {
            (NodeKind::Collection, None) => return Err(Error::BadNode("a collection needs a data type".into())),
            (NodeKind::Community | NodeKind::Subcommunity, Some(_)) => {
                return Err(Error::BadNode(format!("a {kind} has no data type")))
            }
            _ => {}
        }
        self.store.write(|tx| {
            let set_spec = match (kind.parent_kind(), parent) {
                (None, None) => SetSpec(slug.to_string()),
                (None, Some(_)) => return Err(Error::BadParentKind("a community has no parent".into())),
                (Some(want), None) => return Err(Error::BadParentKind(format!("a {kind} needs a {want} parent"))),
                (Some(want), Some(pid)) => {
                    let p = load_node(tx, pid)?;
                    if p.kind != want {
                        return Err(Error::BadParentKind(format!("a {kind} cannot live under a {}", p.kind)));
                    }
                    p.set_spec.child(slug)
                }
            };
            let taken: bool = tx.query_row(
                "SELECT EXISTS (SELECT 1 FROM nodes WHERE ifnull(parent, 0) = ?1 AND slug = ?2)",
                params![parent.map_or(0, |p| p.0), slug],
                |r| r.get(0),
            )?;
            if taken {
                return Err(Error::DuplicateSlug(slug.to_string()));
            }
            tx.execute(
                "INSERT INTO nodes (kind, name, slug, parent, datatype, set_spec) VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
                params![
                    kind.as_str(),
                    name,
                    slug,
                    parent.map(|p| p.0),
                    datatype.map(|d| d.as_str()),
                    set_spec.as_str()
                ],
            )?;
            Ok(HierarchyNode {
                id: NodeId(tx.last_insert_rowid()),
                kind,
                name: name.to_string(),
                slug: slug.to_string(),
                parent,
                datatype,
                set_spec,
            })
        })
    }

    pub fn node(&self, id: NodeId) -> Result<HierarchyNode> {
        self.store.read(|c| load_node(c, id))
    }

    pub fn node_by_set(&self, spec: &str) -> Result<HierarchyNode> {
        self.store.read(|c| {
            c.query_row(
                &format!("SELECT {NODE_COLUMNS} FROM nodes WHERE set_spec = ?1"),
                [spec],
                node_from_row,
            )
            .optional()?
            .ok_or_else(|| Error::UnknownSet(spec.to_string()))
        })
    }

    /// All nodes ordered by set specifier, so parents precede children.
    pub fn nodes(&self) -> Result<Vec<HierarchyNode>> {
        self.store.read(|c| {
            let mut stmt = c.prepare(&format!("SELECT {NODE_COLUMNS} FROM nodes ORDER BY set_spec"))?;
            let rows = stmt.query_map([], node_from_row)?;
            Ok(rows.collect::<Result<_, _>>()?)
        })
    }

    pub fn children(&self, id: Option<NodeId>) -> Result<Vec<HierarchyNode>> {
        self.store.read(|c| {
            let mut stmt = c.prepare(&format!(
                "SELECT {NODE_COLUMNS} FROM nodes WHERE ifnull(parent, 0) = ?1 ORDER BY slug"
            ))?;
            let rows = stmt.query_map([id.map_or(0, |n| n.0)], node_from_row)?;
            Ok(rows.collect::<Result<_, _>>()?)
        })
    }

    /// The chain from the community down to `id`, inclusive.
    pub fn ancestry(&self, id: NodeId) -> Result<Vec<HierarchyNode>> {
        self.store.read(|c| {
            let mut chain = vec![load_node(c, id)?];
            while let Some(p) = chain.last().and_then(|n| n.parent) {
                chain.push(load_node(c, p)?);
            }
            chain.reverse();
            Ok(chain)
        })
    }
}
