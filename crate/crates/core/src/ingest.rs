//! Members, permissioned deposit and bulk loading.

use std::fs;
use std::path::Path;

use rusqlite::{params, OptionalExtension};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::discovery;
use crate::error::{Error, Result};
use crate::metadata::MetadataRecord;
use crate::repo::{read_export_dir, Item, NewFile, NodeId, NodeKind, Pid, Repository};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub id: i64,
    pub name: String,
    pub email: String,
    /// Communities this member may deposit into.
    pub grants: Vec<NodeId>,
    pub admin: bool,
}

pub fn hash_token(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

fn member_from_row(r: &rusqlite::Row<'_>) -> rusqlite::Result<Member> {
    let grants: String = r.get(3)?;
    Ok(Member {
        id: r.get(0)?,
        name: r.get(1)?,
        email: r.get(2)?,
        grants: serde_json::from_str(&grants).expect("stored grants"),
        admin: r.get(4)?,
    })
}

/// Adds a member, or replaces the one holding the same token.
/// `communities` are community slugs.
pub fn add_member(
    repo: &Repository,
    name: &str,
    email: &str,
    token: &str,
    communities: &[&str],
    admin: bool,
) -> Result<Member> {
    if token.is_empty() || token.chars().any(char::is_whitespace) {
        return Err(Error::BadManifest("token must be non-empty and contain no whitespace".into()));
    }
    if !discovery::is_email(email) {
        return Err(Error::InvalidEmail(email.to_string()));
    }
    let mut grants = Vec::new();
    for slug in communities {
        let node = repo.node_by_set(slug)?;
        if node.kind != NodeKind::Community {
            return Err(Error::BadNode(format!("{slug} is not a community")));
        }
        grants.push(node.id);
    }
    let grants_json = serde_json::to_string(&grants).expect("grants serialize");
    repo.store().write(|tx| {
        tx.execute(
            "INSERT INTO members (name, email, token_hash, grants, admin) VALUES (?1, ?2, ?3, ?4, ?5)
             ON CONFLICT(token_hash) DO UPDATE SET name = excluded.name, email = excluded.email,
                 grants = excluded.grants, admin = excluded.admin",
            params![name, email, hash_token(token), grants_json, admin],
        )?;
        let member = tx.query_row(
            "SELECT id, name, email, grants, admin FROM members WHERE token_hash = ?1",
            [hash_token(token)],
            member_from_row,
        )?;
        Ok(member)
    })
}

/// Loads `members.tsv`: `name \t email \t token \t slug,slug[ \t admin]`.
/// Returns the number of members loaded.
pub fn load_members(repo: &Repository, path: &Path) -> Result<usize> {
    let text = fs::read_to_string(path).map_err(|e| Error::Unreadable(format!("{}: {e}", path.display())))?;
    let mut n = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if !(4..=5).contains(&cols.len()) {
            return Err(Error::BadManifest(format!("{}:{}: expected 4 or 5 columns", path.display(), i + 1)));
        }
        let slugs: Vec<&str> = cols[3].split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        let admin = match cols.get(4).map(|s| s.trim()) {
            None | Some("") => false,
            Some("admin") => true,
            Some(other) => {
                return Err(Error::BadManifest(format!(
                    "{}:{}: fifth column must be \"admin\", got {other:?}",
                    path.display(),
                    i + 1
                )))
            }
        };
        add_member(repo, cols[0].trim(), cols[1].trim(), cols[2].trim(), &slugs, admin)?;
        n += 1;
    }
    Ok(n)
}

pub fn authenticate(repo: &Repository, token: &str) -> Result<Member> {
    if token.is_empty() {
        return Err(Error::Unauthorized);
    }
    repo.store()
        .read(|c| {
            Ok(c.query_row(
                "SELECT id, name, email, grants, admin FROM members WHERE token_hash = ?1",
                [hash_token(token)],
                member_from_row,
            )
            .optional()?)
        })?
        .ok_or(Error::Unauthorized)
}

pub fn member(repo: &Repository, id: i64) -> Result<Option<Member>> {
    repo.store().read(|c| {
        Ok(c.query_row("SELECT id, name, email, grants, admin FROM members WHERE id = ?1", [id], member_from_row)
            .optional()?)
    })
}

/// Whether `member` may deposit into `collection`.
pub fn may_deposit(repo: &Repository, member: &Member, collection: NodeId) -> Result<bool> {
    let chain = repo.ancestry(collection)?;
    Ok(member.grants.contains(&chain[0].id))
}

/// Creates an item if the collection's community is granted to `member`,
/// then spools new-deposit notices to the collection's subscribers.
pub fn deposit(
    repo: &Repository,
    member: &Member,
    collection: NodeId,
    record: MetadataRecord,
    files: Vec<NewFile>,
) -> Result<Item> {
    if !may_deposit(repo, member, collection)? {
        let node = repo.node(collection)?;
        return Err(Error::Forbidden(format!("{} may not deposit into {}", member.name, node.set_spec)));
    }
    operator_deposit(repo, collection, record, files)
}

/// A deposit made by the operator, outside any member's grants.
pub fn operator_deposit(repo: &Repository, collection: NodeId, record: MetadataRecord, files: Vec<NewFile>) -> Result<Item> {
    let item = repo.add_item(collection, record, files)?;
    if let Err(e) = discovery::on_deposit(repo, &item) {
        // The item is committed; a spool failure must not undo it.
        tracing::warn!(pid = %item.pid, error = %e, "could not spool deposit notices");
    }
    Ok(item)
}

/// Deposits one item-export directory into the collection named by `set`,
/// as `member` or, without one, as the operator.
pub fn deposit_dir(repo: &Repository, member: Option<&Member>, dir: &Path, set: &str) -> Result<Item> {
    let collection = repo.node_by_set(set)?;
    let (record, files) = read_export_dir(dir)?.into_new_files();
    match member {
        Some(m) => deposit(repo, m, collection.id, record, files),
        None => operator_deposit(repo, collection.id, record, files),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BulkFailure {
    pub entry: String,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BulkReport {
    pub attempted: usize,
    pub succeeded: usize,
    pub created: Vec<Pid>,
    pub failed: Vec<BulkFailure>,
}

/// Deposits every entry listed in `<root>/entries.tsv`
/// (`<relative-dir> \t <setSpec>`), in order. A failing entry is recorded
/// and the run continues.
pub fn bulk_load(repo: &Repository, member: Option<&Member>, root: &Path) -> Result<BulkReport> {
    let listing = root.join("entries.tsv");
    let text = fs::read_to_string(&listing).map_err(|e| Error::Unreadable(format!("{}: {e}", listing.display())))?;
    let mut report = BulkReport::default();
    for line in text.lines() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        report.attempted += 1;
        let result = match line.split_once('\t') {
            Some((dir, set)) => deposit_dir(repo, member, &root.join(dir.trim()), set.trim()),
            None => Err(Error::BadManifest("expected `<dir>\\t<setSpec>`".into())),
        };
        match result {
            Ok(item) => {
                report.succeeded += 1;
                report.created.push(item.pid);
            }
            Err(e) => {
                tracing::warn!(entry = line, error = %e, "bulk entry failed");
                report.failed.push(BulkFailure {
                    entry: line.split('\t').next().unwrap_or(line).to_string(),
                    code: e.code().to_string(),
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(report)
}
