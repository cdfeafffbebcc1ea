//! Subscriptions and the outbox spool.
//!
//! Each message is one file `outbox/<queued-at>-<seq>.eml`:
//!
//! ```text
//! To: ana@example.org
//! Subject: New deposit in ve:ula:wcd-raw: run-042
//! X-Lago-Kind: new-deposit
//! X-Lago-Pid: lago/12
//! Date: 2008-05-01T10:00:00Z
//!
//! <body>
//! ```
//!
//! Delivery is left to whatever drains the directory.

use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use rusqlite::params;
use serde::{Deserialize, Serialize};

use crate::clock::{format_utc, parse_utc, Timestamp};
use crate::error::{Error, Result};
use crate::ingest::Member;
use crate::repo::{Item, NodeId, NodeKind, Pid, Repository};
use crate::store::next_counter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    NewDeposit,
    Recommendation,
}

impl MessageKind {
    fn as_str(self) -> &'static str {
        match self {
            MessageKind::NewDeposit => "new-deposit",
            MessageKind::Recommendation => "recommendation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutboxMessage {
    pub to: String,
    pub kind: MessageKind,
    pub subject_pid: Pid,
    pub subject: String,
    pub body: String,
    #[serde(with = "crate::clock::serde_utc")]
    pub queued_at: Timestamp,
}

/// A syntactic check only: `local@domain.tld`, one `@`, no whitespace.
pub fn is_email(s: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[^@\s]+@[^@\s.]+(\.[^@\s.]+)+$").unwrap()).is_match(s)
}

pub fn subscribe(repo: &Repository, member: &Member, collection: NodeId) -> Result<()> {
    let node = repo.node(collection)?;
    if node.kind != NodeKind::Collection {
        return Err(Error::BadNode(format!("{} is not a collection", node.set_spec)));
    }
    repo.store().write(|tx| {
        let n = tx.execute(
            "INSERT OR IGNORE INTO subscriptions (member, collection) VALUES (?1, ?2)",
            params![member.id, collection.0],
        )?;
        if n == 0 {
            return Err(Error::DuplicateSubscription);
        }
        Ok(())
    })
}

/// Distinct subscriber addresses of a collection.
pub fn subscribers(repo: &Repository, collection: NodeId) -> Result<Vec<String>> {
    repo.store().read(|c| {
        let mut stmt = c.prepare(
            "SELECT DISTINCT m.email FROM subscriptions s JOIN members m ON m.id = s.member
             WHERE s.collection = ?1 ORDER BY m.email",
        )?;
        let rows = stmt.query_map([collection.0], |r| r.get(0))?;
        Ok(rows.collect::<Result<_, _>>()?)
    })
}

/// Spools one new-deposit notice per subscriber of the item's collection.
pub fn on_deposit(repo: &Repository, item: &Item) -> Result<Vec<OutboxMessage>> {
    let title = item.record.first("dc.title").unwrap_or("(untitled)");
    let mut out = Vec::new();
    for to in subscribers(repo, item.collection)? {
        let msg = OutboxMessage {
            to,
            kind: MessageKind::NewDeposit,
            subject_pid: item.pid,
            subject: format!("New deposit in {}: {}", item.set_spec, one_line(title)),
            body: format!(
                "A new item was deposited in {}.\n\nTitle: {title}\nIdentifier: {}\nFiles: {}\n",
                item.set_spec,
                item.pid,
                item.bitstreams.len()
            ),
            queued_at: repo.now(),
        };
        spool(repo, &msg)?;
        out.push(msg);
    }
    Ok(out)
}

pub fn recommend(repo: &Repository, pid: Pid, to: &str, from_name: Option<&str>) -> Result<OutboxMessage> {
    if !is_email(to) {
        return Err(Error::InvalidEmail(to.to_string()));
    }
    let item = repo.item(pid)?;
    if item.withdrawn {
        return Err(Error::UnknownPid(pid.to_string()));
    }
    let title = item.record.first("dc.title").unwrap_or("(untitled)");
    let who = from_name.map(one_line).filter(|s| !s.is_empty()).unwrap_or_else(|| "Someone".to_string());
    let msg = OutboxMessage {
        to: to.to_string(),
        kind: MessageKind::Recommendation,
        subject_pid: pid,
        subject: format!("{who} recommends: {}", one_line(title)),
        body: format!("{who} thought you would be interested in this item.\n\nTitle: {title}\nIdentifier: {pid}\n"),
        queued_at: repo.now(),
    };
    spool(repo, &msg)?;
    Ok(msg)
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn spool(repo: &Repository, msg: &OutboxMessage) -> Result<()> {
    let seq = repo.store().write(|tx| next_counter(tx, "outbox"))?;
    let dir = repo.outbox_dir();
    let name = format!("{}-{seq:06}.eml", msg.queued_at.format("%Y%m%dT%H%M%SZ"));
    let text = format!(
        "To: {}\nSubject: {}\nX-Lago-Kind: {}\nX-Lago-Pid: {}\nDate: {}\n\n{}",
        msg.to,
        msg.subject,
        msg.kind.as_str(),
        msg.subject_pid,
        format_utc(&msg.queued_at),
        msg.body
    );
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    std::io::Write::write_all(&mut tmp, text.as_bytes())?;
    tmp.persist(dir.join(name)).map_err(|e| Error::StorageFailure(e.to_string()))?;
    Ok(())
}

/// Every spooled message, oldest first.
pub fn read_outbox(dir: &Path) -> Result<Vec<OutboxMessage>> {
    let mut names: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "eml"))
        .collect();
    names.sort();
    let mut out = Vec::new();
    for path in names {
        let text = fs::read_to_string(&path)?;
        let bad = || Error::BadManifest(format!("malformed outbox file {}", path.display()));
        let (head, body) = text.split_once("\n\n").ok_or_else(bad)?;
        let header = |name: &str| {
            head.lines()
                .find_map(|l| l.strip_prefix(name).and_then(|r| r.strip_prefix(": ")))
                .map(str::to_string)
                .ok_or_else(bad)
        };
        out.push(OutboxMessage {
            to: header("To")?,
            kind: match header("X-Lago-Kind")?.as_str() {
                "new-deposit" => MessageKind::NewDeposit,
                "recommendation" => MessageKind::Recommendation,
                _ => return Err(bad()),
            },
            subject_pid: header("X-Lago-Pid")?.parse()?,
            subject: header("Subject")?,
            body: body.to_string(),
            queued_at: parse_utc(&header("Date")?).ok_or_else(bad)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn email_syntax() {
        for ok in ["a@b.org", "first.last+tag@lago.ula.ve"] {
            assert!(is_email(ok), "{ok}");
        }
        for bad in ["x@@y", "x@y", "@y.org", "x y@z.org", "x@.org", "x@y.", ""] {
            assert!(!is_email(bad), "{bad}");
        }
    }
}
