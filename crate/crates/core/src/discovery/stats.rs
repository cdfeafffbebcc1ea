//! Append-only usage log and windowed reports over it.

use std::cmp::Reverse;

use rusqlite::params;
use serde::{Deserialize, Serialize};

use crate::clock::{from_unix, Timestamp};
use crate::error::{Error, Result};
use crate::repo::{Pid, Repository};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Visit,
    ItemView,
    Download,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Visit => "visit",
            EventKind::ItemView => "item-view",
            EventKind::Download => "download",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatEvent {
    pub kind: EventKind,
    /// A pid, a node id, or `site`.
    pub subject: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bitstream: Option<u32>,
    #[serde(with = "crate::clock::serde_utc")]
    pub at: Timestamp,
}

impl StatEvent {
    pub fn now(repo: &Repository, kind: EventKind, subject: impl Into<String>) -> Self {
        StatEvent {
            kind,
            subject: subject.into(),
            bitstream: None,
            at: repo.now(),
        }
    }
}

pub fn record_event(repo: &Repository, event: &StatEvent) -> Result<()> {
    repo.store().write(|tx| {
        tx.execute(
            "INSERT INTO events (kind, subject, bitstream, at) VALUES (?1, ?2, ?3, ?4)",
            params![event.kind.as_str(), event.subject, event.bitstream, event.at.timestamp()],
        )?;
        Ok(())
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranked {
    pub subject: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    #[serde(with = "crate::clock::serde_utc")]
    pub from: Timestamp,
    #[serde(with = "crate::clock::serde_utc")]
    pub until: Timestamp,
    pub visits: u64,
    pub views: u64,
    pub downloads: u64,
    pub top_downloaded: Vec<Ranked>,
    pub top_viewed: Vec<Ranked>,
}

/// Counts over `[from, until)`. Top lists rank subjects by count, ties
/// broken by ascending pid.
pub fn stats_report(repo: &Repository, from: Timestamp, until: Timestamp, top_k: usize) -> Result<StatsReport> {
    if from > until {
        return Err(Error::BadInterval);
    }
    let (lo, hi) = (from.timestamp(), until.timestamp());
    let grouped = |kind: EventKind| -> Result<Vec<Ranked>> {
        repo.store().read(|c| {
            let mut stmt = c.prepare_cached(
                "SELECT subject, COUNT(*) FROM events WHERE kind = ?1 AND at >= ?2 AND at < ?3 GROUP BY subject",
            )?;
            let rows = stmt.query_map(params![kind.as_str(), lo, hi], |r| {
                Ok(Ranked {
                    subject: r.get(0)?,
                    count: r.get::<_, i64>(1)? as u64,
                })
            })?;
            Ok(rows.collect::<Result<_, _>>()?)
        })
    };
    let total = |rows: &[Ranked]| rows.iter().map(|r| r.count).sum::<u64>();
    let visits = total(&grouped(EventKind::Visit)?);
    let mut viewed = grouped(EventKind::ItemView)?;
    let mut downloaded = grouped(EventKind::Download)?;
    let (views, downloads) = (total(&viewed), total(&downloaded));
    rank(&mut viewed, top_k);
    rank(&mut downloaded, top_k);
    Ok(StatsReport {
        from,
        until,
        visits,
        views,
        downloads,
        top_downloaded: downloaded,
        top_viewed: viewed,
    })
}

fn rank(rows: &mut Vec<Ranked>, k: usize) {
    // Pids order numerically; anything else after them, by text.
    let key = |r: &Ranked| match r.subject.parse::<Pid>() {
        Ok(p) => (Reverse(r.count), 0, p.0, String::new()),
        Err(_) => (Reverse(r.count), 1, 0, r.subject.clone()),
    };
    rows.sort_by_cached_key(key);
    rows.truncate(k);
}

/// Earliest and latest event instants, if any.
pub fn event_span(repo: &Repository) -> Result<Option<(Timestamp, Timestamp)>> {
    repo.store().read(|c| {
        let (lo, hi): (Option<i64>, Option<i64>) =
            c.query_row("SELECT MIN(at), MAX(at) FROM events", [], |r| Ok((r.get(0)?, r.get(1)?)))?;
        Ok(lo.zip(hi).map(|(a, b)| (from_unix(a), from_unix(b))))
    })
}
