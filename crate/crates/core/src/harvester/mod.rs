//! Federation client: pulls peers' records over OAI-PMH into a local
//! aggregate index.

mod parse;
mod transport;

pub use parse::{parse_page, HarvestedRecord, Page};
pub use transport::{HttpTransport, LocalTransport, Transport, TransportError};

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rusqlite::{params, OptionalExtension, Row, Transaction};
use serde::{Deserialize, Serialize};

use crate::clock::{from_unix, format_utc, Timestamp};
use crate::error::{Error, Result};
use crate::metadata::{DataType, MetadataRecord};
use crate::oai::OaiErrorCode;
use crate::repo::Repository;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeerStatus {
    NeverSynced,
    Synced,
    Failing,
}

impl PeerStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PeerStatus::NeverSynced => "never-synced",
            PeerStatus::Synced => "synced",
            PeerStatus::Failing => "failing",
        }
    }

    fn parse(s: &str) -> PeerStatus {
        match s {
            "synced" => PeerStatus::Synced,
            "failing" => PeerStatus::Failing,
            _ => PeerStatus::NeverSynced,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeerSite {
    pub name: String,
    /// The peer's protocol endpoint.
    pub base_url: String,
    #[serde(with = "crate::clock::serde_utc::option")]
    pub watermark: Option<Timestamp>,
    pub status: PeerStatus,
    pub last_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateEntry {
    pub peer: String,
    pub identifier: String,
    #[serde(with = "crate::clock::serde_utc")]
    pub datestamp: Timestamp,
    pub deleted: bool,
    /// Dublin Core only; absent for deletions.
    pub record: Option<MetadataRecord>,
    pub sets: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HarvestMode {
    Full,
    Incremental,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarvestReport {
    /// Records received, deletions included.
    pub fetched: u64,
    /// Live entries inserted or changed.
    pub upserted: u64,
    /// Entries newly marked deleted.
    pub deleted: u64,
    pub pages: u32,
    /// Entries dropped by a full harvest because the peer no longer lists them.
    pub purged: u64,
    #[serde(with = "crate::clock::serde_utc::option")]
    pub watermark: Option<Timestamp>,
}

/// Name syntax shared with the peers file: no whitespace.
fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.chars().any(|c| c.is_whitespace() || c.is_control()) {
        return Err(Error::UnknownPeer(name.to_string()));
    }
    Ok(())
}

/// `http(s)://host[:port][/path]` with no whitespace, query or fragment.
pub fn check_url(url: &str) -> Result<()> {
    let bad = || Error::BadUrl(url.to_string());
    let rest = url.strip_prefix("http://").or_else(|| url.strip_prefix("https://")).ok_or_else(bad)?;
    let host = rest.split('/').next().unwrap_or("");
    let hostname = match host.rsplit_once(':') {
        Some((h, port)) if !port.is_empty() && port.parse::<u16>().is_ok() => h,
        Some(_) => return Err(bad()),
        None => host,
    };
    let host_ok = !hostname.is_empty()
        && hostname.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '[' | ']' | ':'));
    if !host_ok || url.chars().any(|c| c.is_whitespace() || c.is_control() || c == '?' || c == '#') {
        return Err(bad());
    }
    Ok(())
}

fn peer_from_row(r: &Row<'_>) -> rusqlite::Result<PeerSite> {
    Ok(PeerSite {
        name: r.get(0)?,
        base_url: r.get(1)?,
        watermark: r.get::<_, Option<i64>>(2)?.map(from_unix),
        status: PeerStatus::parse(&r.get::<_, String>(3)?),
        last_error: r.get(4)?,
    })
}

const PEER_COLUMNS: &str = "name, base_url, watermark, status, last_error";

pub fn register_peer(repo: &Repository, name: &str, base_url: &str) -> Result<PeerSite> {
    check_name(name)?;
    check_url(base_url)?;
    repo.store().write(|tx| {
        let n = tx.execute(
            "INSERT OR IGNORE INTO peers (name, base_url, status) VALUES (?1, ?2, ?3)",
            params![name, base_url, PeerStatus::NeverSynced.as_str()],
        )?;
        if n == 0 {
            return Err(Error::DuplicatePeer(name.to_string()));
        }
        Ok(())
    })?;
    peer(repo, name)
}

pub fn peer(repo: &Repository, name: &str) -> Result<PeerSite> {
    repo.store().read(|c| {
        c.query_row(&format!("SELECT {PEER_COLUMNS} FROM peers WHERE name = ?1"), [name], peer_from_row)
            .optional()?
            .ok_or_else(|| Error::UnknownPeer(name.to_string()))
    })
}

pub fn peers(repo: &Repository) -> Result<Vec<PeerSite>> {
    repo.store().read(|c| {
        let mut stmt = c.prepare(&format!("SELECT {PEER_COLUMNS} FROM peers ORDER BY name"))?;
        let rows = stmt.query_map([], peer_from_row)?;
        Ok(rows.collect::<Result<_, _>>()?)
    })
}

/// Registers every `name<TAB>base-url` line of a peers file. Peers already
/// registered with the same URL are skipped. Returns how many were added.
pub fn load_peers(repo: &Repository, path: &Path) -> Result<usize> {
    let text = fs::read_to_string(path).map_err(|e| Error::Unreadable(format!("{}: {e}", path.display())))?;
    let mut added = 0;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, url) = line
            .split_once('\t')
            .ok_or_else(|| Error::BadManifest(format!("{}:{}: expected name<TAB>base-url", path.display(), n + 1)))?;
        match register_peer(repo, name.trim(), url.trim()) {
            Ok(_) => added += 1,
            Err(Error::DuplicatePeer(_)) if peer(repo, name.trim())?.base_url == url.trim() => {}
            Err(e) => return Err(e),
        }
    }
    Ok(added)
}

/// Retry schedule for transport failures.
#[derive(Clone)]
pub struct RetryPolicy {
    pub retries: u32,
    pub base: Duration,
    pub factor: u32,
    pub sleep: Arc<dyn Fn(Duration) + Send + Sync>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            retries: 3,
            base: Duration::from_secs(1),
            factor: 4,
            sleep: Arc::new(std::thread::sleep),
        }
    }
}

impl RetryPolicy {
    /// Pauses before retry `n` (0-based): base, base·factor, …
    pub fn delay(&self, n: u32) -> Duration {
        self.base * self.factor.pow(n)
    }
}

pub struct Harvester {
    transport: Arc<dyn Transport>,
    retry: RetryPolicy,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Harvester {
    pub fn new(transport: Arc<dyn Transport>) -> Self {
        Harvester::with_retry(transport, RetryPolicy::default())
    }

    pub fn with_retry(transport: Arc<dyn Transport>, retry: RetryPolicy) -> Self {
        Harvester { transport, retry, locks: Mutex::new(HashMap::new()) }
    }

    fn lock_for(&self, peer: &str) -> Arc<Mutex<()>> {
        self.locks.lock().expect("lock table").entry(peer.to_string()).or_default().clone()
    }

    fn fetch(&self, url: &str, args: &[(String, String)]) -> Result<String> {
        let mut attempt = 0;
        loop {
            match self.transport.fetch(url, args) {
                Ok(body) => return Ok(body),
                Err(e) if attempt >= self.retry.retries => {
                    return Err(Error::PeerUnreachable(format!("{url}: {e}")));
                }
                Err(e) => {
                    tracing::warn!(%url, attempt, error = %e, "harvest request failed, retrying");
                    (self.retry.sleep)(self.retry.delay(attempt));
                    attempt += 1;
                }
            }
        }
    }

    /// Runs one harvest of `name`. Harvests of one peer never overlap.
    pub fn harvest(&self, repo: &Repository, name: &str, mode: HarvestMode) -> Result<HarvestReport> {
        let lock = self.lock_for(name);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let site = peer(repo, name)?;
        let result = self.run(repo, &site, mode);
        let (status, error, watermark) = match &result {
            Ok(r) => (PeerStatus::Synced, None, r.watermark),
            Err(e) => (PeerStatus::Failing, Some(format!("{}: {e}", e.code())), None),
        };
        repo.store().write(|tx| {
            tx.execute(
                "UPDATE peers SET status = ?2, last_error = ?3,
                 watermark = CASE WHEN ?4 IS NULL THEN watermark
                                  WHEN watermark IS NULL OR ?4 > watermark THEN ?4
                                  ELSE watermark END
                 WHERE name = ?1",
                params![name, status.as_str(), error, watermark.map(|w| w.timestamp())],
            )?;
            Ok(())
        })?;
        result
    }

    fn run(&self, repo: &Repository, site: &PeerSite, mode: HarvestMode) -> Result<HarvestReport> {
        let mut args = vec![("verb".to_string(), "ListRecords".to_string())];
        args.push(("metadataPrefix".into(), "oai_dc".into()));
        if mode == HarvestMode::Incremental {
            let w = site.watermark.ok_or_else(|| Error::NoWatermark(site.name.clone()))?;
            args.push(("from".into(), format_utc(&w)));
        }
        let mut report = HarvestReport::default();
        let mut seen: HashSet<String> = HashSet::new();
        loop {
            let page_no = report.pages + 1;
            let body = self.fetch(&site.base_url, &args)?;
            let page = parse_page(&body).map_err(|message| Error::ProtocolError { page: page_no, message })?;
            let (response_date, records, token) = match page {
                Page::Records { response_date, records, token } => (response_date, records, token),
                Page::Error { response_date, code: OaiErrorCode::NoRecordsMatch, .. } if page_no == 1 => {
                    (response_date, Vec::new(), None)
                }
                Page::Error { code: OaiErrorCode::BadResumptionToken, .. } => {
                    return Err(Error::BadToken { page: page_no });
                }
                Page::Error { code, message, .. } => {
                    return Err(Error::ProtocolError { page: page_no, message: format!("{}: {message}", code.as_str()) });
                }
            };
            if page_no == 1 {
                report.watermark = Some(response_date);
            }
            report.pages = page_no;
            report.fetched += records.len() as u64;
            repo.store().write(|tx| {
                for r in &records {
                    seen.insert(r.identifier.clone());
                    match upsert(tx, &site.name, r)? {
                        Change::None => {}
                        Change::Live => report.upserted += 1,
                        Change::Deleted => report.deleted += 1,
                    }
                }
                Ok(())
            })?;
            match token {
                Some(t) => {
                    args = vec![("verb".into(), "ListRecords".into()), ("resumptionToken".into(), t)];
                }
                None => break,
            }
        }
        if mode == HarvestMode::Full {
            report.purged = purge_unseen(repo, &site.name, &seen)?;
        }
        Ok(report)
    }
}

enum Change {
    None,
    Live,
    Deleted,
}

/// Newest datestamp wins; an equal datestamp replaces the entry too.
fn upsert(tx: &Transaction<'_>, peer: &str, r: &HarvestedRecord) -> Result<Change> {
    let record = r.record.as_ref().filter(|_| !r.deleted).map(|m| serde_json::to_string(m).expect("record serializes"));
    let sets = serde_json::to_string(&r.sets).expect("sets serialize");
    let existing: Option<(i64, bool, Option<String>, String)> = tx
        .query_row(
            "SELECT datestamp, deleted, record, sets FROM aggregate WHERE peer = ?1 AND identifier = ?2",
            params![peer, r.identifier],
            |row| Ok((row.get(0)?, row.get(1)?, row.get(2)?, row.get(3)?)),
        )
        .optional()?;
    let ts = r.datestamp.timestamp();
    if let Some((ds, deleted, rec, s)) = &existing {
        if *ds > ts || (*ds == ts && *deleted == r.deleted && *rec == record && *s == sets) {
            return Ok(Change::None);
        }
    }
    tx.execute(
        "INSERT INTO aggregate (peer, identifier, datestamp, deleted, record, sets) VALUES (?1, ?2, ?3, ?4, ?5, ?6)
         ON CONFLICT (peer, identifier) DO UPDATE SET
           datestamp = excluded.datestamp, deleted = excluded.deleted, record = excluded.record, sets = excluded.sets",
        params![peer, r.identifier, ts, r.deleted, record, sets],
    )?;
    Ok(if r.deleted { Change::Deleted } else { Change::Live })
}

fn purge_unseen(repo: &Repository, peer: &str, seen: &HashSet<String>) -> Result<u64> {
    repo.store().write(|tx| {
        let ids: Vec<String> = {
            let mut stmt = tx.prepare("SELECT identifier FROM aggregate WHERE peer = ?1")?;
            let rows = stmt.query_map([peer], |r| r.get(0))?;
            rows.collect::<Result<_, _>>()?
        };
        let mut n = 0;
        for id in ids.iter().filter(|id| !seen.contains(*id)) {
            n += tx.execute("DELETE FROM aggregate WHERE peer = ?1 AND identifier = ?2", params![peer, id])? as u64;
        }
        Ok(n)
    })
}

fn entry_from_row(r: &Row<'_>) -> rusqlite::Result<AggregateEntry> {
    let record: Option<String> = r.get(4)?;
    let sets: String = r.get(5)?;
    Ok(AggregateEntry {
        peer: r.get(0)?,
        identifier: r.get(1)?,
        datestamp: from_unix(r.get(2)?),
        deleted: r.get(3)?,
        record: record.map(|s| serde_json::from_str(&s).expect("stored record")),
        sets: serde_json::from_str(&sets).expect("stored sets"),
    })
}

const ENTRY_COLUMNS: &str = "peer, identifier, datestamp, deleted, record, sets";

/// Every entry harvested from `peer`, ordered by identifier.
pub fn aggregate_entries(repo: &Repository, peer: &str) -> Result<Vec<AggregateEntry>> {
    repo.store().read(|c| {
        let mut stmt =
            c.prepare(&format!("SELECT {ENTRY_COLUMNS} FROM aggregate WHERE peer = ?1 ORDER BY identifier"))?;
        let rows = stmt.query_map([peer], entry_from_row)?;
        Ok(rows.collect::<Result<_, _>>()?)
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateQuery {
    #[serde(default)]
    pub q: String,
    pub peer: Option<String>,
    /// A set spec prefix such as `ve` or `ve:ula`.
    pub country: Option<String>,
    pub datatype: Option<DataType>,
    pub limit: Option<usize>,
}

/// Live entries matching every query term in title, creator or description,
/// newest first.
pub fn aggregate_search(repo: &Repository, query: &AggregateQuery) -> Result<Vec<AggregateEntry>> {
    let terms: Vec<String> = query.q.split_whitespace().map(str::to_lowercase).collect();
    let entries: Vec<AggregateEntry> = repo.store().read(|c| {
        let mut stmt = c.prepare(&format!(
            "SELECT {ENTRY_COLUMNS} FROM aggregate WHERE deleted = 0 ORDER BY datestamp DESC, peer, identifier"
        ))?;
        let rows = stmt.query_map([], entry_from_row)?;
        Ok(rows.collect::<Result<_, _>>()?)
    })?;
    let hits = entries.into_iter().filter(|e| {
        let Some(rec) = &e.record else { return false };
        if query.peer.as_ref().is_some_and(|p| *p != e.peer) {
            return false;
        }
        if let Some(c) = &query.country {
            if !e.sets.iter().any(|s| s == c) {
                return false;
            }
        }
        if let Some(dt) = query.datatype {
            if !rec.values("dc.type").any(|t| t == dt.as_str()) {
                return false;
            }
        }
        let text: Vec<String> = ["dc.title", "dc.creator", "dc.description"]
            .iter()
            .flat_map(|k| rec.values(k))
            .map(str::to_lowercase)
            .collect();
        terms.iter().all(|t| text.iter().any(|v| v.contains(t.as_str())))
    });
    Ok(match query.limit {
        Some(n) => hits.take(n).collect(),
        None => hits.collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn urls() {
        for ok in ["http://peer.example.org/oai", "https://10.0.0.1:8080/oai", "http://localhost:9"] {
            check_url(ok).unwrap();
        }
        for bad in ["ftp://x/oai", "http://", "http:///oai", "http://a b/oai", "http://x/oai?verb=Identify", "x", "http://h:port/"] {
            assert!(check_url(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn backoff_schedule() {
        let p = RetryPolicy::default();
        let d: Vec<u64> = (0..3).map(|n| p.delay(n).as_secs()).collect();
        assert_eq!(d, [1, 4, 16]);
    }
}
