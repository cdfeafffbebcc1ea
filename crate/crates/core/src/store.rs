//! The durable metadata store: one SQLite database in WAL mode behind a
//! mutex. Every write runs in an immediate transaction, so readers never see
//! a half-written item and a crash rolls back to the last commit.

use std::path::Path;
use std::sync::{Mutex, MutexGuard};

use rusqlite::{Connection, OptionalExtension, Transaction, TransactionBehavior};

use crate::error::Result;

const SCHEMA: &str = r#"
CREATE TABLE IF NOT EXISTS meta (
    key   TEXT PRIMARY KEY,
    value INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS nodes (
    id       INTEGER PRIMARY KEY,
    kind     TEXT NOT NULL,
    name     TEXT NOT NULL,
    slug     TEXT NOT NULL,
    parent   INTEGER REFERENCES nodes(id),
    datatype TEXT,
    set_spec TEXT NOT NULL UNIQUE
);
CREATE UNIQUE INDEX IF NOT EXISTS nodes_sibling_slug ON nodes (ifnull(parent, 0), slug);
CREATE TABLE IF NOT EXISTS items (
    seq        INTEGER PRIMARY KEY,
    collection INTEGER NOT NULL REFERENCES nodes(id),
    set_spec   TEXT NOT NULL,
    record     TEXT NOT NULL,
    datestamp  INTEGER NOT NULL,
    withdrawn  INTEGER NOT NULL DEFAULT 0
);
CREATE INDEX IF NOT EXISTS items_datestamp ON items (datestamp, seq);
CREATE TABLE IF NOT EXISTS bitstreams (
    item       INTEGER NOT NULL REFERENCES items(seq),
    seq        INTEGER NOT NULL,
    filename   TEXT NOT NULL,
    role       TEXT NOT NULL,
    media_type TEXT NOT NULL,
    size       INTEGER NOT NULL,
    sha256     TEXT NOT NULL,
    license    TEXT,
    PRIMARY KEY (item, seq)
);
CREATE TABLE IF NOT EXISTS members (
    id         INTEGER PRIMARY KEY,
    name       TEXT NOT NULL,
    email      TEXT NOT NULL,
    token_hash TEXT NOT NULL UNIQUE,
    grants     TEXT NOT NULL,
    admin      INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS subscriptions (
    member     INTEGER NOT NULL REFERENCES members(id),
    collection INTEGER NOT NULL REFERENCES nodes(id),
    PRIMARY KEY (member, collection)
);
CREATE TABLE IF NOT EXISTS events (
    id        INTEGER PRIMARY KEY,
    kind      TEXT NOT NULL,
    subject   TEXT NOT NULL,
    bitstream INTEGER,
    at        INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS events_at ON events (at);
CREATE TABLE IF NOT EXISTS peers (
    name       TEXT PRIMARY KEY,
    base_url   TEXT NOT NULL,
    watermark  INTEGER,
    status     TEXT NOT NULL,
    last_error TEXT
);
CREATE TABLE IF NOT EXISTS aggregate (
    peer       TEXT NOT NULL REFERENCES peers(name),
    identifier TEXT NOT NULL,
    datestamp  INTEGER NOT NULL,
    deleted    INTEGER NOT NULL,
    record     TEXT,
    sets       TEXT NOT NULL,
    PRIMARY KEY (peer, identifier)
);
"#;

pub struct Store {
    conn: Mutex<Connection>,
}

impl Store {
    pub fn open(path: &Path, sync: bool) -> Result<Self> {
        let conn = Connection::open(path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", if sync { "FULL" } else { "OFF" })?;
        Self::init(conn)
    }

    pub fn open_in_memory() -> Result<Self> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self> {
        conn.pragma_update(None, "foreign_keys", "ON")?;
        conn.busy_timeout(std::time::Duration::from_secs(10))?;
        conn.execute_batch(SCHEMA)?;
        Ok(Store { conn: Mutex::new(conn) })
    }

    fn lock(&self) -> MutexGuard<'_, Connection> {
        // A panic inside a closure already rolled its transaction back.
        self.conn.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn read<T>(&self, f: impl FnOnce(&Connection) -> Result<T>) -> Result<T> {
        f(&self.lock())
    }

    /// Runs `f` in one transaction; commits only if it returns `Ok`.
    pub fn write<T>(&self, f: impl FnOnce(&Transaction<'_>) -> Result<T>) -> Result<T> {
        let mut conn = self.lock();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let out = f(&tx)?;
        tx.commit()?;
        Ok(out)
    }
}

/// Increments and returns the named counter.
pub fn next_counter(conn: &Connection, key: &str) -> Result<i64> {
    let current: Option<i64> = conn
        .query_row("SELECT value FROM meta WHERE key = ?1", [key], |r| r.get(0))
        .optional()?;
    let next = current.unwrap_or(0) + 1;
    conn.execute(
        "INSERT INTO meta (key, value) VALUES (?1, ?2) ON CONFLICT(key) DO UPDATE SET value = excluded.value",
        rusqlite::params![key, next],
    )?;
    Ok(next)
}

pub fn counter(conn: &Connection, key: &str) -> Result<i64> {
    Ok(conn
        .query_row("SELECT value FROM meta WHERE key = ?1", [key], |r| r.get(0))
        .optional()?
        .unwrap_or(0))
}
