use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rusqlite::{params, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};

use super::hierarchy::{load_node, NodeId, NodeKind, SetSpec};
use super::{Checkpoint, Repository, StoredBlob};
use crate::clock::{from_unix, Timestamp};
use crate::error::{Error, Result};
use crate::metadata::{validate_record, MetadataRecord};
use crate::store::{counter, next_counter};

/// Persistent identifier `lago/<n>`, n ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pid(pub u64);

impl fmt::Display for Pid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lago/{}", self.0)
    }
}

impl FromStr for Pid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::UnknownPid(s.to_string());
        let n: u64 = s.strip_prefix("lago/").ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let pid = Pid(n);
        // Reject aliases such as "lago/007" or "lago/+7".
        if n == 0 || pid.to_string() != s {
            return Err(bad());
        }
        Ok(pid)
    }
}

impl Serialize for Pid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Pid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! token_enum {
    ($name:ident, $what:literal, { $($variant:ident => $token:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $token)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $token),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str() == s)
                    .ok_or_else(|| Error::BadBitstream(format!("unknown {} {s:?}", $what)))
            }
        }
    };
}

token_enum!(Role, "role", {
    Data => "data",
    Calibration => "calibration",
    Graphic => "graphic",
    Postprocessed => "postprocessed",
    Other => "other",
});

token_enum!(License, "license", {
    CcBy => "CC-BY",
    CcBySa => "CC-BY-SA",
    CcByNc => "CC-BY-NC",
    CcByNcSa => "CC-BY-NC-SA",
    CcByNd => "CC-BY-ND",
    CcByNcNd => "CC-BY-NC-ND",
    Cc0 => "CC0",
});

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bitstream {
    pub seq: u32,
    pub filename: String,
    pub role: Role,
    pub media_type: String,
    pub size: u64,
    /// Hex SHA-256 of the content; also its address in the assetstore.
    pub checksum: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub license: Option<License>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub pid: Pid,
    pub collection: NodeId,
    pub set_spec: SetSpec,
    pub record: MetadataRecord,
    #[serde(with = "crate::clock::serde_utc")]
    pub datestamp: Timestamp,
    pub withdrawn: bool,
    pub bitstreams: Vec<Bitstream>,
}

#[derive(Debug, Clone)]
pub enum Content {
    Path(PathBuf),
    Bytes(Vec<u8>),
}

/// A file to attach to a new item.
#[derive(Debug, Clone)]
pub struct NewFile {
    pub filename: String,
    pub role: Role,
    pub license: Option<License>,
    /// Guessed from the filename when absent.
    pub media_type: Option<String>,
    pub content: Content,
}

impl NewFile {
    pub fn bytes(filename: &str, role: Role, content: impl Into<Vec<u8>>) -> Self {
        NewFile {
            filename: filename.to_string(),
            role,
            license: None,
            media_type: None,
            content: Content::Bytes(content.into()),
        }
    }

    pub fn with_license(mut self, license: License) -> Self {
        self.license = Some(license);
        self
    }
}

pub fn check_filename(name: &str) -> Result<()> {
    let bad = name.is_empty()
        || name == "."
        || name == ".."
        || name.contains(['/', '\\', '\0'])
        || name.chars().any(char::is_control)
        || name != name.trim();
    if bad {
        return Err(Error::InvalidFilename(name.to_string()));
    }
    Ok(())
}

pub fn check_media_type(m: &str) -> Result<()> {
    let ok = m.split_once('/').is_some_and(|(t, s)| {
        let token = |x: &str| !x.is_empty() && x.bytes().all(|b| b.is_ascii_alphanumeric() || b"!#$&-^_.+".contains(&b));
        token(t) && token(s)
    });
    if !ok {
        return Err(Error::BadBitstream(format!("bad media type {m:?}")));
    }
    Ok(())
}

/// Filter and cursor for item listings. Results are ordered by
/// `(datestamp, pid)`, ascending unless `newest_first`.
#[derive(Debug, Clone, Default)]
pub struct ItemQuery {
    /// Only items whose collection lies at or below this set.
    pub set: Option<String>,
    pub from: Option<Timestamp>,
    pub until: Option<Timestamp>,
    /// Strictly after this `(datestamp, pid)` position.
    pub after: Option<(Timestamp, Pid)>,
    pub include_withdrawn: bool,
    pub newest_first: bool,
    pub limit: Option<usize>,
}

impl ItemQuery {
    fn where_clause(&self) -> (String, Vec<rusqlite::types::Value>) {
        use rusqlite::types::Value;
        let mut conds = vec!["1 = 1".to_string()];
        let mut args: Vec<Value> = Vec::new();
        if let Some(set) = &self.set {
            args.push(Value::Text(set.clone()));
            args.push(Value::Text(format!("{set}:%")));
            conds.push(format!("(set_spec = ?{} OR set_spec LIKE ?{})", args.len() - 1, args.len()));
        }
        if let Some(from) = self.from {
            args.push(Value::Integer(from.timestamp()));
            conds.push(format!("datestamp >= ?{}", args.len()));
        }
        if let Some(until) = self.until {
            args.push(Value::Integer(until.timestamp()));
            conds.push(format!("datestamp <= ?{}", args.len()));
        }
        if let Some((ds, pid)) = self.after {
            args.push(Value::Integer(ds.timestamp()));
            args.push(Value::Integer(pid.0 as i64));
            let (a, b) = (args.len() - 1, args.len());
            conds.push(format!("(datestamp > ?{a} OR (datestamp = ?{a} AND seq > ?{b}))"));
        }
        if !self.include_withdrawn {
            conds.push("withdrawn = 0".to_string());
        }
        (conds.join(" AND "), args)
    }
}

const ITEM_COLUMNS: &str = "seq, collection, set_spec, record, datestamp, withdrawn";

fn load_items(conn: &Connection, sql: &str, args: &[rusqlite::types::Value]) -> Result<Vec<Item>> {
    let mut stmt = conn.prepare_cached(sql)?;
    let rows = stmt.query_map(rusqlite::params_from_iter(args), |r| {
        let record: String = r.get(3)?;
        Ok(Item {
            pid: Pid(r.get::<_, i64>(0)? as u64),
            collection: NodeId(r.get(1)?),
            set_spec: SetSpec::parse(&r.get::<_, String>(2)?).expect("stored set spec"),
            record: serde_json::from_str(&record).expect("stored record"),
            datestamp: from_unix(r.get(4)?),
            withdrawn: r.get(5)?,
            bitstreams: Vec::new(),
        })
    })?;
    let mut items: Vec<Item> = rows.collect::<Result<_, _>>()?;
    let mut bs = conn.prepare_cached(
        "SELECT seq, filename, role, media_type, size, sha256, license FROM bitstreams WHERE item = ?1 ORDER BY seq",
    )?;
    for item in &mut items {
        let rows = bs.query_map([item.pid.0 as i64], |r| {
            let role: String = r.get(2)?;
            let license: Option<String> = r.get(6)?;
            Ok(Bitstream {
                seq: r.get(0)?,
                filename: r.get(1)?,
                role: role.parse().expect("stored role"),
                media_type: r.get(3)?,
                size: r.get::<_, i64>(4)? as u64,
                checksum: r.get(5)?,
                license: license.map(|l| l.parse().expect("stored license")),
            })
        })?;
        item.bitstreams = rows.collect::<Result<_, _>>()?;
    }
    Ok(items)
}

fn load_item(conn: &Connection, pid: Pid) -> Result<Item> {
    load_items(
        conn,
        &format!("SELECT {ITEM_COLUMNS} FROM items WHERE seq = ?1"),
        &[rusqlite::types::Value::Integer(pid.0 as i64)],
    )?
    .pop()
    .ok_or_else(|| Error::UnknownPid(pid.to_string()))
}

const PID_COUNTER: &str = "pid";

impl Repository {
    pub fn mint_pid(&self) -> Result<Pid> {
        self.store.write(|tx| Ok(Pid(next_counter(tx, PID_COUNTER)? as u64)))
    }

    /// Highest pid minted so far, if any.
    pub fn last_pid(&self) -> Result<Option<Pid>> {
        let n = self.store.read(|c| counter(c, PID_COUNTER))?;
        Ok((n > 0).then_some(Pid(n as u64)))
    }

    /// Stores the files, then records the item in one transaction. A failure
    /// or crash before the commit leaves at most unreferenced blobs behind.
    pub fn add_item(&self, collection: NodeId, record: MetadataRecord, files: Vec<NewFile>) -> Result<Item> {
        let node = self.node(collection)?;
        if node.kind != NodeKind::Collection {
            return Err(Error::BadNode(format!("node {collection} is a {}, not a collection", node.kind)));
        }
        let datatype = node.datatype.expect("collections have a data type");
        let report = validate_record(&record, datatype);
        if !report.ok {
            return Err(Error::ValidationFailed(report));
        }
        if files.is_empty() && datatype.requires_bitstreams() {
            return Err(Error::NoBitstreams(datatype.to_string()));
        }
        let mut seen = HashSet::new();
        for f in &files {
            check_filename(&f.filename)?;
            if !seen.insert(f.filename.as_str()) {
                return Err(Error::InvalidFilename(format!("{} (duplicate)", f.filename)));
            }
            if let Some(m) = &f.media_type {
                check_media_type(m)?;
            }
        }

        let mut stored: Vec<StoredBlob> = Vec::with_capacity(files.len());
        for (i, f) in files.iter().enumerate() {
            self.checkpoint(Checkpoint::BeforeBlob(i));
            stored.push(match &f.content {
                Content::Path(p) => self.blobs.put_file(p)?,
                Content::Bytes(b) => self.blobs.put(b)?,
            });
            self.checkpoint(Checkpoint::AfterBlob(i));
        }
        let bitstreams: Vec<Bitstream> = files
            .into_iter()
            .zip(stored)
            .enumerate()
            .map(|(i, (f, blob))| Bitstream {
                seq: i as u32,
                media_type: f.media_type.unwrap_or_else(|| {
                    mime_guess::from_path(&f.filename).first_or_octet_stream().essence_str().to_string()
                }),
                filename: f.filename,
                role: f.role,
                size: blob.size,
                checksum: blob.address,
                license: f.license,
            })
            .collect();

        let datestamp = self.now();
        let record_json = serde_json::to_string(&record).expect("record serializes");
        let item = self.store.write(|tx| {
            self.checkpoint(Checkpoint::TxnBegun);
            let pid = Pid(next_counter(tx, PID_COUNTER)? as u64);
            self.checkpoint(Checkpoint::PidMinted);
            tx.execute(
                "INSERT INTO items (seq, collection, set_spec, record, datestamp, withdrawn) VALUES (?1, ?2, ?3, ?4, ?5, 0)",
                params![pid.0 as i64, collection.0, node.set_spec.as_str(), record_json, datestamp.timestamp()],
            )?;
            self.checkpoint(Checkpoint::ItemRow);
            for b in &bitstreams {
                tx.execute(
                    "INSERT INTO bitstreams (item, seq, filename, role, media_type, size, sha256, license) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)",
                    params![
                        pid.0 as i64,
                        b.seq,
                        b.filename,
                        b.role.as_str(),
                        b.media_type,
                        b.size as i64,
                        b.checksum,
                        b.license.map(License::as_str)
                    ],
                )?;
                self.checkpoint(Checkpoint::BitstreamRow(b.seq as usize));
            }
            self.checkpoint(Checkpoint::BeforeCommit);
            Ok(Item {
                pid,
                collection,
                set_spec: node.set_spec.clone(),
                record,
                datestamp,
                withdrawn: false,
                bitstreams,
            })
        })?;
        self.checkpoint(Checkpoint::Committed);
        tracing::info!(pid = %item.pid, set = %item.set_spec, "item added");
        Ok(item)
    }

    pub fn item(&self, pid: Pid) -> Result<Item> {
        self.store.read(|c| load_item(c, pid))
    }

    pub fn item_by_str(&self, pid: &str) -> Result<Item> {
        self.item(pid.parse()?)
    }

    /// The next datestamp for an item last stamped `prev`: now, but always
    /// at least one second later than `prev`.
    fn bump(&self, prev: Timestamp) -> Timestamp {
        let now = self.now();
        if now > prev {
            now
        } else {
            prev + chrono::Duration::seconds(1)
        }
    }

    pub fn withdraw_item(&self, pid: Pid) -> Result<Item> {
        self.store.write(|tx| {
            let mut item = load_item(tx, pid)?;
            if item.withdrawn {
                return Err(Error::AlreadyWithdrawn(pid.to_string()));
            }
            item.datestamp = self.bump(item.datestamp);
            item.withdrawn = true;
            tx.execute(
                "UPDATE items SET withdrawn = 1, datestamp = ?2 WHERE seq = ?1",
                params![pid.0 as i64, item.datestamp.timestamp()],
            )?;
            Ok(item)
        })
    }

    pub fn update_metadata(&self, pid: Pid, record: MetadataRecord) -> Result<Item> {
        self.store.write(|tx| {
            let mut item = load_item(tx, pid)?;
            if item.withdrawn {
                return Err(Error::ItemWithdrawn(pid.to_string()));
            }
            let datatype = load_node(tx, item.collection)?.datatype.expect("collection data type");
            let report = validate_record(&record, datatype);
            if !report.ok {
                return Err(Error::ValidationFailed(report));
            }
            item.datestamp = self.bump(item.datestamp);
            item.record = record;
            tx.execute(
                "UPDATE items SET record = ?2, datestamp = ?3 WHERE seq = ?1",
                params![
                    pid.0 as i64,
                    serde_json::to_string(&item.record).expect("record serializes"),
                    item.datestamp.timestamp()
                ],
            )?;
            Ok(item)
        })
    }

    /// A bitstream's descriptor and verified content. Refused for withdrawn
    /// items.
    pub fn open_bitstream(&self, pid: Pid, seq: u32) -> Result<(Bitstream, Vec<u8>)> {
        let item = self.item(pid)?;
        if item.withdrawn {
            return Err(Error::ItemWithdrawn(pid.to_string()));
        }
        let b = item
            .bitstreams
            .into_iter()
            .find(|b| b.seq == seq)
            .ok_or(Error::UnknownBitstream(seq))?;
        let bytes = self.blobs.get(&b.checksum)?;
        Ok((b, bytes))
    }

    pub fn list_items(&self, q: &ItemQuery) -> Result<Vec<Item>> {
        let (cond, mut args) = q.where_clause();
        let order = if q.newest_first { "DESC" } else { "ASC" };
        let mut sql = format!("SELECT {ITEM_COLUMNS} FROM items WHERE {cond} ORDER BY datestamp {order}, seq {order}");
        if let Some(limit) = q.limit {
            args.push(rusqlite::types::Value::Integer(limit as i64));
            sql.push_str(&format!(" LIMIT ?{}", args.len()));
        }
        self.store.read(|c| load_items(c, &sql, &args))
    }

    /// Number of items matching `q`, ignoring its limit.
    pub fn count_items(&self, q: &ItemQuery) -> Result<usize> {
        let (cond, args) = q.where_clause();
        self.store.read(|c| {
            let n: i64 = c.query_row(
                &format!("SELECT COUNT(*) FROM items WHERE {cond}"),
                rusqlite::params_from_iter(args),
                |r| r.get(0),
            )?;
            Ok(n as usize)
        })
    }

    /// Earliest datestamp of any item, withdrawn or not.
    pub fn earliest_datestamp(&self) -> Result<Option<Timestamp>> {
        self.store.read(|c| {
            let v: Option<i64> = c
                .query_row("SELECT MIN(datestamp) FROM items", [], |r| r.get(0))
                .optional()?
                .flatten();
            Ok(v.map(from_unix))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pid_syntax() {
        assert_eq!("lago/12".parse::<Pid>().unwrap(), Pid(12));
        assert_eq!(Pid(7).to_string(), "lago/7");
        for bad in ["lago/0", "lago/007", "lago/+7", "lago/", "hdl/1", "lago/1x"] {
            assert!(bad.parse::<Pid>().is_err(), "{bad}");
        }
    }

    #[test]
    fn filenames() {
        for ok in ["run.dat", "a b.png", "ñ.txt", "..x"] {
            check_filename(ok).unwrap();
        }
        for bad in ["", ".", "..", "a/b", "a\\b", " x", "a\nb"] {
            assert!(check_filename(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn tokens() {
        assert_eq!("CC-BY-NC-SA".parse::<License>().unwrap(), License::CcByNcSa);
        assert_eq!("postprocessed".parse::<Role>().unwrap(), Role::Postprocessed);
        assert!("cc-by".parse::<License>().is_err());
        check_media_type("application/octet-stream").unwrap();
        assert!(check_media_type("text").is_err());
    }
}
