//! Item export directories: a `manifest` file plus the item's files.
//!
//! The manifest holds the metadata lines of the manifest format and one
//! line per file:
//!
//! ```text
//! bitstream = seq,filename,role,media_type,size,sha256,license
//! ```
//!
//! `license` may be empty. Filenames may contain commas; the other columns
//! may not.

use std::fs::{self, File};
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::item::{check_filename, check_media_type, Bitstream, Content, License, NewFile, Pid, Role};
use super::Repository;
use crate::error::{Error, Result};
use crate::metadata::manifest;
use crate::metadata::MetadataRecord;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportedFile {
    pub seq: u32,
    pub filename: String,
    pub role: Role,
    pub media_type: String,
    pub size: u64,
    pub sha256: String,
    pub license: Option<License>,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportedItem {
    pub record: MetadataRecord,
    pub files: Vec<ExportedFile>,
}

impl ExportedItem {
    pub fn into_new_files(self) -> (MetadataRecord, Vec<NewFile>) {
        let files = self
            .files
            .into_iter()
            .map(|f| NewFile {
                filename: f.filename,
                role: f.role,
                license: f.license,
                media_type: Some(f.media_type),
                content: Content::Path(f.path),
            })
            .collect();
        (self.record, files)
    }
}

pub fn bitstream_line(b: &Bitstream) -> String {
    let value = format!(
        "{},{},{},{},{},{},{}",
        b.seq,
        b.filename,
        b.role,
        b.media_type,
        b.size,
        b.checksum,
        b.license.map(License::as_str).unwrap_or("")
    );
    format!("bitstream = {}\n", manifest::escape(&value))
}

fn parse_bitstream(value: &str, dir: &Path) -> std::result::Result<ExportedFile, String> {
    let (seq, rest) = value.split_once(',').ok_or("too few columns")?;
    let mut tail: Vec<&str> = rest.rsplitn(6, ',').collect();
    if tail.len() != 6 {
        return Err("too few columns".into());
    }
    tail.reverse();
    let [filename, role, media_type, size, sha256, license] = tail[..] else {
        unreachable!()
    };
    check_filename(filename).map_err(|e| e.to_string())?;
    check_media_type(media_type).map_err(|e| e.to_string())?;
    if !super::blob::is_address(sha256) {
        return Err(format!("bad sha256 {sha256:?}"));
    }
    Ok(ExportedFile {
        seq: seq.trim().parse().map_err(|_| format!("bad seq {seq:?}"))?,
        filename: filename.to_string(),
        role: role.parse().map_err(|e: Error| e.to_string())?,
        media_type: media_type.to_string(),
        size: size.parse().map_err(|_| format!("bad size {size:?}"))?,
        sha256: sha256.to_string(),
        license: match license {
            "" => None,
            l => Some(l.parse().map_err(|e: Error| e.to_string())?),
        },
        path: dir.join(filename),
    })
}

/// Reads an export directory and checks every file against its declared
/// size and checksum.
pub fn read_export_dir(dir: &Path) -> Result<ExportedItem> {
    let text = fs::read_to_string(dir.join("manifest"))
        .map_err(|e| Error::Unreadable(format!("{}: {e}", dir.join("manifest").display())))?;
    let parsed = manifest::parse(&text).map_err(|e| Error::BadManifest(e.to_string()))?;
    let mut files = Vec::new();
    for (line, key, value) in parsed.extra {
        if key != "bitstream" {
            return Err(Error::BadManifest(format!("manifest line {line}: unknown key {key:?}")));
        }
        let file = parse_bitstream(&value, dir).map_err(|m| Error::BadManifest(format!("manifest line {line}: {m}")))?;
        files.push(file);
    }
    files.sort_by_key(|f| f.seq);
    if files.iter().enumerate().any(|(i, f)| f.seq as usize != i) {
        return Err(Error::BadManifest("bitstream seq values must run 0, 1, 2, ...".into()));
    }
    for f in &files {
        let mut file = File::open(&f.path).map_err(|e| Error::Unreadable(format!("{}: {e}", f.path.display())))?;
        let mut hasher = Sha256::new();
        let size = io::copy(&mut file, &mut hasher)?;
        if size != f.size {
            return Err(Error::SizeMismatch(f.filename.clone()));
        }
        if hex::encode(hasher.finalize()) != f.sha256 {
            return Err(Error::ChecksumMismatch {
                address: f.sha256.clone(),
            });
        }
    }
    Ok(ExportedItem {
        record: parsed.record,
        files,
    })
}

impl Repository {
    /// Writes `pid` as an export directory at `dir` (created if missing).
    pub fn export_item(&self, pid: Pid, dir: &Path) -> Result<()> {
        let item = self.item(pid)?;
        if item.withdrawn {
            return Err(Error::ItemWithdrawn(pid.to_string()));
        }
        fs::create_dir_all(dir)?;
        let mut text = format!("# {pid} in {}\n", item.set_spec);
        text.push_str(&manifest::format(&item.record));
        for b in &item.bitstreams {
            let bytes = self.blobs.get(&b.checksum)?;
            fs::write(dir.join(&b.filename), bytes)?;
            text.push_str(&bitstream_line(b));
        }
        fs::write(dir.join("manifest"), text)?;
        Ok(())
    }
}
