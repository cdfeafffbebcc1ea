//! Content-addressed file storage.
//!
//! A blob lives at `<root>/<aa>/<bb>/<sha256 hex>` where `aa` and `bb` are
//! the first two byte pairs of its digest. Writes go to `<root>/tmp` first
//! and are renamed into place, so a visible blob is always complete.

use std::fs::{self, File};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const EMPTY_SHA256: &str = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredBlob {
    /// Lowercase hex SHA-256; doubles as the content address.
    pub address: String,
    pub size: u64,
}

#[derive(Debug, Clone)]
pub struct BlobStore {
    root: PathBuf,
    sync: bool,
}

impl BlobStore {
    pub fn open(root: impl Into<PathBuf>, sync: bool) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("tmp"))?;
        Ok(BlobStore { root, sync })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, address: &str) -> PathBuf {
        self.root.join(&address[0..2]).join(&address[2..4]).join(address)
    }

    pub fn put(&self, content: &[u8]) -> Result<StoredBlob> {
        self.put_reader(content)
    }

    pub fn put_file(&self, path: &Path) -> Result<StoredBlob> {
        let file = File::open(path).map_err(|e| Error::Unreadable(format!("{}: {e}", path.display())))?;
        self.put_reader(file)
    }

    /// Streams `content` into the store, hashing as it goes.
    pub fn put_reader(&self, mut content: impl Read) -> Result<StoredBlob> {
        let mut tmp = tempfile::NamedTempFile::new_in(self.root.join("tmp"))?;
        let mut hasher = Sha256::new();
        let mut size = 0u64;
        let mut buf = vec![0u8; 64 * 1024];
        loop {
            let n = match content.read(&mut buf) {
                Ok(0) => break,
                Ok(n) => n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e.into()),
            };
            hasher.update(&buf[..n]);
            tmp.write_all(&buf[..n])?;
            size += n as u64;
        }
        if self.sync {
            tmp.as_file().sync_all()?;
        }
        let address = hex::encode(hasher.finalize());
        let dest = self.path_of(&address);
        if dest.exists() {
            // Identical content is already stored.
            return Ok(StoredBlob { address, size });
        }
        fs::create_dir_all(dest.parent().expect("sharded path"))?;
        tmp.persist(&dest).map_err(|e| Error::StorageFailure(e.to_string()))?;
        Ok(StoredBlob { address, size })
    }

    /// Reads a blob and checks it against its address.
    pub fn get(&self, address: &str) -> Result<Vec<u8>> {
        if !is_address(address) {
            return Err(Error::UnknownAddress(address.to_string()));
        }
        let bytes = match fs::read(self.path_of(address)) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(Error::UnknownAddress(address.to_string())),
            Err(e) => return Err(e.into()),
        };
        if hex::encode(Sha256::digest(&bytes)) != address {
            return Err(Error::ChecksumMismatch {
                address: address.to_string(),
            });
        }
        Ok(bytes)
    }

    pub fn contains(&self, address: &str) -> bool {
        is_address(address) && self.path_of(address).is_file()
    }

    /// Every stored address, sorted.
    pub fn addresses(&self) -> Result<Vec<String>> {
        let mut out = Vec::new();
        for a in read_dirs(&self.root)? {
            let name = a.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
            if name.len() != 2 || !a.is_dir() {
                continue;
            }
            for b in read_dirs(&a)? {
                if !b.is_dir() {
                    continue;
                }
                for f in read_dirs(&b)? {
                    if let Some(name) = f.file_name().and_then(|n| n.to_str()) {
                        if is_address(name) {
                            out.push(name.to_string());
                        }
                    }
                }
            }
        }
        out.sort();
        Ok(out)
    }

    /// Recomputes the digest of every stored blob; returns the addresses
    /// whose content no longer matches.
    pub fn sweep(&self) -> Result<(usize, Vec<String>)> {
        let addresses = self.addresses()?;
        let mut bad = Vec::new();
        for address in &addresses {
            let mut file = File::open(self.path_of(address))?;
            let mut hasher = Sha256::new();
            io::copy(&mut file, &mut hasher)?;
            if hex::encode(hasher.finalize()) != *address {
                bad.push(address.clone());
            }
        }
        Ok((addresses.len(), bad))
    }
}

pub fn is_address(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

fn read_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v = Vec::new();
    for entry in fs::read_dir(dir)? {
        v.push(entry?.path());
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn store() -> (tempfile::TempDir, BlobStore) {
        let dir = tempfile::tempdir().unwrap();
        let s = BlobStore::open(dir.path().join("assetstore"), false).unwrap();
        (dir, s)
    }

    #[test]
    fn empty_blob_address() {
        let (_d, s) = store();
        let b = s.put(b"").unwrap();
        assert_eq!(b.address, EMPTY_SHA256);
        assert_eq!(b.size, 0);
        assert!(s.path_of(EMPTY_SHA256).ends_with("e3/b0/".to_string() + EMPTY_SHA256));
    }

    #[test]
    fn identical_content_one_blob() {
        let (_d, s) = store();
        let a = s.put(b"same").unwrap();
        let b = s.put(b"same").unwrap();
        assert_eq!(a, b);
        assert_eq!(s.addresses().unwrap().len(), 1);
    }

    #[test]
    fn corruption_detected() {
        let (_d, s) = store();
        let b = s.put(b"muon counts").unwrap();
        let path = s.path_of(&b.address);
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] ^= 1;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(s.get(&b.address), Err(Error::ChecksumMismatch { .. })));
        assert_eq!(s.sweep().unwrap().1, vec![b.address]);
    }

    #[test]
    fn unknown_address() {
        let (_d, s) = store();
        assert!(matches!(s.get(EMPTY_SHA256), Err(Error::UnknownAddress(_))));
        assert!(matches!(s.get("../etc/passwd"), Err(Error::UnknownAddress(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn get_put_round_trip(x in proptest::collection::vec(any::<u8>(), 0..4096)) {
            let (_d, s) = store();
            let b = s.put(&x).unwrap();
            prop_assert_eq!(b.size as usize, x.len());
            prop_assert_eq!(s.get(&b.address).unwrap(), x);
        }
    }
}
