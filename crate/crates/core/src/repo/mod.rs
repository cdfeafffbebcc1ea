//! The repository: hierarchy, items and their files, on disk under one data
//! directory.
//!
//! ```text
//! <data>/store/repo.db     metadata store
//! <data>/assetstore/       content-addressed blobs
//! <data>/outbox/           spooled notification messages
//! ```

pub mod blob;
mod export;
mod hierarchy;
mod item;

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub use blob::{BlobStore, StoredBlob};
pub use export::{read_export_dir, ExportedFile, ExportedItem};
pub use hierarchy::{HierarchyNode, NodeId, NodeKind, SetSpec};
pub use item::{Bitstream, Content, Item, ItemQuery, License, NewFile, Pid, Role};

use crate::clock::{Clock, Timestamp};
use crate::error::Result;
use crate::store::Store;

/// Named points inside a deposit where a fault hook runs, in the order
/// they are reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Checkpoint {
    BeforeBlob(usize),
    AfterBlob(usize),
    TxnBegun,
    PidMinted,
    ItemRow,
    BitstreamRow(usize),
    BeforeCommit,
    Committed,
}

impl fmt::Display for Checkpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Checkpoint::BeforeBlob(i) => write!(f, "before-blob-{i}"),
            Checkpoint::AfterBlob(i) => write!(f, "after-blob-{i}"),
            Checkpoint::TxnBegun => f.write_str("txn-begun"),
            Checkpoint::PidMinted => f.write_str("pid-minted"),
            Checkpoint::ItemRow => f.write_str("item-row"),
            Checkpoint::BitstreamRow(i) => write!(f, "bitstream-row-{i}"),
            Checkpoint::BeforeCommit => f.write_str("before-commit"),
            Checkpoint::Committed => f.write_str("committed"),
        }
    }
}

pub type FaultHook = Arc<dyn Fn(Checkpoint) + Send + Sync>;

#[derive(Clone, Default)]
pub struct RepoOptions {
    /// fsync blobs and commits. Off only for throwaway test repositories.
    pub no_sync: bool,
    pub fault_hook: Option<FaultHook>,
}

pub struct Repository {
    root: PathBuf,
    store: Store,
    blobs: BlobStore,
    clock: Arc<dyn Clock>,
    hook: Option<FaultHook>,
}

impl Repository {
    /// Opens the repository under `root`, creating directories as needed.
    pub fn open(root: &Path, clock: Arc<dyn Clock>, options: RepoOptions) -> Result<Self> {
        let sync = !options.no_sync;
        std::fs::create_dir_all(root.join("store"))?;
        std::fs::create_dir_all(root.join("outbox"))?;
        let store = Store::open(&root.join("store").join("repo.db"), sync)?;
        let blobs = BlobStore::open(root.join("assetstore"), sync)?;
        Ok(Repository {
            root: root.to_path_buf(),
            store,
            blobs,
            clock,
            hook: options.fault_hook,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn blobs(&self) -> &BlobStore {
        &self.blobs
    }

    pub fn outbox_dir(&self) -> PathBuf {
        self.root.join("outbox")
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    fn checkpoint(&self, at: Checkpoint) {
        if let Some(hook) = &self.hook {
            hook(at);
        }
    }
}

impl fmt::Debug for Repository {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Repository").field("root", &self.root).finish_non_exhaustive()
    }
}

/// Result of an integrity sweep.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub checked: usize,
    /// Blobs whose content no longer hashes to their address.
    pub corrupt: Vec<String>,
    /// Addresses referenced by bitstreams but absent from the assetstore.
    pub missing: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.corrupt.is_empty() && self.missing.is_empty()
    }
}

impl Repository {
    pub fn verify(&self) -> Result<VerifyReport> {
        let (checked, corrupt) = self.blobs.sweep()?;
        let referenced: Vec<String> = self.store.read(|c| {
            let mut stmt = c.prepare("SELECT DISTINCT sha256 FROM bitstreams ORDER BY sha256")?;
            let rows = stmt.query_map([], |r| r.get(0))?;
            Ok(rows.collect::<Result<_, _>>()?)
        })?;
        let missing = referenced.into_iter().filter(|a| !self.blobs.contains(a)).collect();
        Ok(VerifyReport {
            checked,
            corrupt,
            missing,
        })
    }
}
