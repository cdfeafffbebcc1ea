use crate::metadata::ValidationReport;

/// Every failure the repository reports. [`Error::code`] is the stable,
/// machine-readable name used on the wire and in CLI error lines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("slug {0:?} already used under this parent")]
    DuplicateSlug(String),
    #[error("{0}")]
    BadParentKind(String),
    #[error("{0}")]
    BadNode(String),
    #[error("no hierarchy node {0}")]
    UnknownNode(String),
    #[error("no set {0:?}")]
    UnknownSet(String),
    #[error("no item {0}")]
    UnknownPid(String),
    #[error("item {0} is already withdrawn")]
    AlreadyWithdrawn(String),
    #[error("item {0} is withdrawn")]
    ItemWithdrawn(String),
    #[error("item has no bitstream {0}")]
    UnknownBitstream(u32),
    #[error("record failed validation: {0}")]
    ValidationFailed(ValidationReport),
    #[error("{0} items need at least one file")]
    NoBitstreams(String),
    #[error("bad filename {0:?}")]
    InvalidFilename(String),
    #[error("{0}")]
    BadBitstream(String),
    #[error("no blob {0}")]
    UnknownAddress(String),
    #[error("content of {address} does not match its checksum")]
    ChecksumMismatch { address: String },
    #[error("{0}: size does not match the declared size")]
    SizeMismatch(String),
    #[error("storage failure: {0}")]
    StorageFailure(String),

    #[error("missing or unknown token")]
    Unauthorized,
    #[error("{0}")]
    Forbidden(String),
    #[error("cannot read {0}")]
    Unreadable(String),
    #[error("{0}")]
    BadManifest(String),

    #[error("unknown browse criterion {0:?}")]
    UnknownCriterion(String),
    #[error("invalid email address {0:?}")]
    InvalidEmail(String),
    #[error("interval start is after its end")]
    BadInterval,
    #[error("already subscribed")]
    DuplicateSubscription,

    #[error("peer {0:?} already registered")]
    DuplicatePeer(String),
    #[error("no peer {0:?}")]
    UnknownPeer(String),
    #[error("{0}")]
    BadUrl(String),
    #[error("peer unreachable: {0}")]
    PeerUnreachable(String),
    #[error("protocol error on page {page}: {message}")]
    ProtocolError { page: u32, message: String },
    #[error("peer rejected resumption token on page {page}")]
    BadToken { page: u32 },
    #[error("no watermark for {0:?}; run a full harvest first")]
    NoWatermark(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::DuplicateSlug(_) => "DuplicateSlug",
            Error::BadParentKind(_) => "BadParentKind",
            Error::BadNode(_) => "BadNode",
            Error::UnknownNode(_) => "UnknownNode",
            Error::UnknownSet(_) => "UnknownSet",
            Error::UnknownPid(_) => "UnknownPid",
            Error::AlreadyWithdrawn(_) => "AlreadyWithdrawn",
            Error::ItemWithdrawn(_) => "ItemWithdrawn",
            Error::UnknownBitstream(_) => "UnknownBitstream",
            Error::ValidationFailed(_) => "ValidationFailed",
            Error::NoBitstreams(_) => "NoBitstreams",
            Error::InvalidFilename(_) => "InvalidFilename",
            Error::BadBitstream(_) => "BadBitstream",
            Error::UnknownAddress(_) => "UnknownAddress",
            Error::ChecksumMismatch { .. } => "ChecksumMismatch",
            Error::SizeMismatch(_) => "SizeMismatch",
            Error::StorageFailure(_) => "StorageFailure",
            Error::Unauthorized => "Unauthorized",
            Error::Forbidden(_) => "Forbidden",
            Error::Unreadable(_) => "Unreadable",
            Error::BadManifest(_) => "BadManifest",
            Error::UnknownCriterion(_) => "UnknownCriterion",
            Error::InvalidEmail(_) => "InvalidEmail",
            Error::BadInterval => "BadInterval",
            Error::DuplicateSubscription => "DuplicateSubscription",
            Error::DuplicatePeer(_) => "DuplicatePeer",
            Error::UnknownPeer(_) => "UnknownPeer",
            Error::BadUrl(_) => "BadUrl",
            Error::PeerUnreachable(_) => "PeerUnreachable",
            Error::ProtocolError { .. } => "ProtocolError",
            Error::BadToken { .. } => "BadToken",
            Error::NoWatermark(_) => "NoWatermark",
        }
    }
}

impl From<rusqlite::Error> for Error {
    fn from(e: rusqlite::Error) -> Self {
        Error::StorageFailure(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::StorageFailure(e.to_string())
    }
}
