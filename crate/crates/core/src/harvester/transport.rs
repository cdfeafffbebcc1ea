//! How harvest requests reach a peer.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use crate::oai::{self, OaiConfig};
use crate::repo::Repository;

/// A failed exchange worth retrying.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct TransportError(pub String);

pub trait Transport: Send + Sync {
    /// Sends one protocol request to the endpoint at `base_url` and returns
    /// the response body.
    fn fetch(&self, base_url: &str, args: &[(String, String)]) -> Result<String, TransportError>;
}

/// Plain HTTP GET.
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(true)
            .build();
        HttpTransport { agent: config.into() }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        HttpTransport::new(Duration::from_secs(60))
    }
}

impl Transport for HttpTransport {
    fn fetch(&self, base_url: &str, args: &[(String, String)]) -> Result<String, TransportError> {
        let pairs = args.iter().map(|(k, v)| (k.as_str(), v.as_str()));
        let mut resp = self
            .agent
            .get(base_url)
            .query_pairs(pairs)
            .call()
            .map_err(|e| TransportError(e.to_string()))?;
        resp.body_mut().read_to_string().map_err(|e| TransportError(e.to_string()))
    }
}

/// Peers living in this process, keyed by endpoint URL.
#[derive(Default, Clone)]
pub struct LocalTransport {
    peers: Arc<RwLock<HashMap<String, (Arc<Repository>, OaiConfig)>>>,
}

impl LocalTransport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Serves `repo` at `cfg.endpoint()`.
    pub fn add(&self, repo: Arc<Repository>, cfg: OaiConfig) {
        self.peers.write().expect("peer table").insert(cfg.endpoint(), (repo, cfg));
    }
}

impl Transport for LocalTransport {
    fn fetch(&self, base_url: &str, args: &[(String, String)]) -> Result<String, TransportError> {
        let peers = self.peers.read().expect("peer table");
        let (repo, cfg) = peers
            .get(base_url)
            .ok_or_else(|| TransportError(format!("connection refused: {base_url}")))?;
        Ok(oai::handle(repo, cfg, args))
    }
}
