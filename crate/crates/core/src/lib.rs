pub mod clock;
pub mod discovery;
pub mod error;
pub mod harvester;
pub mod ingest;
pub mod metadata;
pub mod oai;
pub mod repo;
pub mod store;
pub mod xmlutil;

pub use error::{Error, Result};
