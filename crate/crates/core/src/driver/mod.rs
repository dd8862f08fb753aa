//! Driver management: detect the installed browser version, map it to a
//! compatible driver release, and download that driver into a local cache.

mod cache;
mod metadata;
mod probe;

use thiserror::Error;

use crate::browser::BrowserKind;
use crate::http::TransportError;

pub use cache::{cache_path, ensure_driver, ensure_entry, DriverArtifact, DriverManager};
pub use metadata::{
    load_metadata, mismatch_diagnosis, resolve_driver_version, resolve_entry, Compatibility, Download,
    MetadataEntry, MetadataSource, ResolutionMetadata,
};
pub use probe::{detect_browser_version, parse_version_output, BrowserProbe, CommandProbe, FixedProbe};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("probing {kind} failed: {reason}")]
    Probe { kind: BrowserKind, reason: String },
    #[error("{kind} is not installed")]
    BrowserNotFound { kind: BrowserKind },
    #[error("no {kind} driver known for browser major {major} or below")]
    Unresolved { kind: BrowserKind, major: u64 },
    #[error("invalid driver metadata from {source_name}: {reason}")]
    Metadata { source_name: String, reason: String },
    #[error("no download URL for {driver} {version} on {platform}")]
    NoDownloadUrl { driver: String, version: String, platform: String },
    #[error("download failed: {0}")]
    Network(#[from] TransportError),
    #[error("download of {url} returned HTTP {status}")]
    HttpStatus { url: String, status: u16 },
    #[error("archive format error: {0}")]
    ArchiveFormat(String),
    #[error("checksum mismatch: expected {expected}, got {actual}")]
    ChecksumMismatch { expected: String, actual: String },
    #[error("driver cache I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for DriverError {
    fn from(e: std::io::Error) -> Self {
        DriverError::Io(e.to_string())
    }
}
