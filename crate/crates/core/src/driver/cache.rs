use std::fs::{self, File, OpenOptions};
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::metadata::{resolve_entry, MetadataEntry, ResolutionMetadata};
use super::DriverError;
use crate::browser::{BrowserKind, Platform, VersionString};
use crate::http::{HttpRequest, HttpTransport};

/// A driver binary ready to launch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DriverArtifact {
    pub kind: BrowserKind,
    pub driver_version: VersionString,
    pub platform: Platform,
    pub cache_path: PathBuf,
    /// False for OS-provided drivers that are not managed by the cache.
    pub executable: bool,
}

/// `<root>/<driver_name>/<platform>/<driver_version>/<binary>`
pub fn cache_path(root: &Path, kind: BrowserKind, platform: Platform, version: &VersionString) -> PathBuf {
    root.join(kind.driver_name())
        .join(platform.name())
        .join(version.raw())
        .join(platform.binary_name(kind.driver_name()))
}

fn system_driver(kind: BrowserKind, platform: Platform, version: VersionString) -> DriverArtifact {
    let cache_path = match kind {
        BrowserKind::Safari => PathBuf::from("/usr/bin/safaridriver"),
        _ => PathBuf::from(platform.binary_name(kind.driver_name())),
    };
    DriverArtifact { kind, driver_version: version, platform, cache_path, executable: false }
}

fn is_executable(path: &Path) -> bool {
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::metadata(path).map(|m| m.is_file() && m.permissions().mode() & 0o111 != 0).unwrap_or(false)
    }
    #[cfg(not(unix))]
    {
        path.is_file()
    }
}

fn mark_executable(path: &Path) -> std::io::Result<()> {
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(path, fs::Permissions::from_mode(0o755))
    }
    #[cfg(not(unix))]
    {
        let _ = path;
        Ok(())
    }
}

/// Pull the file named `binary` out of a zip, tar.gz or tar archive.
fn extract_binary(archive: &[u8], binary: &str) -> Result<Vec<u8>, DriverError> {
    let basename_matches = |name: &str| name.rsplit(['/', '\\']).next() == Some(binary);
    if archive.starts_with(b"PK\x03\x04") {
        let mut zip = zip::ZipArchive::new(Cursor::new(archive)).map_err(|e| DriverError::ArchiveFormat(e.to_string()))?;
        for i in 0..zip.len() {
            let mut file = zip.by_index(i).map_err(|e| DriverError::ArchiveFormat(e.to_string()))?;
            if file.is_file() && basename_matches(file.name()) {
                let mut out = Vec::new();
                file.read_to_end(&mut out).map_err(|e| DriverError::ArchiveFormat(e.to_string()))?;
                return Ok(out);
            }
        }
        Err(DriverError::ArchiveFormat(format!("`{binary}` not found in zip archive")))
    } else if archive.starts_with(&[0x1f, 0x8b]) {
        let decoder = flate2::read::GzDecoder::new(archive);
        extract_from_tar(tar::Archive::new(decoder), binary, &basename_matches)
    } else if archive.len() > 262 && &archive[257..262] == b"ustar" {
        extract_from_tar(tar::Archive::new(archive), binary, &basename_matches)
    } else {
        Err(DriverError::ArchiveFormat("unrecognized archive format".into()))
    }
}

fn extract_from_tar<R: Read>(
    mut archive: tar::Archive<R>,
    binary: &str,
    matches: &dyn Fn(&str) -> bool,
) -> Result<Vec<u8>, DriverError> {
    let fmt_err = |e: std::io::Error| DriverError::ArchiveFormat(e.to_string());
    for entry in archive.entries().map_err(fmt_err)? {
        let mut entry = entry.map_err(fmt_err)?;
        let name = entry.path().map_err(fmt_err)?.to_string_lossy().into_owned();
        if entry.header().entry_type().is_file() && matches(&name) {
            let mut out = Vec::new();
            entry.read_to_end(&mut out).map_err(fmt_err)?;
            return Ok(out);
        }
    }
    Err(DriverError::ArchiveFormat(format!("`{binary}` not found in tar archive")))
}

/// Make sure the driver for `entry` on `platform` is present in the cache.
///
/// A cache hit performs no network request. Concurrent callers targeting the
/// same path serialize on a lock file next to the version directory.
pub fn ensure_entry(
    entry: &MetadataEntry,
    meta: &ResolutionMetadata,
    cache_root: &Path,
    platform: Platform,
    transport: &dyn HttpTransport,
) -> Result<DriverArtifact, DriverError> {
    let kind = entry.browser;
    let version = entry.driver_version.clone();
    if kind.driver_is_system_provided() {
        return Ok(system_driver(kind, platform, version));
    }
    let target = cache_path(cache_root, kind, platform, &version);
    let artifact = DriverArtifact { kind, driver_version: version.clone(), platform, cache_path: target.clone(), executable: true };
    if is_executable(&target) {
        return Ok(artifact);
    }

    let version_dir = target.parent().expect("cache path has a parent").to_path_buf();
    let platform_dir = version_dir.parent().expect("version dir has a parent");
    fs::create_dir_all(platform_dir)?;
    let lock_path = platform_dir.join(format!(".{}.lock", version.raw()));
    let lock = OpenOptions::new().create(true).truncate(false).write(true).open(&lock_path)?;
    lock.lock()?;
    let outcome = (|| {
        if is_executable(&target) {
            return Ok(());
        }
        let download = meta.download_for(entry, platform)?;
        let archive = fetch(transport, &download.url)?;
        if let Some(expected) = &download.sha256 {
            let actual = hex::encode(Sha256::digest(&archive));
            if !actual.eq_ignore_ascii_case(expected) {
                return Err(DriverError::ChecksumMismatch { expected: expected.clone(), actual });
            }
        }
        let binary = extract_binary(&archive, &platform.binary_name(kind.driver_name()))?;
        install(&version_dir, &target, &binary)
    })();
    let _ = lock.unlock();
    if outcome.is_err() {
        let _ = fs::remove_dir(&version_dir);
    }
    outcome.map(|()| artifact)
}

fn fetch(transport: &dyn HttpTransport, url: &str) -> Result<Vec<u8>, DriverError> {
    let response = transport.send(&HttpRequest::get(url))?;
    if !response.is_success() {
        return Err(DriverError::HttpStatus { url: url.to_string(), status: response.status });
    }
    Ok(response.body)
}

fn install(version_dir: &Path, target: &Path, binary: &[u8]) -> Result<(), DriverError> {
    fs::create_dir_all(version_dir)?;
    let partial = version_dir.join(format!(".partial-{}", std::process::id()));
    let result = (|| -> std::io::Result<()> {
        let mut file = File::create(&partial)?;
        std::io::Write::write_all(&mut file, binary)?;
        file.sync_all()?;
        drop(file);
        mark_executable(&partial)?;
        fs::rename(&partial, target)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&partial);
    }
    result.map_err(DriverError::from)
}

/// Resolve the compatible driver for `browser_version` and make sure it is cached.
pub fn ensure_driver(
    kind: BrowserKind,
    browser_version: &VersionString,
    meta: &ResolutionMetadata,
    cache_root: &Path,
    platform: Platform,
    transport: &dyn HttpTransport,
) -> Result<DriverArtifact, DriverError> {
    if kind.driver_is_system_provided() {
        return Ok(system_driver(kind, platform, browser_version.clone()));
    }
    let entry = resolve_entry(kind, browser_version, meta)?;
    ensure_entry(entry, meta, cache_root, platform, transport)
}

/// Convenience bundle of the cache root, target platform and transport.
#[derive(Clone)]
pub struct DriverManager {
    pub cache_root: PathBuf,
    pub platform: Platform,
    transport: Arc<dyn HttpTransport>,
}

impl DriverManager {
    pub fn new(cache_root: impl Into<PathBuf>, platform: Platform, transport: Arc<dyn HttpTransport>) -> Self {
        DriverManager { cache_root: cache_root.into(), platform, transport }
    }

    pub fn ensure(
        &self,
        kind: BrowserKind,
        browser_version: &VersionString,
        meta: &ResolutionMetadata,
    ) -> Result<DriverArtifact, DriverError> {
        ensure_driver(kind, browser_version, meta, &self.cache_root, self.platform, self.transport.as_ref())
    }
}
