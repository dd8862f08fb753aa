use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::DriverError;
use crate::browser::{BrowserKind, Platform, VersionString};
use crate::http::{HttpRequest, HttpTransport};

/// One downloadable driver build.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Download {
    pub url: String,
    #[serde(default)]
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetadataEntry {
    pub browser: BrowserKind,
    pub browser_major: u64,
    pub driver_version: VersionString,
    /// URL template; may contain `{driver}`, `{version}`, `{major}` and `{platform}`.
    pub url: Option<String>,
    pub sha256: Option<String>,
    /// Per-platform downloads; take precedence over `url`.
    pub platforms: BTreeMap<String, Download>,
}

/// Driver release table keyed by (browser, browser major).
#[derive(Debug, Clone)]
pub struct ResolutionMetadata {
    pub source: String,
    pub entries: BTreeMap<(BrowserKind, u64), MetadataEntry>,
    pub download_template: Option<String>,
}

#[derive(Deserialize)]
struct RawDocument {
    schema: u32,
    #[serde(default)]
    download_template: Option<String>,
    entries: Vec<RawEntry>,
}

#[derive(Deserialize)]
struct RawEntry {
    browser: BrowserKind,
    browser_major: u64,
    driver_version: String,
    #[serde(default)]
    url: Option<String>,
    #[serde(default)]
    sha256: Option<String>,
    #[serde(default)]
    platforms: BTreeMap<String, Download>,
}

#[derive(Deserialize)]
struct CftDocument {
    milestones: BTreeMap<String, CftMilestone>,
}

#[derive(Deserialize)]
struct CftMilestone {
    milestone: String,
    version: String,
    #[serde(default)]
    downloads: BTreeMap<String, Vec<CftDownload>>,
}

#[derive(Deserialize)]
struct CftDownload {
    platform: String,
    url: String,
}

fn cft_platform(name: &str) -> Option<Platform> {
    match name {
        "linux64" => Some(Platform::LinuxX64),
        "mac-x64" => Some(Platform::MacX64),
        "mac-arm64" => Some(Platform::MacArm64),
        "win64" => Some(Platform::WinX64),
        "win32" => Some(Platform::WinX86),
        _ => None,
    }
}

impl ResolutionMetadata {
    pub fn empty(source: &str) -> Self {
        ResolutionMetadata { source: source.to_string(), entries: BTreeMap::new(), download_template: None }
    }

    /// Parse a metadata document.
    ///
    /// Accepts the versioned `{"schema": 1, "entries": [...]}` format and the
    /// public Chrome for Testing per-milestone document.
    pub fn from_json(text: &str, source: &str) -> Result<Self, DriverError> {
        let bad = |reason: String| DriverError::Metadata { source_name: source.to_string(), reason };
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if value.get("milestones").is_some() {
            let doc: CftDocument = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
            return Self::from_cft(doc, source);
        }
        let doc: RawDocument = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
        if doc.schema != 1 {
            return Err(bad(format!("unsupported schema version {}", doc.schema)));
        }
        let mut meta =
            ResolutionMetadata { source: source.to_string(), entries: BTreeMap::new(), download_template: doc.download_template };
        for (idx, raw) in doc.entries.into_iter().enumerate() {
            let driver_version = VersionString::parse(&raw.driver_version)
                .map_err(|e| bad(format!("entries[{idx}].driver_version: {e}")))?;
            for name in raw.platforms.keys() {
                name.parse::<Platform>().map_err(|e| bad(format!("entries[{idx}].platforms: {e}")))?;
            }
            let entry = MetadataEntry {
                browser: raw.browser,
                browser_major: raw.browser_major,
                driver_version,
                url: raw.url,
                sha256: raw.sha256,
                platforms: raw.platforms,
            };
            if meta.entries.insert((entry.browser, entry.browser_major), entry).is_some() {
                return Err(bad(format!("entries[{idx}] duplicates browser {} major {}", raw.browser, raw.browser_major)));
            }
        }
        Ok(meta)
    }

    fn from_cft(doc: CftDocument, source: &str) -> Result<Self, DriverError> {
        let bad = |reason: String| DriverError::Metadata { source_name: source.to_string(), reason };
        let mut meta = ResolutionMetadata::empty(source);
        for (key, m) in doc.milestones {
            let major: u64 = m.milestone.parse().map_err(|_| bad(format!("milestones.{key}: bad milestone")))?;
            let driver_version =
                VersionString::parse(&m.version).map_err(|e| bad(format!("milestones.{key}.version: {e}")))?;
            let Some(drivers) = m.downloads.get("chromedriver") else { continue };
            let platforms = drivers
                .iter()
                .filter_map(|d| {
                    cft_platform(&d.platform).map(|p| (p.name().to_string(), Download { url: d.url.clone(), sha256: None }))
                })
                .collect();
            meta.entries.insert(
                (BrowserKind::Chrome, major),
                MetadataEntry { browser: BrowserKind::Chrome, browser_major: major, driver_version, url: None, sha256: None, platforms },
            );
        }
        Ok(meta)
    }

    /// Download location and checksum for `entry` on `platform`.
    pub fn download_for(&self, entry: &MetadataEntry, platform: Platform) -> Result<Download, DriverError> {
        if let Some(d) = entry.platforms.get(platform.name()) {
            return Ok(d.clone());
        }
        let template = entry.url.as_ref().or(self.download_template.as_ref()).ok_or_else(|| DriverError::NoDownloadUrl {
            driver: entry.browser.driver_name().to_string(),
            version: entry.driver_version.to_string(),
            platform: platform.to_string(),
        })?;
        let url = template
            .replace("{driver}", entry.browser.driver_name())
            .replace("{version}", entry.driver_version.raw())
            .replace("{major}", &entry.browser_major.to_string())
            .replace("{platform}", platform.name());
        Ok(Download { url, sha256: entry.sha256.clone() })
    }
}

/// Where driver metadata comes from.
#[derive(Debug, Clone)]
pub enum MetadataSource {
    File(PathBuf),
    Url(String),
}

/// Load metadata; URL sources are cached under `cache_root/metadata` for `ttl`.
pub fn load_metadata(
    source: &MetadataSource,
    transport: &dyn HttpTransport,
    cache_root: &Path,
    ttl: Duration,
) -> Result<ResolutionMetadata, DriverError> {
    match source {
        MetadataSource::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| DriverError::Metadata {
                source_name: path.display().to_string(),
                reason: e.to_string(),
            })?;
            ResolutionMetadata::from_json(&text, &path.display().to_string())
        }
        MetadataSource::Url(url) => {
            let digest = hex::encode(Sha256::digest(url.as_bytes()));
            let cached = cache_root.join("metadata").join(format!("{}.json", &digest[..16]));
            if let Ok(modified) = std::fs::metadata(&cached).and_then(|m| m.modified()) {
                let age = SystemTime::now().duration_since(modified).unwrap_or_default();
                if age < ttl {
                    if let Ok(text) = std::fs::read_to_string(&cached) {
                        if let Ok(meta) = ResolutionMetadata::from_json(&text, url) {
                            return Ok(meta);
                        }
                    }
                }
            }
            let response = transport.send(&HttpRequest::get(url.clone()))?;
            if !response.is_success() {
                return Err(DriverError::HttpStatus { url: url.clone(), status: response.status });
            }
            let text = String::from_utf8(response.body)
                .map_err(|_| DriverError::Metadata { source_name: url.clone(), reason: "body is not UTF-8".into() })?;
            let meta = ResolutionMetadata::from_json(&text, url)?;
            if let Some(parent) = cached.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&cached, text)?;
            Ok(meta)
        }
    }
}

/// Metadata entry for the browser's major, or the nearest lower major that has one.
pub fn resolve_entry<'m>(
    kind: BrowserKind,
    browser_version: &VersionString,
    meta: &'m ResolutionMetadata,
) -> Result<&'m MetadataEntry, DriverError> {
    let major = browser_version.major();
    meta.entries
        .range((kind, 0)..=(kind, major))
        .next_back()
        .map(|(_, entry)| entry)
        .ok_or(DriverError::Unresolved { kind, major })
}

pub fn resolve_driver_version(
    kind: BrowserKind,
    browser_version: &VersionString,
    meta: &ResolutionMetadata,
) -> Result<VersionString, DriverError> {
    resolve_entry(kind, browser_version, meta).map(|e| e.driver_version.clone())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Compatibility {
    Ok,
    Mismatch(String),
}

/// Compare the browser major with the major a driver supports.
pub fn mismatch_diagnosis(browser_major: u64, driver_supported_major: u64) -> Compatibility {
    if browser_major == driver_supported_major {
        return Compatibility::Ok;
    }
    let direction = if browser_major > driver_supported_major { "older" } else { "newer" };
    Compatibility::Mismatch(format!(
        "this version of the driver only supports browser version {driver_supported_major}, \
         but the current browser version is {browser_major} (driver is {direction} than the browser); \
         re-run driver resolution to fetch a driver matching major {browser_major}"
    ))
}
