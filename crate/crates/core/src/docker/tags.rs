use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::DockerError;
use crate::browser::{BrowserKind, VersionString};
use crate::config::{keys, ConfigError, ConfigStore};
use crate::http::{HttpRequest, HttpTransport};

/// Which browser build a container should run.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum VersionSelector {
    Latest,
    /// `latest-k`: the k-th distinct major below the latest one.
    LatestMinus(u32),
    Beta,
    Dev,
    Fixed(VersionString),
}

impl FromStr for VersionSelector {
    type Err = DockerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let invalid = || DockerError::InvalidSelector(s.to_string());
        match s {
            "latest" => Ok(VersionSelector::Latest),
            "beta" => Ok(VersionSelector::Beta),
            "dev" => Ok(VersionSelector::Dev),
            _ => {
                if let Some(k) = s.strip_prefix("latest-") {
                    if k.is_empty() || !k.bytes().all(|b| b.is_ascii_digit()) {
                        return Err(invalid());
                    }
                    let k: u32 = k.parse().map_err(|_| invalid())?;
                    if k == 0 {
                        return Err(invalid());
                    }
                    Ok(VersionSelector::LatestMinus(k))
                } else {
                    VersionString::parse(s).map(VersionSelector::Fixed).map_err(|_| invalid())
                }
            }
        }
    }
}

impl fmt::Display for VersionSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VersionSelector::Latest => f.write_str("latest"),
            VersionSelector::LatestMinus(k) => write!(f, "latest-{k}"),
            VersionSelector::Beta => f.write_str("beta"),
            VersionSelector::Dev => f.write_str("dev"),
            VersionSelector::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for VersionSelector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for VersionSelector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImageFamily {
    Stable,
    BetaDev,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub repository: String,
    pub tag: String,
    pub family: ImageFamily,
}

impl ImageRef {
    pub fn name(&self) -> String {
        format!("{}:{}", self.repository, self.tag)
    }
}

/// Image repositories per browser family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Repositories {
    pub chrome: String,
    pub firefox: String,
    pub edge: String,
    pub opera: String,
    pub beta: String,
}

impl Default for Repositories {
    fn default() -> Self {
        Repositories::from_config(&ConfigStore::defaults()).expect("defaults are well typed")
    }
}

impl Repositories {
    pub fn from_config(config: &ConfigStore) -> Result<Self, ConfigError> {
        Ok(Repositories {
            chrome: config.string(keys::DOCKER_REPOSITORY_CHROME)?,
            firefox: config.string(keys::DOCKER_REPOSITORY_FIREFOX)?,
            edge: config.string(keys::DOCKER_REPOSITORY_EDGE)?,
            opera: config.string(keys::DOCKER_REPOSITORY_OPERA)?,
            beta: config.string(keys::DOCKER_REPOSITORY_BETA)?,
        })
    }

    pub fn stable(&self, kind: BrowserKind) -> Result<&str, DockerError> {
        match kind {
            BrowserKind::Chrome => Ok(&self.chrome),
            BrowserKind::Firefox => Ok(&self.firefox),
            BrowserKind::Edge => Ok(&self.edge),
            BrowserKind::Opera => Ok(&self.opera),
            other => Err(DockerError::UnsupportedKind(other)),
        }
    }

    /// Repository whose tags `selector` is resolved against.
    pub fn for_selector(&self, kind: BrowserKind, selector: &VersionSelector) -> Result<&str, DockerError> {
        match selector {
            VersionSelector::Beta | VersionSelector::Dev => {
                if !kind.dockerizable() {
                    return Err(DockerError::UnsupportedKind(kind));
                }
                Ok(&self.beta)
            }
            _ => self.stable(kind),
        }
    }
}

/// Tag naming of the beta/development image family.
pub fn prerelease_tag(kind: BrowserKind, selector: &VersionSelector) -> Option<&'static str> {
    match (kind, selector) {
        (BrowserKind::Chrome, VersionSelector::Beta) => Some("chrome_beta"),
        (BrowserKind::Chrome, VersionSelector::Dev) => Some("chrome_dev"),
        (BrowserKind::Firefox, VersionSelector::Beta) => Some("firefox_beta"),
        (BrowserKind::Firefox, VersionSelector::Dev) => Some("firefox_nightly"),
        _ => None,
    }
}

/// Pick the image tag for `selector` from the repository's tag list.
///
/// `latest` is the highest version-like tag. `latest-k` counts distinct majors
/// below the latest one and returns the highest tag of that major.
pub fn resolve_tag(
    kind: BrowserKind,
    selector: &VersionSelector,
    registry_tags: &[String],
    repositories: &Repositories,
) -> Result<ImageRef, DockerError> {
    let repository = repositories.for_selector(kind, selector)?.to_string();
    if let Some(tag) = match selector {
        VersionSelector::Beta | VersionSelector::Dev => {
            Some(prerelease_tag(kind, selector).ok_or(DockerError::PrereleaseUnavailable { kind, selector: selector.to_string() })?)
        }
        _ => None,
    } {
        if !registry_tags.iter().any(|t| t == tag) {
            return Err(DockerError::TagNotFound { repository, tag: tag.to_string() });
        }
        return Ok(ImageRef { repository, tag: tag.to_string(), family: ImageFamily::BetaDev });
    }

    let parsed: Vec<(VersionString, &String)> =
        registry_tags.iter().filter_map(|t| VersionString::parse(t).ok().map(|v| (v, t))).collect();
    let stable = |tag: &str| ImageRef { repository: repository.clone(), tag: tag.to_string(), family: ImageFamily::Stable };
    match selector {
        VersionSelector::Latest => parsed
            .iter()
            .max_by(|a, b| a.0.cmp(&b.0))
            .map(|(_, t)| stable(t))
            .ok_or_else(|| DockerError::TagNotFound { repository: repository.clone(), tag: "latest".into() }),
        VersionSelector::LatestMinus(k) => {
            let majors: BTreeSet<u64> = parsed.iter().map(|(v, _)| v.major()).collect();
            let wanted = majors.iter().rev().nth(*k as usize).copied().ok_or(DockerError::InsufficientHistory {
                repository: repository.clone(),
                requested: *k,
                majors: majors.len(),
            })?;
            let (_, tag) = parsed
                .iter()
                .filter(|(v, _)| v.major() == wanted)
                .max_by(|a, b| a.0.cmp(&b.0))
                .expect("major came from the parsed tags");
            Ok(stable(tag))
        }
        VersionSelector::Fixed(v) => parsed
            .iter()
            .find(|(p, _)| p == v)
            .map(|(_, t)| stable(t))
            .ok_or_else(|| DockerError::TagNotFound { repository: repository.clone(), tag: v.to_string() }),
        VersionSelector::Beta | VersionSelector::Dev => unreachable!("handled above"),
    }
}

/// Source of repository tag lists.
pub trait TagSource: Send + Sync {
    fn tags(&self, repository: &str) -> Result<Vec<String>, DockerError>;
}

/// Fixed tag lists, for tests and offline use.
#[derive(Debug, Clone, Default)]
pub struct StaticTags(pub HashMap<String, Vec<String>>);

impl StaticTags {
    pub fn with(mut self, repository: &str, tags: &[&str]) -> Self {
        self.0.insert(repository.to_string(), tags.iter().map(|s| s.to_string()).collect());
        self
    }
}

impl TagSource for StaticTags {
    fn tags(&self, repository: &str) -> Result<Vec<String>, DockerError> {
        self.0.get(repository).cloned().ok_or_else(|| DockerError::Registry(format!("no tags for {repository}")))
    }
}

/// Docker Hub style `/v2/repositories/<repo>/tags` listing, following `next` links.
#[derive(Clone)]
pub struct RegistryTags {
    transport: Arc<dyn HttpTransport>,
    base_url: String,
    max_pages: usize,
}

impl RegistryTags {
    pub fn new(transport: Arc<dyn HttpTransport>, base_url: &str) -> Self {
        RegistryTags { transport, base_url: base_url.trim_end_matches('/').to_string(), max_pages: 20 }
    }
}

impl TagSource for RegistryTags {
    fn tags(&self, repository: &str) -> Result<Vec<String>, DockerError> {
        let repo = if repository.contains('/') { repository.to_string() } else { format!("library/{repository}") };
        let mut url = Some(format!("{}/v2/repositories/{repo}/tags?page_size=100", self.base_url));
        let mut tags = Vec::new();
        let mut pages = 0;
        while let Some(current) = url.take() {
            pages += 1;
            let response = self.transport.send(&HttpRequest::get(current.clone()))?;
            if !response.is_success() {
                return Err(DockerError::Registry(format!("{current} returned HTTP {}", response.status)));
            }
            let body: Value = response.json().map_err(|e| DockerError::Registry(format!("{current}: {e}")))?;
            let results = body
                .get("results")
                .and_then(Value::as_array)
                .ok_or_else(|| DockerError::Registry(format!("{current}: missing `results`")))?;
            tags.extend(results.iter().filter_map(|r| r.get("name").and_then(Value::as_str)).map(str::to_string));
            if pages < self.max_pages {
                url = body.get("next").and_then(Value::as_str).map(str::to_string);
            }
        }
        if tags.is_empty() {
            return Err(DockerError::Registry(format!("repository {repository} has no tags")));
        }
        Ok(tags)
    }
}
