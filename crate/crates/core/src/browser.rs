//! Browser identity, dotted versions and driver platforms.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A browser family that can be driven through WebDriver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BrowserKind {
    Chrome,
    Firefox,
    Edge,
    Opera,
    Safari,
    Chromium,
    Iexplorer,
}

impl BrowserKind {
    pub const ALL: [BrowserKind; 7] = [
        BrowserKind::Chrome,
        BrowserKind::Firefox,
        BrowserKind::Edge,
        BrowserKind::Opera,
        BrowserKind::Safari,
        BrowserKind::Chromium,
        BrowserKind::Iexplorer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BrowserKind::Chrome => "chrome",
            BrowserKind::Firefox => "firefox",
            BrowserKind::Edge => "edge",
            BrowserKind::Opera => "opera",
            BrowserKind::Safari => "safari",
            BrowserKind::Chromium => "chromium",
            BrowserKind::Iexplorer => "iexplorer",
        }
    }

    /// Name of the driver binary that controls this browser.
    pub fn driver_name(self) -> &'static str {
        match self {
            BrowserKind::Chrome | BrowserKind::Chromium => "chromedriver",
            BrowserKind::Firefox => "geckodriver",
            BrowserKind::Edge => "msedgedriver",
            BrowserKind::Opera => "operadriver",
            BrowserKind::Safari => "safaridriver",
            BrowserKind::Iexplorer => "IEDriverServer",
        }
    }

    /// Safari and Internet Explorer ship their drivers with the OS.
    pub fn driver_is_system_provided(self) -> bool {
        matches!(self, BrowserKind::Safari | BrowserKind::Iexplorer)
    }

    /// The W3C `browserName` capability value.
    pub fn capability_name(self) -> &'static str {
        match self {
            BrowserKind::Chrome | BrowserKind::Chromium => "chrome",
            BrowserKind::Firefox => "firefox",
            BrowserKind::Edge => "MicrosoftEdge",
            BrowserKind::Opera => "opera",
            BrowserKind::Safari => "safari",
            BrowserKind::Iexplorer => "internet explorer",
        }
    }

    /// Kinds with container images.
    pub fn dockerizable(self) -> bool {
        matches!(
            self,
            BrowserKind::Chrome | BrowserKind::Firefox | BrowserKind::Edge | BrowserKind::Opera
        )
    }
}

impl fmt::Display for BrowserKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown browser kind `{0}`")]
pub struct UnknownBrowserKind(pub String);

impl FromStr for BrowserKind {
    type Err = UnknownBrowserKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BrowserKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownBrowserKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid version string `{0}`")]
pub struct InvalidVersion(pub String);

/// Dotted numeric version such as `91.0.4472.114`.
///
/// Ordering and equality are segment-wise; the raw text is kept for display.
#[derive(Debug, Clone)]
pub struct VersionString {
    segments: Vec<u64>,
    raw: String,
}

impl VersionString {
    pub fn parse(text: &str) -> Result<Self, InvalidVersion> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(InvalidVersion(text.to_string()));
        }
        let segments = trimmed
            .split('.')
            .map(|s| {
                if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(InvalidVersion(text.to_string()));
                }
                s.parse::<u64>().map_err(|_| InvalidVersion(text.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(VersionString { segments, raw: trimmed.to_string() })
    }

    pub fn from_segments(segments: Vec<u64>) -> Self {
        assert!(!segments.is_empty(), "a version needs at least one segment");
        let raw = segments.iter().map(u64::to_string).collect::<Vec<_>>().join(".");
        VersionString { segments, raw }
    }

    pub fn major(&self) -> u64 {
        self.segments[0]
    }

    pub fn segments(&self) -> &[u64] {
        &self.segments
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }
}

impl PartialEq for VersionString {
    fn eq(&self, other: &Self) -> bool {
        self.segments == other.segments
    }
}

impl Eq for VersionString {}

impl Hash for VersionString {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.segments.hash(state);
    }
}

impl PartialOrd for VersionString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for VersionString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.segments.cmp(&other.segments)
    }
}

impl fmt::Display for VersionString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl FromStr for VersionString {
    type Err = InvalidVersion;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VersionString::parse(s)
    }
}

impl Serialize for VersionString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.raw)
    }
}

impl<'de> Deserialize<'de> for VersionString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        VersionString::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Operating system and architecture a driver binary is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Platform {
    #[serde(rename = "linux-x64")]
    LinuxX64,
    #[serde(rename = "mac-x64")]
    MacX64,
    #[serde(rename = "mac-arm64")]
    MacArm64,
    #[serde(rename = "win-x64")]
    WinX64,
    #[serde(rename = "win-x86")]
    WinX86,
}

impl Platform {
    pub const ALL: [Platform; 5] =
        [Platform::LinuxX64, Platform::MacX64, Platform::MacArm64, Platform::WinX64, Platform::WinX86];

    pub fn name(self) -> &'static str {
        match self {
            Platform::LinuxX64 => "linux-x64",
            Platform::MacX64 => "mac-x64",
            Platform::MacArm64 => "mac-arm64",
            Platform::WinX64 => "win-x64",
            Platform::WinX86 => "win-x86",
        }
    }

    pub fn is_windows(self) -> bool {
        matches!(self, Platform::WinX64 | Platform::WinX86)
    }

    /// File name of a driver binary on this platform.
    pub fn binary_name(self, driver: &str) -> String {
        if self.is_windows() {
            format!("{driver}.exe")
        } else {
            driver.to_string()
        }
    }

    /// Platform of the running process, if it is one drivers are published for.
    pub fn current() -> Option<Platform> {
        match (std::env::consts::OS, std::env::consts::ARCH) {
            ("linux", "x86_64") => Some(Platform::LinuxX64),
            ("macos", "x86_64") => Some(Platform::MacX64),
            ("macos", "aarch64") => Some(Platform::MacArm64),
            ("windows", "x86_64") => Some(Platform::WinX64),
            ("windows", "x86") => Some(Platform::WinX86),
            _ => None,
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Platform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Platform::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown platform `{s}`"))
    }
}
