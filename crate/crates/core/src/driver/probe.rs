use std::collections::HashMap;
use std::io::ErrorKind;
use std::path::PathBuf;
use std::process::Command;
use std::sync::OnceLock;

use regex::Regex;

use super::DriverError;
use crate::browser::{BrowserKind, Platform, VersionString};

/// Source of the raw version text of an installed browser.
///
/// `Ok(None)` means the browser is not installed; `Err` means the probe ran
/// but the installation looks broken.
pub trait BrowserProbe: Send + Sync {
    fn version_output(&self, kind: BrowserKind) -> Result<Option<String>, String>;
}

/// Extract the first dotted version number from probe output.
pub fn parse_version_output(text: &str) -> Option<VersionString> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"\b(\d+(?:\.\d+)+)\b").unwrap());
    re.captures(text).and_then(|c| VersionString::parse(&c[1]).ok())
}

pub fn detect_browser_version(
    kind: BrowserKind,
    probe: &dyn BrowserProbe,
) -> Result<Option<VersionString>, DriverError> {
    match probe.version_output(kind).map_err(|reason| DriverError::Probe { kind, reason })? {
        None => Ok(None),
        Some(output) => parse_version_output(&output)
            .map(Some)
            .ok_or_else(|| DriverError::Probe { kind, reason: format!("unrecognized version output `{}`", output.trim()) }),
    }
}

/// Probe answering from a fixed table; kinds absent from the table are not installed.
#[derive(Debug, Clone, Default)]
pub struct FixedProbe {
    outputs: HashMap<BrowserKind, Result<String, String>>,
}

impl FixedProbe {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_output(mut self, kind: BrowserKind, output: &str) -> Self {
        self.outputs.insert(kind, Ok(output.to_string()));
        self
    }

    pub fn with_failure(mut self, kind: BrowserKind, reason: &str) -> Self {
        self.outputs.insert(kind, Err(reason.to_string()));
        self
    }
}

impl BrowserProbe for FixedProbe {
    fn version_output(&self, kind: BrowserKind) -> Result<Option<String>, String> {
        match self.outputs.get(&kind) {
            None => Ok(None),
            Some(Ok(s)) => Ok(Some(s.clone())),
            Some(Err(e)) => Err(e.clone()),
        }
    }
}

/// Runs the platform's version command for each browser.
///
/// Linux and macOS invoke the browser binary with `--version`; Windows reads
/// the product version of the executable through PowerShell.
#[derive(Debug, Clone)]
pub struct CommandProbe {
    platform: Platform,
    overrides: HashMap<BrowserKind, PathBuf>,
}

impl CommandProbe {
    pub fn new(platform: Platform) -> Self {
        CommandProbe { platform, overrides: HashMap::new() }
    }

    /// Probe a specific binary for `kind` instead of the well-known locations.
    pub fn with_binary(mut self, kind: BrowserKind, path: impl Into<PathBuf>) -> Self {
        self.overrides.insert(kind, path.into());
        self
    }

    fn candidates(&self, kind: BrowserKind) -> Vec<String> {
        if let Some(p) = self.overrides.get(&kind) {
            return vec![p.display().to_string()];
        }
        let list: &[&str] = match (self.platform, kind) {
            (Platform::LinuxX64, BrowserKind::Chrome) => &["google-chrome", "google-chrome-stable"],
            (Platform::LinuxX64, BrowserKind::Chromium) => &["chromium", "chromium-browser"],
            (Platform::LinuxX64, BrowserKind::Firefox) => &["firefox"],
            (Platform::LinuxX64, BrowserKind::Edge) => &["microsoft-edge", "microsoft-edge-stable"],
            (Platform::LinuxX64, BrowserKind::Opera) => &["opera"],
            (Platform::MacX64 | Platform::MacArm64, BrowserKind::Chrome) => {
                &["/Applications/Google Chrome.app/Contents/MacOS/Google Chrome"]
            }
            (Platform::MacX64 | Platform::MacArm64, BrowserKind::Chromium) => {
                &["/Applications/Chromium.app/Contents/MacOS/Chromium"]
            }
            (Platform::MacX64 | Platform::MacArm64, BrowserKind::Firefox) => {
                &["/Applications/Firefox.app/Contents/MacOS/firefox"]
            }
            (Platform::MacX64 | Platform::MacArm64, BrowserKind::Edge) => {
                &["/Applications/Microsoft Edge.app/Contents/MacOS/Microsoft Edge"]
            }
            (Platform::MacX64 | Platform::MacArm64, BrowserKind::Opera) => {
                &["/Applications/Opera.app/Contents/MacOS/Opera"]
            }
            (Platform::MacX64 | Platform::MacArm64, BrowserKind::Safari) => {
                &["/Applications/Safari.app/Contents/MacOS/Safari"]
            }
            (Platform::WinX64 | Platform::WinX86, BrowserKind::Chrome) => {
                &[r"C:\Program Files\Google\Chrome\Application\chrome.exe"]
            }
            (Platform::WinX64 | Platform::WinX86, BrowserKind::Firefox) => {
                &[r"C:\Program Files\Mozilla Firefox\firefox.exe"]
            }
            (Platform::WinX64 | Platform::WinX86, BrowserKind::Edge) => {
                &[r"C:\Program Files (x86)\Microsoft\Edge\Application\msedge.exe"]
            }
            (Platform::WinX64 | Platform::WinX86, BrowserKind::Iexplorer) => {
                &[r"C:\Program Files\Internet Explorer\iexplore.exe"]
            }
            _ => &[],
        };
        list.iter().map(|s| s.to_string()).collect()
    }

    fn run(&self, binary: &str) -> std::io::Result<std::process::Output> {
        if self.platform.is_windows() {
            if !std::path::Path::new(binary).exists() {
                return Err(std::io::Error::from(ErrorKind::NotFound));
            }
            let script = format!("(Get-Item '{binary}').VersionInfo.ProductVersion");
            Command::new("powershell").args(["-NoProfile", "-Command", &script]).output()
        } else {
            Command::new(binary).arg("--version").output()
        }
    }
}

impl BrowserProbe for CommandProbe {
    fn version_output(&self, kind: BrowserKind) -> Result<Option<String>, String> {
        if kind == BrowserKind::Safari && !matches!(self.platform, Platform::MacX64 | Platform::MacArm64) {
            return Ok(None);
        }
        for binary in self.candidates(kind) {
            match self.run(&binary) {
                Err(e) if e.kind() == ErrorKind::NotFound => continue,
                Err(e) => return Err(format!("{binary}: {e}")),
                Ok(out) if !out.status.success() => {
                    return Err(format!("{binary} exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr).trim()))
                }
                Ok(out) => return Ok(Some(String::from_utf8_lossy(&out.stdout).into_owned())),
            }
        }
        Ok(None)
    }
}
