use std::collections::BTreeMap;
use std::path::PathBuf;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::HarnessError;
use crate::browser::BrowserKind;
use crate::docker::DockerBrowserSpec;
use crate::wire::Capabilities;

/// Where the browsers for a request come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Target {
    /// Installed browser, driven by a cached driver binary.
    Local { kind: BrowserKind },
    /// Existing WebDriver endpoint (a grid hub or a standalone driver).
    Remote { url: String, capabilities: Capabilities },
    Docker(DockerBrowserSpec),
    /// Whatever the `default.browser` / `default.version` keys say.
    Generic,
    /// A factory registered with the harness under `name`.
    Custom { name: String },
}

/// Browser-specific launch options merged into the vendor capability.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BrowserOptions {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub arguments: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub preferences: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extensions: Vec<PathBuf>,
}

impl BrowserOptions {
    pub fn is_empty(&self) -> bool {
        self.arguments.is_empty() && self.preferences.is_empty() && self.binary.is_none() && self.extensions.is_empty()
    }

    pub fn argument(mut self, arg: impl Into<String>) -> Self {
        self.arguments.push(arg.into());
        self
    }

    pub fn preference(mut self, key: impl Into<String>, value: Value) -> Self {
        self.preferences.insert(key.into(), value);
        self
    }
}

fn one() -> usize {
    1
}

fn is_one(n: &usize) -> bool {
    *n == 1
}

/// A test's declaration of the browsers it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrowserRequest {
    #[serde(flatten)]
    pub target: Target,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub count: usize,
    #[serde(default, skip_serializing_if = "BrowserOptions::is_empty")]
    pub options: BrowserOptions,
}

impl BrowserRequest {
    pub fn new(target: Target) -> Self {
        BrowserRequest { target, count: 1, options: BrowserOptions::default() }
    }

    pub fn local(kind: BrowserKind) -> Self {
        Self::new(Target::Local { kind })
    }

    pub fn remote(url: impl Into<String>, capabilities: Capabilities) -> Self {
        Self::new(Target::Remote { url: url.into(), capabilities })
    }

    pub fn docker(spec: DockerBrowserSpec) -> Self {
        Self::new(Target::Docker(spec))
    }

    pub fn generic() -> Self {
        Self::new(Target::Generic)
    }

    pub fn custom(name: impl Into<String>) -> Self {
        Self::new(Target::Custom { name: name.into() })
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    pub fn with_options(mut self, options: BrowserOptions) -> Self {
        self.options = options;
        self
    }

    /// Stable identity used to share fixtures between tests.
    pub fn cache_key(&self) -> String {
        serde_json::to_string(self).expect("requests serialize")
    }
}

/// Vendor capability key holding launch options for a `browserName`.
pub fn vendor_key(browser_name: &str) -> Option<&'static str> {
    match browser_name {
        "chrome" | "chromium" | "opera" => Some("goog:chromeOptions"),
        "MicrosoftEdge" | "msedge" => Some("ms:edgeOptions"),
        "firefox" => Some("moz:firefoxOptions"),
        _ => None,
    }
}

/// Merge `options` into the vendor capability of `caps`. Arguments are
/// appended after any already present; preferences are key-merged.
pub fn apply_options(caps: &mut Capabilities, options: &BrowserOptions) -> Result<(), HarnessError> {
    if options.is_empty() {
        return Ok(());
    }
    let key = vendor_key(&caps.browser_name).ok_or_else(|| {
        HarnessError::InvalidOption(format!("browser `{}` accepts no launch options", caps.browser_name))
    })?;
    let firefox = key == "moz:firefoxOptions";
    if firefox && !options.extensions.is_empty() {
        return Err(HarnessError::InvalidOption("firefox extensions must be installed after session start".into()));
    }
    let mut extensions = Vec::with_capacity(options.extensions.len());
    for path in &options.extensions {
        let bytes = std::fs::read(path)
            .map_err(|e| HarnessError::InvalidOption(format!("extension {}: {e}", path.display())))?;
        extensions.push(Value::String(base64::engine::general_purpose::STANDARD.encode(bytes)));
    }

    let mut vendor = caps.vendor_option(key).cloned().unwrap_or_else(|| json!({}));
    let obj = vendor
        .as_object_mut()
        .ok_or_else(|| HarnessError::InvalidOption(format!("`{key}` is not an object")))?;
    if !options.arguments.is_empty() {
        let args = obj.entry("args").or_insert_with(|| json!([]));
        let list = args.as_array_mut().ok_or_else(|| HarnessError::InvalidOption(format!("`{key}.args` is not a list")))?;
        list.extend(options.arguments.iter().cloned().map(Value::String));
    }
    if !options.preferences.is_empty() {
        let prefs = obj.entry("prefs").or_insert_with(|| json!({}));
        let map = prefs.as_object_mut().ok_or_else(|| HarnessError::InvalidOption(format!("`{key}.prefs` is not an object")))?;
        for (k, v) in &options.preferences {
            map.insert(k.clone(), v.clone());
        }
    }
    if let Some(binary) = &options.binary {
        obj.insert("binary".into(), Value::String(binary.display().to_string()));
    }
    if !extensions.is_empty() {
        if let Some(list) = obj.entry("extensions").or_insert_with(|| json!([])).as_array_mut() {
            list.extend(extensions);
        }
    }
    caps.set_vendor_option(key, vendor).map_err(|e| HarnessError::InvalidOption(e.to_string()))
}

/// Base capabilities for a browser kind with `options` applied.
pub fn capabilities_for(kind: BrowserKind, options: &BrowserOptions) -> Result<Capabilities, HarnessError> {
    let mut caps = Capabilities::new(kind.capability_name());
    apply_options(&mut caps, options)?;
    Ok(caps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docker::VersionSelector;

    #[test]
    fn request_json_shapes() {
        let r = BrowserRequest::docker(DockerBrowserSpec::new(BrowserKind::Chrome, VersionSelector::Latest)).with_count(3);
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["type"], "docker");
        assert_eq!(v["kind"], "chrome");
        assert_eq!(v["count"], 3);
        let back: BrowserRequest = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);

        let parsed: BrowserRequest = serde_json::from_str(r#"{"type":"local","kind":"firefox"}"#).unwrap();
        assert_eq!(parsed, BrowserRequest::local(BrowserKind::Firefox));
        let remote: BrowserRequest =
            serde_json::from_str(r#"{"type":"remote","url":"http://hub:4444/wd/hub","capabilities":{"browserName":"chrome"}}"#)
                .unwrap();
        assert!(matches!(remote.target, Target::Remote { .. }));
    }

    #[test]
    fn options_land_in_vendor_capability() {
        let options = BrowserOptions::default().argument("--headless").preference("intl.accept_languages", json!("es"));
        let caps = capabilities_for(BrowserKind::Chrome, &options).unwrap();
        assert_eq!(
            caps.vendor_option("goog:chromeOptions").unwrap(),
            &json!({"args":["--headless"],"prefs":{"intl.accept_languages":"es"}})
        );
        let ff = capabilities_for(BrowserKind::Firefox, &BrowserOptions::default().argument("-headless")).unwrap();
        assert_eq!(ff.vendor_option("moz:firefoxOptions").unwrap()["args"], json!(["-headless"]));
        assert!(capabilities_for(BrowserKind::Safari, &options).is_err());
        assert!(capabilities_for(BrowserKind::Safari, &BrowserOptions::default()).is_ok());
    }

    #[test]
    fn existing_arguments_are_kept_first() {
        let mut caps = Capabilities::new("chrome");
        caps.set_vendor_option("goog:chromeOptions", json!({"args":["--a"]})).unwrap();
        apply_options(&mut caps, &BrowserOptions::default().argument("--b")).unwrap();
        assert_eq!(caps.vendor_option("goog:chromeOptions").unwrap()["args"], json!(["--a", "--b"]));
    }
}
