//! Layered configuration.
//!
//! Every parameter has a dotted label (`sel.jup.recording`). Values come from
//! four layers, consulted in this order:
//!
//! 1. environment variables, named by [`env_name`] (`SEL_JUP_RECORDING`),
//! 2. properties (`--set key=value` flags and an optional `key=value` file),
//! 3. the programmatic API,
//! 4. the built-in defaults.
//!
//! The environment is captured once when the store is built, so resolution is
//! deterministic and never reads the live process environment.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Duration;

use regex::Regex;
use thiserror::Error;

/// Labels of the registered configuration parameters.
pub mod keys {
    pub const RECORDING: &str = "sel.jup.recording";
    pub const RECORDING_WHEN_FAILURE: &str = "sel.jup.recording.when.failure";
    pub const SCREENSHOT: &str = "sel.jup.screenshot";
    pub const SCREENSHOT_ALWAYS: &str = "sel.jup.screenshot.always";
    pub const SCREENSHOT_FORMAT: &str = "sel.jup.screenshot.format";
    pub const OUTPUT_FOLDER: &str = "sel.jup.output.folder";
    pub const DOCKER_HOST: &str = "sel.jup.docker.host";
    pub const DOCKER_REGISTRY_URL: &str = "sel.jup.docker.registry.url";
    pub const DOCKER_WAIT_TIMEOUT: &str = "sel.jup.docker.wait.timeout.sec";
    pub const DOCKER_POLL_INTERVAL_MS: &str = "sel.jup.docker.poll.interval.ms";
    pub const DOCKER_FLEET_PARALLELISM: &str = "sel.jup.docker.fleet.parallelism";
    pub const DOCKER_REPOSITORY_CHROME: &str = "sel.jup.docker.repository.chrome";
    pub const DOCKER_REPOSITORY_FIREFOX: &str = "sel.jup.docker.repository.firefox";
    pub const DOCKER_REPOSITORY_EDGE: &str = "sel.jup.docker.repository.edge";
    pub const DOCKER_REPOSITORY_OPERA: &str = "sel.jup.docker.repository.opera";
    pub const DOCKER_REPOSITORY_BETA: &str = "sel.jup.docker.repository.beta";
    pub const DOCKER_RECORDING_PATH: &str = "sel.jup.docker.recording.path";
    pub const VNC: &str = "sel.jup.vnc";
    pub const VNC_SCREEN_RESOLUTION: &str = "sel.jup.vnc.screen.resolution";
    pub const SESSION_TIMEOUT: &str = "sel.jup.session.timeout.sec";
    pub const CONNECT_TIMEOUT: &str = "sel.jup.connect.timeout.sec";
    pub const DRIVER_CACHE_PATH: &str = "sel.jup.driver.cache.path";
    pub const DRIVER_METADATA_URL: &str = "sel.jup.driver.metadata.url";
    pub const DRIVER_METADATA_TTL: &str = "sel.jup.driver.metadata.ttl.sec";
    pub const DEFAULT_BROWSER: &str = "sel.jup.default.browser";
    pub const DEFAULT_VERSION: &str = "sel.jup.default.version";
    pub const FREEZE_THRESHOLD_MS: &str = "sel.jup.freeze.threshold.ms";
    pub const JITTER_THRESHOLD_MS: &str = "sel.jup.jitter.threshold.ms";
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("invalid configuration label `{0}`")]
    InvalidLabel(String),
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("cannot parse {layer} value `{raw}` for key `{key}` as {expected}")]
    Parse { key: String, layer: Layer, raw: String, expected: String },
    #[error("{path}:{line}: expected `key=value`")]
    PropertiesSyntax { path: String, line: usize },
    #[error("cannot read properties file {path}: {reason}")]
    PropertiesIo { path: String, reason: String },
    #[error("key `{key}` holds {actual}, not {requested}")]
    WrongType { key: String, actual: String, requested: &'static str },
}

/// Source layer of a configuration value, highest priority first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Layer {
    Env,
    Property,
    Api,
    Default,
}

impl Layer {
    /// All layers, highest priority first.
    pub const ALL: [Layer; 4] = [Layer::Env, Layer::Property, Layer::Api, Layer::Default];
}

/// The highest-priority layer for which `populated` holds.
pub fn effective_layer(populated: impl Fn(Layer) -> bool) -> Option<Layer> {
    Layer::ALL.into_iter().find(|&layer| populated(layer))
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layer::Env => "environment",
            Layer::Property => "property",
            Layer::Api => "api",
            Layer::Default => "default",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueType {
    Bool,
    Integer,
    /// Whole seconds.
    DurationSecs,
    String,
    Path,
    Enum(&'static [&'static str]),
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueType::Bool => f.write_str("bool"),
            ValueType::Integer => f.write_str("integer"),
            ValueType::DurationSecs => f.write_str("duration in seconds"),
            ValueType::String => f.write_str("string"),
            ValueType::Path => f.write_str("path"),
            ValueType::Enum(choices) => write!(f, "one of {{{}}}", choices.join(", ")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigValue {
    Bool(bool),
    Integer(i64),
    Duration(Duration),
    Str(String),
    Path(PathBuf),
    Enum(String),
}

impl ConfigValue {
    fn type_name(&self) -> &'static str {
        match self {
            ConfigValue::Bool(_) => "bool",
            ConfigValue::Integer(_) => "integer",
            ConfigValue::Duration(_) => "duration",
            ConfigValue::Str(_) => "string",
            ConfigValue::Path(_) => "path",
            ConfigValue::Enum(_) => "enum",
        }
    }

    fn matches(&self, ty: ValueType) -> bool {
        match (self, ty) {
            (ConfigValue::Bool(_), ValueType::Bool)
            | (ConfigValue::Integer(_), ValueType::Integer)
            | (ConfigValue::Duration(_), ValueType::DurationSecs)
            | (ConfigValue::Str(_), ValueType::String)
            | (ConfigValue::Path(_), ValueType::Path) => true,
            (ConfigValue::Enum(v), ValueType::Enum(choices)) => choices.contains(&v.as_str()),
            _ => false,
        }
    }
}

impl fmt::Display for ConfigValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigValue::Bool(b) => write!(f, "{b}"),
            ConfigValue::Integer(i) => write!(f, "{i}"),
            ConfigValue::Duration(d) => write!(f, "{}", d.as_secs()),
            ConfigValue::Str(s) | ConfigValue::Enum(s) => f.write_str(s),
            ConfigValue::Path(p) => write!(f, "{}", p.display()),
        }
    }
}

/// A registered configuration parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigKey {
    pub label: &'static str,
    pub value_type: ValueType,
}

#[derive(Debug, Clone)]
pub struct KeyInfo {
    pub key: ConfigKey,
    pub default: ConfigValue,
    pub doc: &'static str,
}

const SCREENSHOT_FORMATS: &[&str] = &["base64", "png"];

fn label_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[a-z][a-z0-9]*(\.[a-z0-9]+)+$").unwrap())
}

pub fn is_valid_label(label: &str) -> bool {
    label_pattern().is_match(label)
}

/// Environment variable name for a label: uppercase, dots become underscores.
pub fn env_name(label: &str) -> Result<String, ConfigError> {
    if !is_valid_label(label) {
        return Err(ConfigError::InvalidLabel(label.to_string()));
    }
    Ok(label.to_ascii_uppercase().replace('.', "_"))
}

fn default_cache_dir() -> PathBuf {
    dirs::data_local_dir()
        .map(|d| d.join("webtestkit").join("drivers"))
        .unwrap_or_else(|| PathBuf::from(".webtestkit").join("drivers"))
}

fn build_registry() -> Vec<KeyInfo> {
    use keys::*;
    use ConfigValue as V;
    use ValueType as T;
    let secs = |s| V::Duration(Duration::from_secs(s));
    let s = |v: &str| V::Str(v.to_string());
    let entry = |label, value_type, default, doc| KeyInfo { key: ConfigKey { label, value_type }, default, doc };
    let mut all = vec![
        entry(RECORDING, T::Bool, V::Bool(false), "Record dockerized browser sessions"),
        entry(RECORDING_WHEN_FAILURE, T::Bool, V::Bool(false), "Keep recordings only for failed tests"),
        entry(SCREENSHOT, T::Bool, V::Bool(false), "Take a screenshot when a test fails"),
        entry(SCREENSHOT_ALWAYS, T::Bool, V::Bool(false), "Take a screenshot at the end of every test"),
        entry(SCREENSHOT_FORMAT, T::Enum(SCREENSHOT_FORMATS), V::Enum("png".into()), "Screenshot encoding: base64 or png"),
        entry(OUTPUT_FOLDER, T::Path, V::Path(PathBuf::from(".")), "Directory for screenshots, recordings and reports"),
        entry(DOCKER_HOST, T::String, s("unix:///var/run/docker.sock"), "Container engine endpoint (unix:// or tcp://)"),
        entry(DOCKER_REGISTRY_URL, T::String, s("https://hub.docker.com"), "Registry API used to list image tags"),
        entry(DOCKER_WAIT_TIMEOUT, T::DurationSecs, secs(30), "Seconds to wait for a container driver to become ready"),
        entry(DOCKER_POLL_INTERVAL_MS, T::Integer, V::Integer(500), "Readiness poll interval in milliseconds"),
        entry(DOCKER_FLEET_PARALLELISM, T::Integer, V::Integer(4), "Containers started concurrently in a fleet"),
        entry(DOCKER_REPOSITORY_CHROME, T::String, s("selenoid/vnc_chrome"), "Image repository for stable Chrome"),
        entry(DOCKER_REPOSITORY_FIREFOX, T::String, s("selenoid/vnc_firefox"), "Image repository for stable Firefox"),
        entry(DOCKER_REPOSITORY_EDGE, T::String, s("browsers/edge"), "Image repository for stable Edge"),
        entry(DOCKER_REPOSITORY_OPERA, T::String, s("selenoid/vnc_opera"), "Image repository for stable Opera"),
        entry(DOCKER_REPOSITORY_BETA, T::String, s("twilio/selenoid"), "Image repository for beta and development builds"),
        entry(DOCKER_RECORDING_PATH, T::String, s("/tmp/recording.mp4"), "Path of the session recording inside the container"),
        entry(VNC, T::Bool, V::Bool(false), "Expose the container VNC server"),
        entry(VNC_SCREEN_RESOLUTION, T::String, s("1920x1080x24"), "Container screen geometry, width x height x depth"),
        entry(SESSION_TIMEOUT, T::DurationSecs, secs(60), "WebDriver command timeout in seconds"),
        entry(CONNECT_TIMEOUT, T::DurationSecs, secs(10), "WebDriver connect timeout in seconds"),
        entry(DRIVER_CACHE_PATH, T::Path, V::Path(default_cache_dir()), "Root of the driver binary cache"),
        entry(
            DRIVER_METADATA_URL,
            T::String,
            s("https://googlechromelabs.github.io/chrome-for-testing/latest-versions-per-milestone-with-downloads.json"),
            "Driver release metadata endpoint",
        ),
        entry(DRIVER_METADATA_TTL, T::DurationSecs, secs(86_400), "Seconds a downloaded metadata document stays fresh"),
        entry(DEFAULT_BROWSER, T::String, s("chrome"), "Target of generic browser fixtures (e.g. chrome, chrome-in-docker)"),
        entry(DEFAULT_VERSION, T::String, s("latest"), "Version selector of generic dockerized fixtures"),
        entry(FREEZE_THRESHOLD_MS, T::Integer, V::Integer(500), "Inter-frame gap counted as a video freeze, in ms"),
        entry(JITTER_THRESHOLD_MS, T::Integer, V::Integer(75), "Jitter delay above which a connection is flagged, in ms"),
    ];
    all.sort_by_key(|info| info.key.label);
    all
}

/// All registered keys, sorted by label.
pub fn registered_keys() -> &'static [KeyInfo] {
    static REGISTRY: OnceLock<Vec<KeyInfo>> = OnceLock::new();
    REGISTRY.get_or_init(build_registry)
}

pub fn lookup_key(label: &str) -> Option<&'static KeyInfo> {
    registered_keys().iter().find(|info| info.key.label == label)
}

fn lookup_or_err(label: &str) -> Result<&'static KeyInfo, ConfigError> {
    lookup_key(label).ok_or_else(|| ConfigError::UnknownKey(label.to_string()))
}

/// Parse a textual value into the key's type.
pub fn parse_value(info: &KeyInfo, layer: Layer, raw: &str) -> Result<ConfigValue, ConfigError> {
    let err = || ConfigError::Parse {
        key: info.key.label.to_string(),
        layer,
        raw: raw.to_string(),
        expected: info.key.value_type.to_string(),
    };
    let text = raw.trim();
    match info.key.value_type {
        ValueType::Bool => {
            if text.eq_ignore_ascii_case("true") {
                Ok(ConfigValue::Bool(true))
            } else if text.eq_ignore_ascii_case("false") {
                Ok(ConfigValue::Bool(false))
            } else {
                Err(err())
            }
        }
        ValueType::Integer => text.parse().map(ConfigValue::Integer).map_err(|_| err()),
        ValueType::DurationSecs => {
            text.parse::<u64>().map(|s| ConfigValue::Duration(Duration::from_secs(s))).map_err(|_| err())
        }
        ValueType::String => Ok(ConfigValue::Str(raw.to_string())),
        ValueType::Path => {
            if text.is_empty() {
                Err(err())
            } else {
                Ok(ConfigValue::Path(PathBuf::from(text)))
            }
        }
        ValueType::Enum(choices) => choices
            .iter()
            .find(|c| c.eq_ignore_ascii_case(text))
            .map(|c| ConfigValue::Enum(c.to_string()))
            .ok_or_else(err),
    }
}

#[derive(Debug, Clone)]
enum Raw {
    Text(String),
    Typed(ConfigValue),
}

/// Immutable layered configuration.
#[derive(Debug, Clone, Default)]
pub struct ConfigStore {
    env_layer: BTreeMap<&'static str, String>,
    property_layer: BTreeMap<&'static str, String>,
    api_layer: BTreeMap<&'static str, ConfigValue>,
}

impl ConfigStore {
    pub fn builder() -> ConfigBuilder {
        ConfigBuilder::default()
    }

    /// A store holding only defaults.
    pub fn defaults() -> Self {
        ConfigStore::default()
    }

    /// Highest-priority layer holding a value for `label`.
    pub fn layer_of(&self, label: &str) -> Result<Layer, ConfigError> {
        self.lookup(label).map(|(layer, _, _)| layer)
    }

    fn lookup(&self, label: &str) -> Result<(Layer, Raw, &'static KeyInfo), ConfigError> {
        let info = lookup_or_err(label)?;
        let label = info.key.label;
        let layer = effective_layer(|layer| match layer {
            Layer::Env => self.env_layer.contains_key(label),
            Layer::Property => self.property_layer.contains_key(label),
            Layer::Api => self.api_layer.contains_key(label),
            Layer::Default => true,
        })
        .expect("every registered key has a default");
        let raw = match layer {
            Layer::Env => Raw::Text(self.env_layer[label].clone()),
            Layer::Property => Raw::Text(self.property_layer[label].clone()),
            Layer::Api => Raw::Typed(self.api_layer[label].clone()),
            Layer::Default => Raw::Typed(info.default.clone()),
        };
        Ok((layer, raw, info))
    }

    /// Effective typed value of `label`.
    pub fn resolve(&self, label: &str) -> Result<ConfigValue, ConfigError> {
        let (layer, raw, info) = self.lookup(label)?;
        match raw {
            Raw::Text(text) => parse_value(info, layer, &text),
            Raw::Typed(value) => Ok(value),
        }
    }

    fn wrong(label: &str, actual: &ConfigValue, requested: &'static str) -> ConfigError {
        ConfigError::WrongType { key: label.to_string(), actual: actual.type_name().to_string(), requested }
    }

    pub fn bool(&self, label: &str) -> Result<bool, ConfigError> {
        match self.resolve(label)? {
            ConfigValue::Bool(b) => Ok(b),
            other => Err(Self::wrong(label, &other, "bool")),
        }
    }

    pub fn integer(&self, label: &str) -> Result<i64, ConfigError> {
        match self.resolve(label)? {
            ConfigValue::Integer(i) => Ok(i),
            other => Err(Self::wrong(label, &other, "integer")),
        }
    }

    pub fn duration(&self, label: &str) -> Result<Duration, ConfigError> {
        match self.resolve(label)? {
            ConfigValue::Duration(d) => Ok(d),
            other => Err(Self::wrong(label, &other, "duration")),
        }
    }

    /// String, enum and path values as text.
    pub fn string(&self, label: &str) -> Result<String, ConfigError> {
        match self.resolve(label)? {
            ConfigValue::Str(s) | ConfigValue::Enum(s) => Ok(s),
            ConfigValue::Path(p) => Ok(p.display().to_string()),
            other => Err(Self::wrong(label, &other, "string")),
        }
    }

    pub fn path(&self, label: &str) -> Result<PathBuf, ConfigError> {
        match self.resolve(label)? {
            ConfigValue::Path(p) => Ok(p),
            other => Err(Self::wrong(label, &other, "path")),
        }
    }
}

/// Single-threaded builder; freeze into a [`ConfigStore`] with [`ConfigBuilder::build`].
#[derive(Debug, Default)]
pub struct ConfigBuilder {
    store: ConfigStore,
}

impl ConfigBuilder {
    /// Capture environment variables for registered keys from `vars`.
    pub fn env<I, K, V>(mut self, vars: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: Into<String>,
    {
        let by_env: BTreeMap<String, &'static str> = registered_keys()
            .iter()
            .map(|info| (env_name(info.key.label).expect("registered labels are valid"), info.key.label))
            .collect();
        for (name, value) in vars {
            if let Some(label) = by_env.get(name.as_ref()) {
                self.store.env_layer.insert(label, value.into());
            }
        }
        self
    }

    /// Capture the current process environment.
    pub fn process_env(self) -> Self {
        self.env(std::env::vars())
    }

    pub fn property(mut self, label: &str, value: impl Into<String>) -> Result<Self, ConfigError> {
        let info = lookup_or_err(label)?;
        self.store.property_layer.insert(info.key.label, value.into());
        Ok(self)
    }

    /// Parse a `key=value` assignment as given to `--set`.
    pub fn assignment(self, text: &str) -> Result<Self, ConfigError> {
        let (key, value) = text
            .split_once('=')
            .ok_or_else(|| ConfigError::PropertiesSyntax { path: "--set".into(), line: 1 })?;
        self.property(key.trim(), value.trim())
    }

    /// Load a properties file: `key=value` lines, `#` comments, blank lines ignored.
    pub fn properties_file(self, path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::PropertiesIo {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        self.properties_text(&text, &path.display().to_string())
    }

    pub fn properties_text(mut self, text: &str, origin: &str) -> Result<Self, ConfigError> {
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::PropertiesSyntax { path: origin.to_string(), line: idx + 1 })?;
            self = self.property(key.trim(), value.trim())?;
        }
        Ok(self)
    }

    /// Programmatic value; its type must match the key.
    pub fn api(mut self, label: &str, value: ConfigValue) -> Result<Self, ConfigError> {
        let info = lookup_or_err(label)?;
        if !value.matches(info.key.value_type) {
            return Err(ConfigError::Parse {
                key: label.to_string(),
                layer: Layer::Api,
                raw: value.to_string(),
                expected: info.key.value_type.to_string(),
            });
        }
        self.store.api_layer.insert(info.key.label, value);
        Ok(self)
    }

    pub fn build(self) -> ConfigStore {
        self.store
    }
}
