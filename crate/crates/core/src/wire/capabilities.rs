use std::collections::BTreeMap;

use serde_json::{Map, Value};

use super::WireError;

/// Requested session capabilities, sent as `capabilities.alwaysMatch`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Capabilities {
    pub browser_name: String,
    pub browser_version: Option<String>,
    pub platform_name: Option<String>,
    vendor_options: BTreeMap<String, Value>,
}

impl Capabilities {
    pub fn new(browser_name: impl Into<String>) -> Self {
        Capabilities { browser_name: browser_name.into(), ..Default::default() }
    }

    pub fn with_version(mut self, version: impl Into<String>) -> Self {
        self.browser_version = Some(version.into());
        self
    }

    pub fn with_platform(mut self, platform: impl Into<String>) -> Self {
        self.platform_name = Some(platform.into());
        self
    }

    /// Vendor extension; the key must be namespaced, e.g. `goog:chromeOptions`.
    pub fn set_vendor_option(&mut self, key: &str, value: Value) -> Result<(), WireError> {
        if !key.contains(':') || key.starts_with(':') || key.ends_with(':') {
            return Err(WireError::InvalidCapability(format!("vendor option `{key}` is not namespaced")));
        }
        self.vendor_options.insert(key.to_string(), value);
        Ok(())
    }

    pub fn vendor_option(&self, key: &str) -> Option<&Value> {
        self.vendor_options.get(key)
    }

    pub fn vendor_option_mut(&mut self, key: &str) -> Option<&mut Value> {
        self.vendor_options.get_mut(key)
    }

    pub fn vendor_options(&self) -> &BTreeMap<String, Value> {
        &self.vendor_options
    }

    /// The `alwaysMatch` object.
    pub fn to_json(&self) -> Value {
        let mut map = Map::new();
        map.insert("browserName".into(), Value::String(self.browser_name.clone()));
        if let Some(v) = &self.browser_version {
            map.insert("browserVersion".into(), Value::String(v.clone()));
        }
        if let Some(p) = &self.platform_name {
            map.insert("platformName".into(), Value::String(p.clone()));
        }
        for (k, v) in &self.vendor_options {
            map.insert(k.clone(), v.clone());
        }
        Value::Object(map)
    }

    /// Parse an `alwaysMatch`-style object.
    pub fn from_json(value: &Value) -> Result<Self, WireError> {
        let obj = value
            .as_object()
            .ok_or_else(|| WireError::InvalidCapability("capabilities must be an object".into()))?;
        let text = |key: &str| obj.get(key).and_then(Value::as_str).map(str::to_string);
        let mut caps = Capabilities {
            browser_name: text("browserName").unwrap_or_default(),
            browser_version: text("browserVersion"),
            platform_name: text("platformName"),
            vendor_options: BTreeMap::new(),
        };
        for (k, v) in obj {
            if matches!(k.as_str(), "browserName" | "browserVersion" | "platformName") {
                continue;
            }
            caps.set_vendor_option(k, v.clone())?;
        }
        Ok(caps)
    }

    /// Body of the W3C New Session command.
    pub fn new_session_body(&self) -> Value {
        serde_json::json!({ "capabilities": { "alwaysMatch": self.to_json() } })
    }
}

impl serde::Serialize for Capabilities {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> serde::Deserialize<'de> for Capabilities {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        Capabilities::from_json(&value).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn serializes_always_match() {
        let mut caps = Capabilities::new("chrome").with_version("91");
        caps.set_vendor_option("goog:chromeOptions", json!({"args": ["--headless"]})).unwrap();
        assert_eq!(
            caps.new_session_body(),
            json!({"capabilities":{"alwaysMatch":{"browserName":"chrome","browserVersion":"91","goog:chromeOptions":{"args":["--headless"]}}}})
        );
        assert_eq!(Capabilities::from_json(&caps.to_json()).unwrap(), caps);
    }

    #[test]
    fn vendor_keys_must_be_namespaced() {
        let mut caps = Capabilities::new("firefox");
        assert!(caps.set_vendor_option("args", json!([])).is_err());
        assert!(caps.set_vendor_option(":x", json!([])).is_err());
        assert!(Capabilities::from_json(&json!({"browserName": "x", "plain": 1})).is_err());
    }
}
