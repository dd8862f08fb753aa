//! Browser scenarios: a JSON list of browser combinations that a test
//! template is instantiated against.
//!
//! ```json
//! {"browsers": [[{"type": "chrome-in-docker", "version": "latest"}],
//!               [{"type": "firefox", "version": "latest"}, {"type": "chrome-in-docker", "version": "beta"}]]}
//! ```

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde_json::{json, Value};
use thiserror::Error;

use crate::browser::BrowserKind;
use crate::docker::{DockerBrowserSpec, VersionSelector};
use crate::harness::BrowserRequest;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("scenario error at {path}: {reason}")]
pub struct ScenarioError {
    pub path: String,
    pub reason: String,
}

fn err(path: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError { path: path.into(), reason: reason.into() }
}

/// `chrome` (local) or `chrome-in-docker`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BrowserType {
    pub kind: BrowserKind,
    pub docker: bool,
}

impl fmt::Display for BrowserType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.docker {
            write!(f, "{}-in-docker", self.kind)
        } else {
            write!(f, "{}", self.kind)
        }
    }
}

impl FromStr for BrowserType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, docker) = match s.strip_suffix("-in-docker") {
            Some(name) => (name, true),
            None => (s, false),
        };
        let kind: BrowserKind = name.parse().map_err(|e| format!("{e}"))?;
        if docker && !kind.dockerizable() {
            return Err(format!("{kind} has no container images"));
        }
        Ok(BrowserType { kind, docker })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScenarioEntry {
    pub browser_type: BrowserType,
    pub version: VersionSelector,
}

impl ScenarioEntry {
    pub fn new(browser_type: BrowserType, version: VersionSelector) -> Result<Self, String> {
        if !browser_type.docker && version != VersionSelector::Latest {
            return Err(format!("local browsers run whatever is installed; `{version}` needs `{}-in-docker`", browser_type.kind));
        }
        Ok(ScenarioEntry { browser_type, version })
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.browser_type, self.version)
    }

    pub fn to_request(&self) -> BrowserRequest {
        if self.browser_type.docker {
            BrowserRequest::docker(DockerBrowserSpec::new(self.browser_type.kind, self.version.clone()))
        } else {
            BrowserRequest::local(self.browser_type.kind)
        }
    }
}

/// One invocation per inner list.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BrowserScenario {
    pub invocations: Vec<Vec<ScenarioEntry>>,
}

impl BrowserScenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| err(path.display().to_string(), e.to_string()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let doc: Value = serde_json::from_str(text).map_err(|e| err("$", e.to_string()))?;
        let browsers = doc
            .get("browsers")
            .ok_or_else(|| err("$.browsers", "missing"))?
            .as_array()
            .ok_or_else(|| err("$.browsers", "expected an array"))?;
        let mut invocations = Vec::with_capacity(browsers.len());
        for (i, group) in browsers.iter().enumerate() {
            let gpath = format!("$.browsers[{i}]");
            let group = group.as_array().ok_or_else(|| err(&gpath, "expected an array of browsers"))?;
            if group.is_empty() {
                return Err(err(&gpath, "an invocation needs at least one browser"));
            }
            let mut entries = Vec::with_capacity(group.len());
            for (j, entry) in group.iter().enumerate() {
                let epath = format!("{gpath}[{j}]");
                let obj = entry.as_object().ok_or_else(|| err(&epath, "expected an object"))?;
                if let Some(unknown) = obj.keys().find(|k| !matches!(k.as_str(), "type" | "version")) {
                    return Err(err(format!("{epath}.{unknown}"), "unknown field"));
                }
                let ty = obj
                    .get("type")
                    .and_then(Value::as_str)
                    .ok_or_else(|| err(format!("{epath}.type"), "missing browser type"))?;
                let browser_type: BrowserType = ty.parse().map_err(|e| err(format!("{epath}.type"), e))?;
                let version = match obj.get("version") {
                    None if browser_type.docker => return Err(err(format!("{epath}.version"), "missing version")),
                    None => VersionSelector::Latest,
                    Some(v) => v
                        .as_str()
                        .ok_or_else(|| err(format!("{epath}.version"), "expected a string"))?
                        .parse()
                        .map_err(|e: crate::docker::DockerError| err(format!("{epath}.version"), e.to_string()))?,
                };
                entries.push(ScenarioEntry::new(browser_type, version).map_err(|e| err(format!("{epath}.version"), e))?);
            }
            invocations.push(entries);
        }
        Ok(BrowserScenario { invocations })
    }

    /// Canonical compact JSON; `parse(serialize(s)) == s`.
    pub fn serialize(&self) -> String {
        let browsers: Vec<Value> = self
            .invocations
            .iter()
            .map(|group| {
                Value::Array(
                    group
                        .iter()
                        .map(|e| json!({ "type": e.browser_type.to_string(), "version": e.version.to_string() }))
                        .collect(),
                )
            })
            .collect();
        json!({ "browsers": browsers }).to_string()
    }
}

/// A test written once against browsers supplied by a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct TestTemplate {
    pub name: String,
    /// Requests every instance gets before the scenario's own.
    pub fixed: Vec<BrowserRequest>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateInstance {
    pub name: String,
    pub requests: Vec<BrowserRequest>,
}

/// One instance per invocation, named `<template>[<type>-<version>,...]`.
/// Repeated names get `#2`, `#3`, ... so every instance name is unique.
pub fn expand_template(template: &TestTemplate, scenario: &BrowserScenario) -> Vec<TemplateInstance> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut taken: std::collections::HashSet<String> = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(scenario.invocations.len());
    for group in &scenario.invocations {
        let labels: Vec<String> = group.iter().map(ScenarioEntry::label).collect();
        let base = format!("{}[{}]", template.name, labels.join(","));
        let counter = seen.entry(base.clone()).or_insert(0);
        let mut name = base.clone();
        loop {
            *counter += 1;
            if *counter > 1 {
                name = format!("{base}#{counter}");
            }
            if taken.insert(name.clone()) {
                break;
            }
        }
        let mut requests = template.fixed.clone();
        requests.extend(group.iter().map(ScenarioEntry::to_request));
        out.push(TemplateInstance { name, requests });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{"browsers":[[{"type":"chrome-in-docker","version":"latest"}],[{"type":"firefox","version":"latest"},{"type":"chrome-in-docker","version":"beta"}]]}"#;

    #[test]
    fn canonical_round_trip() {
        let s = BrowserScenario::parse(DOC).unwrap();
        assert_eq!(s.invocations.len(), 2);
        assert_eq!(s.serialize(), DOC);
        assert_eq!(BrowserScenario::parse(&s.serialize()).unwrap(), s);
    }

    #[test]
    fn errors_name_the_entry() {
        let bad = DOC.replace("\"beta\"", "\"nightly-ish\"");
        assert_eq!(BrowserScenario::parse(&bad).unwrap_err().path, "$.browsers[1][1].version");
        let local_fixed = r#"{"browsers":[[{"type":"chrome","version":"91"}]]}"#;
        assert_eq!(BrowserScenario::parse(local_fixed).unwrap_err().path, "$.browsers[0][0].version");
        let unknown = r#"{"browsers":[[{"type":"netscape"}]]}"#;
        assert_eq!(BrowserScenario::parse(unknown).unwrap_err().path, "$.browsers[0][0].type");
        assert!(BrowserScenario::parse(r#"{"browsers":[[]]}"#).is_err());
        assert!(BrowserScenario::parse(r#"{"browsers":[[{"type":"safari-in-docker","version":"latest"}]]}"#).is_err());
    }

    #[test]
    fn expansion_names_are_unique() {
        let doc = r#"{"browsers":[[{"type":"chrome-in-docker","version":"latest"}],[{"type":"chrome-in-docker","version":"latest"}],[{"type":"firefox"}]]}"#;
        let s = BrowserScenario::parse(doc).unwrap();
        let template = TestTemplate { name: "call".into(), fixed: vec![BrowserRequest::local(BrowserKind::Chrome)] };
        let names: Vec<String> = expand_template(&template, &s).into_iter().map(|i| i.name).collect();
        assert_eq!(names, ["call[chrome-in-docker-latest]", "call[chrome-in-docker-latest]#2", "call[firefox-latest]"]);
        let first = &expand_template(&template, &s)[0];
        assert_eq!(first.requests.len(), 2);
    }
}
