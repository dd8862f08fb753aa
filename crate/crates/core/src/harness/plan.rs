use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{BrowserRequest, HarnessError};
use crate::browser::BrowserKind;
use crate::scenario::{expand_template, BrowserScenario, TestTemplate};
use crate::wire::{Locator, Session};

/// How long browser fixtures live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    /// Fresh browsers for every test.
    #[default]
    PerTest,
    /// Identical requests share one fixture across the plan.
    SingleSession,
}

/// Skip a test unless this holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Condition {
    BrowserAvailable { browser: BrowserKind },
    DockerAvailable,
    DriverUrlOnline { url: String },
}

/// Browsers handed to a test body, grouped by request.
pub struct TestContext<'a> {
    pub name: &'a str,
    pub out_dir: &'a Path,
    groups: Vec<Vec<Arc<Session>>>,
}

impl<'a> TestContext<'a> {
    pub(crate) fn new(name: &'a str, out_dir: &'a Path, groups: Vec<Vec<Arc<Session>>>) -> Self {
        TestContext { name, out_dir, groups }
    }

    /// Sessions of the `i`-th request.
    pub fn group(&self, i: usize) -> &[Arc<Session>] {
        self.groups.get(i).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All sessions in request order.
    pub fn sessions(&self) -> impl Iterator<Item = &Arc<Session>> {
        self.groups.iter().flatten()
    }

    pub fn session(&self, i: usize) -> Result<&Arc<Session>, String> {
        self.sessions().nth(i).ok_or_else(|| format!("test has no browser #{i}"))
    }
}

pub type TestBody = Arc<dyn Fn(&TestContext) -> Result<(), String> + Send + Sync>;

#[derive(Clone)]
pub struct TestCase {
    pub name: String,
    pub requests: Vec<BrowserRequest>,
    pub conditions: Vec<Condition>,
    pub body: TestBody,
}

impl std::fmt::Debug for TestCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestCase").field("name", &self.name).field("requests", &self.requests).finish()
    }
}

impl TestCase {
    pub fn new<F>(name: impl Into<String>, requests: Vec<BrowserRequest>, body: F) -> Self
    where
        F: Fn(&TestContext) -> Result<(), String> + Send + Sync + 'static,
    {
        TestCase { name: name.into(), requests, conditions: Vec::new(), body: Arc::new(body) }
    }

    pub fn with_condition(mut self, condition: Condition) -> Self {
        self.conditions.push(condition);
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct TestPlan {
    pub session_mode: SessionMode,
    /// Conditions applying to every test.
    pub conditions: Vec<Condition>,
    pub tests: Vec<TestCase>,
}

impl TestPlan {
    pub fn new(session_mode: SessionMode) -> Self {
        TestPlan { session_mode, ..Default::default() }
    }

    pub fn add(&mut self, test: TestCase) -> &mut Self {
        self.tests.push(test);
        self
    }

    /// One test per scenario invocation, all sharing `body`.
    pub fn add_template(&mut self, template: &TestTemplate, scenario: &BrowserScenario, conditions: Vec<Condition>, body: TestBody) {
        for instance in expand_template(template, scenario) {
            self.tests.push(TestCase {
                name: instance.name,
                requests: instance.requests,
                conditions: conditions.clone(),
                body: body.clone(),
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestStatus {
    Passed,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactKind {
    Screenshot,
    Recording,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    #[serde(rename = "type")]
    pub kind: ArtifactKind,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub name: String,
    pub status: TestStatus,
    pub artifacts: Vec<Artifact>,
    /// Seconds.
    #[serde(with = "secs")]
    pub duration: Duration,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl TestOutcome {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("outcomes serialize")
    }
}

/// Plain-text summary: one row per test.
pub fn summary_table(outcomes: &[TestOutcome]) -> String {
    let width = outcomes.iter().map(|o| o.name.len()).max().unwrap_or(4).max(4);
    let mut out = format!("{:<width$}  {:<7}  {:>9}  artifacts\n", "test", "status", "seconds");
    for o in outcomes {
        let status = match o.status {
            TestStatus::Passed => "passed",
            TestStatus::Failed => "FAILED",
            TestStatus::Skipped => "skipped",
        };
        out.push_str(&format!("{:<width$}  {:<7}  {:>9.3}  {}\n", o.name, status, o.duration.as_secs_f64(), o.artifacts.len()));
    }
    let count = |s| outcomes.iter().filter(|o| o.status == s).count();
    out.push_str(&format!(
        "{} passed, {} failed, {} skipped\n",
        count(TestStatus::Passed),
        count(TestStatus::Failed),
        count(TestStatus::Skipped)
    ));
    out
}

/// Element locator in plan files: exactly one of `css` / `xpath`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub css: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xpath: Option<String>,
}

impl ElementSpec {
    fn locator(&self) -> Result<Locator, String> {
        match (&self.css, &self.xpath) {
            (Some(css), None) => Ok(Locator::css(css.clone())),
            (None, Some(xpath)) => Ok(Locator::xpath(xpath.clone())),
            _ => Err("element needs exactly one of `css` or `xpath`".into()),
        }
    }
}

/// One scripted action; `on` picks the browser (flattened request order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Step {
    Navigate { url: String, #[serde(default)] on: usize },
    Click { element: ElementSpec, #[serde(default)] on: usize },
    SendKeys { element: ElementSpec, text: String, #[serde(default)] on: usize },
    ExpectText { element: ElementSpec, text: String, #[serde(default)] on: usize },
    ExpectUrl { url: String, #[serde(default)] on: usize },
    ExpectTitle { title: String, #[serde(default)] on: usize },
    Execute {
        script: String,
        #[serde(default)]
        args: Vec<Value>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<Value>,
        #[serde(default)]
        on: usize,
    },
    SleepMs { ms: u64 },
    Fail { message: String },
}

pub fn run_steps(steps: &[Step], ctx: &TestContext) -> Result<(), String> {
    for (i, step) in steps.iter().enumerate() {
        run_step(step, ctx).map_err(|e| format!("step {i}: {e}"))?;
    }
    Ok(())
}

fn run_step(step: &Step, ctx: &TestContext) -> Result<(), String> {
    let s = |on: usize| ctx.session(on);
    match step {
        Step::Navigate { url, on } => s(*on)?.navigate(url).map_err(|e| e.to_string()),
        Step::Click { element, on } => {
            let session = s(*on)?;
            let el = session.find_element(&element.locator()?).map_err(|e| e.to_string())?;
            session.click(&el).map_err(|e| e.to_string())
        }
        Step::SendKeys { element, text, on } => {
            let session = s(*on)?;
            let el = session.find_element(&element.locator()?).map_err(|e| e.to_string())?;
            session.send_keys(&el, text).map_err(|e| e.to_string())
        }
        Step::ExpectText { element, text, on } => {
            let session = s(*on)?;
            let el = session.find_element(&element.locator()?).map_err(|e| e.to_string())?;
            let actual = session.text(&el).map_err(|e| e.to_string())?;
            (actual == *text).then_some(()).ok_or_else(|| format!("expected text `{text}`, found `{actual}`"))
        }
        Step::ExpectUrl { url, on } => {
            let actual = s(*on)?.current_url().map_err(|e| e.to_string())?;
            (actual == *url).then_some(()).ok_or_else(|| format!("expected url `{url}`, found `{actual}`"))
        }
        Step::ExpectTitle { title, on } => {
            let actual = s(*on)?.title().map_err(|e| e.to_string())?;
            (actual == *title).then_some(()).ok_or_else(|| format!("expected title `{title}`, found `{actual}`"))
        }
        Step::Execute { script, args, expect, on } => {
            let value = s(*on)?.execute_script(script, args.clone()).map_err(|e| e.to_string())?;
            match expect {
                Some(expected) if *expected != value => Err(format!("script returned {value}, expected {expected}")),
                _ => Ok(()),
            }
        }
        Step::SleepMs { ms } => {
            std::thread::sleep(Duration::from_millis(*ms));
            Ok(())
        }
        Step::Fail { message } => Err(message.clone()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanTest {
    pub name: String,
    #[serde(default)]
    pub browsers: Vec<BrowserRequest>,
    #[serde(default)]
    pub conditions: Vec<Condition>,
    /// Expand against the scenario; `browsers` become the fixed part.
    #[serde(default)]
    pub template: bool,
    #[serde(default)]
    pub steps: Vec<Step>,
}

/// Declarative plan file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    #[serde(default)]
    pub session_mode: SessionMode,
    #[serde(default)]
    pub conditions: Vec<Condition>,
    pub tests: Vec<PlanTest>,
}

impl PlanFile {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::InvalidPlan(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let plan: PlanFile = serde_json::from_str(text).map_err(|e| HarnessError::InvalidPlan(e.to_string()))?;
        let mut names = std::collections::HashSet::new();
        for t in &plan.tests {
            if !names.insert(t.name.as_str()) {
                return Err(HarnessError::InvalidPlan(format!("duplicate test name `{}`", t.name)));
            }
            if t.browsers.iter().any(|r| r.count == 0) {
                return Err(HarnessError::InvalidPlan(format!("test `{}` requests zero browsers", t.name)));
            }
        }
        Ok(plan)
    }

    pub fn into_plan(self, scenario: Option<&BrowserScenario>) -> Result<TestPlan, HarnessError> {
        let mut plan = TestPlan { session_mode: self.session_mode, conditions: self.conditions, tests: Vec::new() };
        for test in self.tests {
            let steps = Arc::new(test.steps);
            let body: TestBody = Arc::new(move |ctx: &TestContext| run_steps(&steps, ctx));
            if test.template {
                let scenario = scenario.ok_or_else(|| {
                    HarnessError::InvalidPlan(format!("template test `{}` needs a browser scenario", test.name))
                })?;
                let template = TestTemplate { name: test.name, fixed: test.browsers };
                plan.add_template(&template, scenario, test.conditions, body);
            } else {
                plan.tests.push(TestCase { name: test.name, requests: test.browsers, conditions: test.conditions, body });
            }
        }
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_file_parses() {
        let text = r##"{"session_mode":"single_session","conditions":[{"kind":"docker_available"}],
          "tests":[{"name":"t","browsers":[{"type":"generic"}],
            "steps":[{"action":"navigate","url":"https://example.org/"},
                     {"action":"click","element":{"css":"#go"}},
                     {"action":"execute","script":"return 1+1","expect":2},
                     {"action":"fail","message":"boom"}]}]}"##;
        let plan = PlanFile::parse(text).unwrap();
        assert_eq!(plan.session_mode, SessionMode::SingleSession);
        assert_eq!(plan.tests[0].steps.len(), 4);
        let tp = plan.into_plan(None).unwrap();
        assert_eq!(tp.tests.len(), 1);
    }

    #[test]
    fn templates_need_a_scenario() {
        let text = r#"{"tests":[{"name":"t","template":true}]}"#;
        assert!(PlanFile::parse(text).unwrap().into_plan(None).is_err());
        let dup = r#"{"tests":[{"name":"t"},{"name":"t"}]}"#;
        assert!(PlanFile::parse(dup).is_err());
    }

    #[test]
    fn outcome_line_shape() {
        let o = TestOutcome {
            name: "a".into(),
            status: TestStatus::Failed,
            artifacts: vec![Artifact { kind: ArtifactKind::Screenshot, path: "x.png".into() }],
            duration: Duration::from_millis(1500),
            message: Some("boom".into()),
        };
        let v: Value = serde_json::from_str(&o.to_json_line()).unwrap();
        assert_eq!(v["status"], "failed");
        assert_eq!(v["artifacts"][0]["type"], "screenshot");
        assert_eq!(v["duration"], 1.5);
        assert!(summary_table(&[o]).contains("0 passed, 1 failed, 0 skipped"));
    }
}
