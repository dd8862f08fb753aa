use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde_json::json;
use webtestkit::docker::{DockerBrowserSpec, VersionSelector};
use webtestkit::driver::FixedProbe;
use webtestkit::harness::{
    ArtifactKind, BrowserOptions, BrowserRequest, Condition, Harness, HarnessError, HarnessSettings, PlanFile,
    SessionMode, TestCase, TestPlan, TestStatus,
};
use webtestkit::scenario::BrowserScenario;
use webtestkit::wire::{Capabilities, Provenance};
use webtestkit::{BrowserKind, Platform};
use webtestkit_testkit::{
    browser_engine, fixture_metadata, mock_farm, seed_driver_cache, EngineFaults, MockElement, MockEngine, MockLauncher,
    MockWebDriver,
};

struct Rig {
    dir: tempfile::TempDir,
    launcher: MockLauncher,
    engine: MockEngine,
}

impl Rig {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        seed_driver_cache(&dir.path().join("cache"), BrowserKind::Chrome, Platform::LinuxX64, "126.0.6478.126");
        Rig { dir, launcher: MockLauncher::new(), engine: browser_engine() }
    }

    fn out(&self) -> std::path::PathBuf {
        self.dir.path().join("out")
    }

    fn settings(&self) -> HarnessSettings {
        HarnessSettings {
            out_dir: self.out(),
            driver_cache: self.dir.path().join("cache"),
            platform: Platform::LinuxX64,
            ..HarnessSettings::default()
        }
    }

    fn harness(&self, settings: HarnessSettings) -> Harness {
        Harness::builder(settings)
            .probe(Arc::new(FixedProbe::new().with_output(BrowserKind::Chrome, "Chromium 126.0.6478.182")))
            .launcher(Arc::new(self.launcher.clone()))
            .metadata(fixture_metadata())
            .farm(mock_farm(&self.engine, &self.out(), Duration::from_millis(200)))
            .build()
    }
}

fn five_tests(mode: SessionMode, request: BrowserRequest) -> TestPlan {
    let mut plan = TestPlan::new(mode);
    for i in 0..5 {
        plan.add(TestCase::new(format!("t{i}"), vec![request.clone()], |ctx| {
            let s = ctx.session(0)?;
            s.navigate("http://app.test/").map_err(|e| e.to_string())
        }));
    }
    plan
}

#[test]
fn single_session_resolves_once() {
    let rig = Rig::new();
    let h = rig.harness(rig.settings());
    let report = h.run_plan(&five_tests(SessionMode::SingleSession, BrowserRequest::local(BrowserKind::Chrome)));
    assert_eq!(report.failed(), 0, "{:?}", report.outcomes);
    assert_eq!((report.stats.resolutions, report.stats.disposals), (1, 1));
    assert_eq!(rig.launcher.launched(), 1);
    assert_eq!(rig.launcher.artifacts()[0].driver_version.raw(), "126.0.6478.126");

    let report = h.run_plan(&five_tests(SessionMode::PerTest, BrowserRequest::local(BrowserKind::Chrome)));
    assert_eq!((report.stats.resolutions, report.stats.disposals), (5, 5));
    assert!(report.stats.balanced());
    assert_eq!(rig.launcher.launched(), 6);
    assert_eq!(rig.launcher.terminated(), 6);
    assert_eq!(rig.launcher.sessions_created(), rig.launcher.sessions_deleted());
}

#[test]
fn failure_produces_screenshot_and_message() {
    let rig = Rig::new();
    let settings = HarnessSettings { screenshot_on_failure: true, ..rig.settings() };
    let h = rig.harness(settings);
    let mut plan = TestPlan::new(SessionMode::PerTest);
    plan.add(TestCase::new("passes", vec![BrowserRequest::local(BrowserKind::Chrome)], |_| Ok(())));
    plan.add(TestCase::new("fails", vec![BrowserRequest::local(BrowserKind::Chrome).with_count(2)], |_| Err("boom".into())));
    plan.add(TestCase::new("panics", vec![], |_| panic!("kaput")));
    let report = h.run_plan(&plan);
    let [pass, fail, panic] = &report.outcomes[..] else { panic!() };
    assert_eq!(pass.status, TestStatus::Passed);
    assert!(pass.artifacts.is_empty());
    assert_eq!(fail.status, TestStatus::Failed);
    assert_eq!(fail.message.as_deref(), Some("boom"));
    assert_eq!(fail.artifacts.len(), 2);
    for a in &fail.artifacts {
        assert_eq!(a.kind, ArtifactKind::Screenshot);
        let name = a.path.file_name().unwrap().to_str().unwrap();
        assert!(name.starts_with("fails-mock-000") && name.ends_with(".png"), "{name}");
        assert!(a.path.is_file());
    }
    assert_eq!(panic.status, TestStatus::Failed);
    assert!(panic.message.as_deref().unwrap().contains("kaput"));
    assert!(report.stats.balanced());
}

#[test]
fn unmet_conditions_skip_without_resolving() {
    let rig = Rig::new();
    let h = rig.harness(rig.settings());
    let mut plan = TestPlan::new(SessionMode::PerTest);
    plan.add(
        TestCase::new("needs firefox", vec![BrowserRequest::local(BrowserKind::Firefox)], |_| Ok(()))
            .with_condition(Condition::BrowserAvailable { browser: BrowserKind::Firefox }),
    );
    plan.add(
        TestCase::new("needs engine", vec![], |_| Ok(())).with_condition(Condition::DockerAvailable),
    );
    plan.add(
        TestCase::new("needs grid", vec![], |_| Ok(()))
            .with_condition(Condition::DriverUrlOnline { url: "http://127.0.0.1:1".into() }),
    );
    let report = h.run_plan(&plan);
    let statuses: Vec<_> = report.outcomes.iter().map(|o| o.status).collect();
    assert_eq!(statuses, [TestStatus::Skipped, TestStatus::Passed, TestStatus::Skipped]);
    assert_eq!(report.stats.resolutions, 0);
}

#[test]
fn missing_browser_is_a_resolution_failure() {
    let rig = Rig::new();
    let h = rig.harness(rig.settings());
    let err = h.resolve_fixture(&BrowserRequest::local(BrowserKind::Edge)).unwrap_err();
    assert!(matches!(err, HarnessError::Driver(webtestkit::driver::DriverError::BrowserNotFound { .. })), "{err}");
}

#[test]
fn docker_recordings_kept_only_for_failures() {
    let rig = Rig::new();
    let settings = HarnessSettings { recording_when_failure: true, ..rig.settings() };
    let h = rig.harness(settings);
    let req = BrowserRequest::docker(DockerBrowserSpec::new(BrowserKind::Chrome, VersionSelector::LatestMinus(1)));
    let mut plan = TestPlan::new(SessionMode::PerTest);
    plan.add(TestCase::new("green", vec![req.clone()], |_| Ok(())));
    plan.add(TestCase::new("red", vec![req.clone()], |_| Err("nope".into())));
    let report = h.run_plan(&plan);
    assert!(report.outcomes[0].artifacts.is_empty());
    let rec: Vec<_> = report.outcomes[1].artifacts.iter().filter(|a| a.kind == ArtifactKind::Recording).collect();
    assert_eq!(rec.len(), 1);
    assert_eq!(std::fs::read(&rec[0].path).unwrap(), webtestkit_testkit::FAKE_MP4);
    assert_eq!(rig.engine.live_containers(), 0);
    assert!(rig.engine.env_of_live().is_empty());
    assert_eq!(rig.engine.created(), 2);
}

#[test]
fn partial_docker_resolution_is_rolled_back() {
    let rig = Rig::new();
    rig.engine.set_faults(EngineFaults { reject_sessions_at: Some(3), ..Default::default() });
    let h = rig.harness(rig.settings());
    let req = BrowserRequest::docker(DockerBrowserSpec::new(BrowserKind::Firefox, VersionSelector::Latest)).with_count(3);
    let err = h.resolve_fixture(&req).unwrap_err();
    assert!(matches!(err, HarnessError::Wire(_)), "{err}");
    assert_eq!((rig.engine.created(), rig.engine.removed()), (3, 3));
    assert_eq!(rig.engine.sessions_created(), rig.engine.sessions_deleted());
    assert!(h.stats().balanced());
}

#[test]
fn generic_remote_and_custom_targets() {
    let rig = Rig::new();
    let settings = HarnessSettings { default_browser: "firefox-in-docker".into(), default_version: "latest-1".into(), ..rig.settings() };
    let remote = MockWebDriver::start();
    let custom_calls = Arc::new(AtomicUsize::new(0));
    let calls = custom_calls.clone();
    let remote_url = remote.url().to_string();
    let h = Harness::builder(settings)
        .probe(Arc::new(FixedProbe::new()))
        .launcher(Arc::new(rig.launcher.clone()))
        .farm(mock_farm(&rig.engine, &rig.out(), Duration::from_millis(200)))
        .factory("grid", move |client: &webtestkit::wire::WebDriverClient, opts: &BrowserOptions| {
            calls.fetch_add(1, Ordering::SeqCst);
            let mut caps = Capabilities::new("chrome");
            webtestkit::harness::apply_options(&mut caps, opts).map_err(|e| e.to_string())?;
            client.new_session(&remote_url, &caps, Provenance::Remote).map_err(|e| e.to_string())
        })
        .build();

    let f = h.resolve_fixture(&BrowserRequest::generic()).unwrap();
    assert_eq!(rig.engine.images_of_live(), vec!["selenoid/vnc_firefox:127.0".to_string()]);
    assert!(h.dispose(f).is_empty());

    let f = h.resolve_fixture(&BrowserRequest::remote(remote.url(), Capabilities::new("MicrosoftEdge")).with_count(2)).unwrap();
    assert_eq!(f.sessions.len(), 2);
    assert_eq!(f.sessions[0].handle().provenance, Provenance::Remote);
    h.dispose(f);

    let opts = BrowserOptions::default().argument("--mute-audio").preference("intl.accept_languages", json!("es"));
    let f = h.resolve_fixture(&BrowserRequest::custom("grid").with_options(opts)).unwrap();
    assert_eq!(custom_calls.load(Ordering::SeqCst), 1);
    assert_eq!(
        remote.last_capabilities().unwrap()["goog:chromeOptions"],
        json!({ "args": ["--mute-audio"], "prefs": { "intl.accept_languages": "es" } })
    );
    h.dispose(f);
    assert_eq!(remote.live_sessions(), 0);
    assert!(matches!(h.resolve_fixture(&BrowserRequest::custom("nope")), Err(HarnessError::UnknownFactory(_))));
    assert!(h.stats().balanced());
}

#[test]
fn dispose_errors_are_reported_not_raised() {
    let rig = Rig::new();
    rig.engine.set_faults(EngineFaults { fail_stop: true, driver_delete_status: Some(500), ..Default::default() });
    let h = rig.harness(rig.settings());
    let f = h.resolve_fixture(&BrowserRequest::docker(DockerBrowserSpec::new(BrowserKind::Chrome, VersionSelector::Latest))).unwrap();
    let errors = h.dispose(f);
    assert_eq!(errors.len(), 2, "{errors:?}");
    assert_eq!(rig.engine.live_containers(), 0);
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn plan_file_with_scenario_template() {
    let rig = Rig::new();
    let launcher = MockLauncher::new()
        .with_element("#join", MockElement { text: "Join".into(), navigates_to: Some("http://app.test/room".into()) });
    let h = Harness::builder(rig.settings())
        .probe(Arc::new(FixedProbe::new().with_output(BrowserKind::Chrome, "Google Chrome 126.0.1")))
        .launcher(Arc::new(launcher.clone()))
        .metadata(fixture_metadata())
        .farm(mock_farm(&rig.engine, &rig.out(), Duration::from_millis(200)))
        .build();
    let plan = write(
        rig.dir.path(),
        "plan.json",
        r##"{"session_mode":"per_test","tests":[
            {"name":"join","template":true,"browsers":[{"type":"local","kind":"chrome"}],
             "steps":[{"action":"navigate","url":"http://app.test/"},
                      {"action":"click","element":{"css":"#join"}},
                      {"action":"expect_url","url":"http://app.test/room"},
                      {"action":"execute","script":"return arguments[0]","args":[7],"expect":7,"on":1}]}]}"##,
    );
    let scenario = r#"{"browsers":[[{"type":"chrome","version":"latest"}],
                                   [{"type":"chrome-in-docker","version":"latest"}],
                                   [{"type":"firefox-in-docker","version":"beta"}]]}"#;
    let scenario = BrowserScenario::parse(scenario).unwrap();
    let plan = PlanFile::load(&plan).unwrap().into_plan(Some(&scenario)).unwrap();
    let names: Vec<_> = plan.tests.iter().map(|t| t.name.as_str()).collect();
    assert_eq!(names, ["join[chrome-latest]", "join[chrome-in-docker-latest]", "join[firefox-in-docker-beta]"]);
    let report = h.run_plan(&plan);
    // the fixed local browser comes first, so steps without `on` drive it
    assert_eq!(report.failed(), 0, "{:?}", report.outcomes);
    assert_eq!(launcher.launched(), 4);
    assert_eq!(rig.engine.created(), 2);
    assert!(report.stats.balanced());
    assert_eq!(rig.engine.images_of_live().len(), 0);
    let line = report.outcomes[0].to_json_line();
    let v: serde_json::Value = serde_json::from_str(&line).unwrap();
    assert_eq!(v["status"], "passed");
}
