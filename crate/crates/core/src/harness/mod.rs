//! Test harness: resolves the browsers a test declares, runs the body, captures
//! failure artifacts and disposes every acquired resource afterwards.

mod launcher;
mod plan;
mod request;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

pub use launcher::{DriverLauncher, DriverProcess, ProcessLauncher};
pub use plan::{
    run_steps, summary_table, Artifact, ArtifactKind, Condition, ElementSpec, PlanFile, PlanTest, SessionMode, Step,
    TestBody, TestCase, TestContext, TestOutcome, TestPlan, TestStatus,
};
pub use request::{apply_options, capabilities_for, vendor_key, BrowserOptions, BrowserRequest, Target};

use crate::browser::{BrowserKind, Platform};
use crate::config::{keys, ConfigError, ConfigStore};
use crate::docker::{ContainerHandle, DockerBrowserSpec, DockerError, DockerFarm, VersionSelector};
use crate::driver::{
    detect_browser_version, ensure_driver, load_metadata, BrowserProbe, DriverError, MetadataSource, ResolutionMetadata,
};
use crate::http::{DefaultTransport, HttpRequest, HttpTransport};
use crate::scenario::BrowserType;
use crate::wire::{decode_png, Provenance, ScreenshotMode, Session, WebDriverClient, WireError};
use crate::sanitize_file_name;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Docker(#[from] DockerError),
    #[error("no container engine configured")]
    NoEngine,
    #[error("driver launch failed: {0}")]
    Launch(String),
    #[error("no session factory named `{0}`")]
    UnknownFactory(String),
    #[error("session factory `{name}` failed: {reason}")]
    Factory { name: String, reason: String },
    #[error("invalid browser option: {0}")]
    InvalidOption(String),
    #[error("invalid default browser `{0}`")]
    InvalidDefault(String),
    #[error("invalid test plan: {0}")]
    InvalidPlan(String),
}

/// User-supplied way of creating sessions, referenced by name from requests.
pub trait SessionFactory: Send + Sync {
    fn create(&self, client: &WebDriverClient, options: &BrowserOptions) -> Result<Session, String>;
}

impl<F> SessionFactory for F
where
    F: Fn(&WebDriverClient, &BrowserOptions) -> Result<Session, String> + Send + Sync,
{
    fn create(&self, client: &WebDriverClient, options: &BrowserOptions) -> Result<Session, String> {
        self(client, options)
    }
}

#[derive(Debug, Clone)]
pub struct HarnessSettings {
    pub out_dir: PathBuf,
    pub screenshot_on_failure: bool,
    pub screenshot_always: bool,
    pub screenshot_mode: ScreenshotMode,
    pub recording: bool,
    pub recording_when_failure: bool,
    pub vnc: bool,
    pub default_browser: String,
    pub default_version: String,
    pub platform: Platform,
    pub driver_cache: PathBuf,
    pub metadata: MetadataSource,
    pub metadata_ttl: Duration,
    pub connect_timeout: Duration,
}

impl HarnessSettings {
    pub fn from_config(config: &ConfigStore) -> Result<Self, ConfigError> {
        let screenshot_mode = match config.string(keys::SCREENSHOT_FORMAT)?.as_str() {
            "base64" => ScreenshotMode::Base64,
            _ => ScreenshotMode::PngFile,
        };
        Ok(HarnessSettings {
            out_dir: config.path(keys::OUTPUT_FOLDER)?,
            screenshot_on_failure: config.bool(keys::SCREENSHOT)?,
            screenshot_always: config.bool(keys::SCREENSHOT_ALWAYS)?,
            screenshot_mode,
            recording: config.bool(keys::RECORDING)?,
            recording_when_failure: config.bool(keys::RECORDING_WHEN_FAILURE)?,
            vnc: config.bool(keys::VNC)?,
            default_browser: config.string(keys::DEFAULT_BROWSER)?,
            default_version: config.string(keys::DEFAULT_VERSION)?,
            platform: Platform::current().unwrap_or(Platform::LinuxX64),
            driver_cache: config.path(keys::DRIVER_CACHE_PATH)?,
            metadata: MetadataSource::Url(config.string(keys::DRIVER_METADATA_URL)?),
            metadata_ttl: config.duration(keys::DRIVER_METADATA_TTL)?,
            connect_timeout: config.duration(keys::CONNECT_TIMEOUT)?,
        })
    }
}

impl Default for HarnessSettings {
    fn default() -> Self {
        HarnessSettings::from_config(&ConfigStore::defaults()).expect("defaults are well typed")
    }
}

/// Resource counters of a plan run; acquisitions and releases must balance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LifecycleStats {
    pub resolutions: usize,
    pub disposals: usize,
    pub sessions_created: usize,
    pub sessions_deleted: usize,
    pub containers_started: usize,
    pub containers_removed: usize,
    pub drivers_launched: usize,
    pub drivers_terminated: usize,
}

impl LifecycleStats {
    pub fn balanced(&self) -> bool {
        self.resolutions == self.disposals
            && self.sessions_created == self.sessions_deleted
            && self.containers_started == self.containers_removed
            && self.drivers_launched == self.drivers_terminated
    }
}

#[derive(Debug, Clone)]
pub struct PlanReport {
    pub outcomes: Vec<TestOutcome>,
    pub stats: LifecycleStats,
}

impl PlanReport {
    pub fn failed(&self) -> usize {
        self.outcomes.iter().filter(|o| o.status == TestStatus::Failed).count()
    }
}

/// Live resources behind one request.
#[derive(Default)]
pub struct Fixture {
    pub sessions: Vec<Arc<Session>>,
    pub containers: Vec<Arc<ContainerHandle>>,
    processes: Vec<Box<dyn DriverProcess>>,
}

impl std::fmt::Debug for Fixture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fixture")
            .field("sessions", &self.sessions)
            .field("containers", &self.containers)
            .field("processes", &self.processes.len())
            .finish()
    }
}

struct SharedFixture {
    fixture: Fixture,
    last_test: usize,
    any_failed: bool,
}

pub struct HarnessBuilder {
    settings: HarnessSettings,
    transport: Option<Arc<dyn HttpTransport>>,
    probe: Option<Arc<dyn BrowserProbe>>,
    launcher: Option<Arc<dyn DriverLauncher>>,
    farm: Option<DockerFarm>,
    metadata: Option<Arc<ResolutionMetadata>>,
    factories: HashMap<String, Arc<dyn SessionFactory>>,
}

impl HarnessBuilder {
    pub fn transport(mut self, transport: Arc<dyn HttpTransport>) -> Self {
        self.transport = Some(transport);
        self
    }

    pub fn probe(mut self, probe: Arc<dyn BrowserProbe>) -> Self {
        self.probe = Some(probe);
        self
    }

    pub fn launcher(mut self, launcher: Arc<dyn DriverLauncher>) -> Self {
        self.launcher = Some(launcher);
        self
    }

    pub fn farm(mut self, farm: DockerFarm) -> Self {
        self.farm = Some(farm);
        self
    }

    /// Preloaded driver metadata; otherwise it is loaded on first use.
    pub fn metadata(mut self, metadata: ResolutionMetadata) -> Self {
        self.metadata = Some(Arc::new(metadata));
        self
    }

    pub fn factory(mut self, name: impl Into<String>, factory: impl SessionFactory + 'static) -> Self {
        self.factories.insert(name.into(), Arc::new(factory));
        self
    }

    pub fn build(self) -> Harness {
        let settings = self.settings;
        let transport = self.transport.unwrap_or_else(|| {
            Arc::new(DefaultTransport::new(settings.connect_timeout, Duration::from_secs(300)))
        });
        let probe = self
            .probe
            .unwrap_or_else(|| Arc::new(crate::driver::CommandProbe::new(settings.platform)) as Arc<dyn BrowserProbe>);
        let launcher = self
            .launcher
            .unwrap_or_else(|| Arc::new(ProcessLauncher::new(transport.clone(), Duration::from_secs(30))));
        Harness {
            client: WebDriverClient::new(transport.clone()),
            transport,
            probe,
            launcher,
            farm: self.farm,
            metadata: Mutex::new(self.metadata),
            factories: self.factories,
            stats: Mutex::new(LifecycleStats::default()),
            settings,
        }
    }
}

pub struct Harness {
    settings: HarnessSettings,
    transport: Arc<dyn HttpTransport>,
    client: WebDriverClient,
    probe: Arc<dyn BrowserProbe>,
    launcher: Arc<dyn DriverLauncher>,
    farm: Option<DockerFarm>,
    metadata: Mutex<Option<Arc<ResolutionMetadata>>>,
    factories: HashMap<String, Arc<dyn SessionFactory>>,
    stats: Mutex<LifecycleStats>,
}

impl Harness {
    pub fn builder(settings: HarnessSettings) -> HarnessBuilder {
        HarnessBuilder {
            settings,
            transport: None,
            probe: None,
            launcher: None,
            farm: None,
            metadata: None,
            factories: HashMap::new(),
        }
    }

    pub fn settings(&self) -> &HarnessSettings {
        &self.settings
    }

    pub fn client(&self) -> &WebDriverClient {
        &self.client
    }

    pub fn stats(&self) -> LifecycleStats {
        *self.stats.lock().unwrap()
    }

    fn bump(&self, f: impl FnOnce(&mut LifecycleStats)) {
        f(&mut self.stats.lock().unwrap());
    }

    pub fn evaluate_condition(&self, condition: &Condition) -> bool {
        match condition {
            Condition::BrowserAvailable { browser } => matches!(self.probe.version_output(*browser), Ok(Some(_))),
            Condition::DockerAvailable => self.farm.as_ref().is_some_and(|f| f.engine().ping().is_ok()),
            Condition::DriverUrlOnline { url } => {
                let status = format!("{}/status", url.trim_end_matches('/'));
                self.transport.send(&HttpRequest::get(status)).is_ok()
            }
        }
    }

    fn metadata(&self) -> Result<Arc<ResolutionMetadata>, HarnessError> {
        let mut slot = self.metadata.lock().unwrap();
        if let Some(m) = slot.as_ref() {
            return Ok(m.clone());
        }
        let loaded = Arc::new(load_metadata(
            &self.settings.metadata,
            self.transport.as_ref(),
            &self.settings.driver_cache,
            self.settings.metadata_ttl,
        )?);
        *slot = Some(loaded.clone());
        Ok(loaded)
    }

    fn generic_target(&self) -> Result<Target, HarnessError> {
        let ty: BrowserType = self
            .settings
            .default_browser
            .parse()
            .map_err(|e: String| HarnessError::InvalidDefault(format!("{}: {e}", self.settings.default_browser)))?;
        let version: VersionSelector = self
            .settings
            .default_version
            .parse()
            .map_err(|e: DockerError| HarnessError::InvalidDefault(e.to_string()))?;
        if ty.docker {
            Ok(Target::Docker(DockerBrowserSpec::new(ty.kind, version)))
        } else if version == VersionSelector::Latest {
            Ok(Target::Local { kind: ty.kind })
        } else {
            Err(HarnessError::InvalidDefault(format!("local {} cannot pin version `{version}`", ty.kind)))
        }
    }

    fn new_session(&self, fixture: &mut Fixture, endpoint: &str, caps: &crate::wire::Capabilities, provenance: Provenance) -> Result<(), HarnessError> {
        let session = self.client.new_session(endpoint, caps, provenance)?;
        self.bump(|s| s.sessions_created += 1);
        fixture.sessions.push(Arc::new(session));
        Ok(())
    }

    fn resolve_into(&self, request: &BrowserRequest, target: &Target, fixture: &mut Fixture) -> Result<(), HarnessError> {
        if request.count == 0 {
            return Err(HarnessError::InvalidPlan("browser count must be at least 1".into()));
        }
        match target {
            Target::Local { kind } => self.resolve_local(*kind, request, fixture),
            Target::Remote { url, capabilities } => {
                let mut caps = capabilities.clone();
                apply_options(&mut caps, &request.options)?;
                for _ in 0..request.count {
                    self.new_session(fixture, url, &caps, Provenance::Remote)?;
                }
                Ok(())
            }
            Target::Docker(spec) => self.resolve_docker(spec, request, fixture),
            Target::Generic => {
                let target = self.generic_target()?;
                self.resolve_into(request, &target, fixture)
            }
            Target::Custom { name } => {
                let factory = self.factories.get(name).ok_or_else(|| HarnessError::UnknownFactory(name.clone()))?;
                for _ in 0..request.count {
                    let session = factory
                        .create(&self.client, &request.options)
                        .map_err(|reason| HarnessError::Factory { name: name.clone(), reason })?;
                    self.bump(|s| s.sessions_created += 1);
                    fixture.sessions.push(Arc::new(session));
                }
                Ok(())
            }
        }
    }

    fn resolve_local(&self, kind: BrowserKind, request: &BrowserRequest, fixture: &mut Fixture) -> Result<(), HarnessError> {
        let caps = capabilities_for(kind, &request.options)?;
        let version =
            detect_browser_version(kind, self.probe.as_ref())?.ok_or(DriverError::BrowserNotFound { kind })?;
        let metadata = if kind.driver_is_system_provided() {
            Arc::new(ResolutionMetadata::empty("system"))
        } else {
            self.metadata()?
        };
        let artifact = ensure_driver(
            kind,
            &version,
            &metadata,
            &self.settings.driver_cache,
            self.settings.platform,
            self.transport.as_ref(),
        )?;
        let process = self.launcher.launch(&artifact).map_err(HarnessError::Launch)?;
        self.bump(|s| s.drivers_launched += 1);
        let url = process.url().to_string();
        fixture.processes.push(process);
        for _ in 0..request.count {
            self.new_session(fixture, &url, &caps, Provenance::Local)?;
        }
        Ok(())
    }

    fn resolve_docker(&self, spec: &DockerBrowserSpec, request: &BrowserRequest, fixture: &mut Fixture) -> Result<(), HarnessError> {
        let farm = self.farm.as_ref().ok_or(HarnessError::NoEngine)?;
        let caps = capabilities_for(spec.kind, &request.options)?;
        let mut spec = spec.clone();
        spec.recording |= self.settings.recording || self.settings.recording_when_failure;
        spec.vnc |= self.settings.vnc;
        let containers = farm.start_fleet(&spec, request.count)?;
        self.bump(|s| s.containers_started += containers.len());
        fixture.containers.extend(containers.iter().cloned());
        for container in &containers {
            let url = container
                .driver_url()
                .ok_or_else(|| HarnessError::Docker(DockerError::InvalidSpec("container is not ready".into())))?
                .to_string();
            self.new_session(fixture, &url, &caps, Provenance::Docker)?;
        }
        Ok(())
    }

    /// Acquire every browser of `request`. On failure whatever was acquired
    /// is released before the error is returned.
    pub fn resolve_fixture(&self, request: &BrowserRequest) -> Result<Fixture, HarnessError> {
        let mut fixture = Fixture::default();
        match self.resolve_into(request, &request.target, &mut fixture) {
            Ok(()) => {
                self.bump(|s| s.resolutions += 1);
                Ok(fixture)
            }
            Err(e) => {
                self.release(fixture);
                Err(e)
            }
        }
    }

    fn release(&self, mut fixture: Fixture) -> Vec<String> {
        let mut errors = Vec::new();
        for session in &fixture.sessions {
            let was_live = session.is_live();
            if let Err(e) = session.delete() {
                errors.push(format!("session {}: {e}", session.id()));
            }
            if was_live {
                self.bump(|s| s.sessions_deleted += 1);
            }
        }
        for process in &mut fixture.processes {
            if let Err(e) = process.terminate() {
                errors.push(format!("driver at {}: {e}", process.url()));
            }
            self.bump(|s| s.drivers_terminated += 1);
        }
        if let Some(farm) = &self.farm {
            for container in &fixture.containers {
                if let Err(e) = farm.stop_and_remove(container) {
                    errors.push(format!("container {}: {e}", container.container_id));
                }
                self.bump(|s| s.containers_removed += 1);
            }
        }
        for e in &errors {
            log::warn!("dispose: {e}");
        }
        errors
    }

    /// Release a resolved fixture. Errors are logged and returned, never raised.
    pub fn dispose(&self, fixture: Fixture) -> Vec<String> {
        self.bump(|s| s.disposals += 1);
        self.release(fixture)
    }

    /// Screenshot every session, named `<test>-<session>-<utc>.png` (or `.b64`).
    pub fn capture_failure_artifacts(&self, test: &str, sessions: &[Arc<Session>]) -> Vec<Artifact> {
        let mut artifacts = Vec::new();
        for session in sessions.iter().filter(|s| s.is_live()) {
            let stem = artifact_stem(test, session.id());
            let result = session.screenshot_base64().and_then(|payload| {
                std::fs::create_dir_all(&self.settings.out_dir).map_err(|e| WireError::Io(e.to_string()))?;
                let path = match self.settings.screenshot_mode {
                    ScreenshotMode::PngFile => {
                        let path = self.settings.out_dir.join(format!("{stem}.png"));
                        std::fs::write(&path, decode_png(&payload)?).map(|_| path)
                    }
                    ScreenshotMode::Base64 => {
                        let path = self.settings.out_dir.join(format!("{stem}.b64"));
                        std::fs::write(&path, payload).map(|_| path)
                    }
                };
                path.map_err(|e| WireError::Io(e.to_string()))
            });
            match result {
                Ok(path) => artifacts.push(Artifact { kind: ArtifactKind::Screenshot, path }),
                Err(e) => log::warn!("screenshot of {} for {test} failed: {e}", session.id()),
            }
        }
        artifacts
    }

    fn wants_screenshot(&self, failed: bool) -> bool {
        self.settings.screenshot_always || (failed && self.settings.screenshot_on_failure)
    }

    /// Decide recording retention for `fixture` and return the expected paths.
    fn arrange_recordings(&self, test: &str, fixture: &Fixture, failed: bool) -> Vec<PathBuf> {
        let retain = !self.settings.recording_when_failure || failed;
        let mut paths = Vec::new();
        for (i, container) in fixture.containers.iter().enumerate() {
            if !container.recording_enabled() {
                continue;
            }
            let sid = fixture.sessions.get(i).map(|s| s.id().to_string()).unwrap_or_else(|| container.container_id.clone());
            let path = self.settings.out_dir.join(format!("{}.mp4", artifact_stem(test, &sid)));
            container.set_recording_retention(retain, Some(path.clone()));
            if retain {
                paths.push(path);
            }
        }
        paths
    }

    fn recordings_written(paths: Vec<PathBuf>) -> Vec<Artifact> {
        paths
            .into_iter()
            .filter(|p| p.is_file())
            .map(|path| Artifact { kind: ArtifactKind::Recording, path })
            .collect()
    }

    fn run_body(test: &TestCase, ctx: &TestContext) -> Result<(), String> {
        match catch_unwind(AssertUnwindSafe(|| (test.body)(ctx))) {
            Ok(result) => result,
            Err(panic) => Err(panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .map(|s| format!("panicked: {s}"))
                .unwrap_or_else(|| "panicked".into())),
        }
    }

    /// Run every test of `plan` in order.
    pub fn run_plan(&self, plan: &TestPlan) -> PlanReport {
        let before = self.stats();
        let mut outcomes = Vec::with_capacity(plan.tests.len());
        let mut shared: Vec<(String, SharedFixture)> = Vec::new();

        for (index, test) in plan.tests.iter().enumerate() {
            let started = Instant::now();
            if let Some(c) = plan.conditions.iter().chain(&test.conditions).find(|c| !self.evaluate_condition(c)) {
                outcomes.push(TestOutcome {
                    name: test.name.clone(),
                    status: TestStatus::Skipped,
                    artifacts: Vec::new(),
                    duration: started.elapsed(),
                    message: Some(format!("condition not met: {c:?}")),
                });
                continue;
            }

            let outcome = match plan.session_mode {
                SessionMode::PerTest => self.run_per_test(test, started),
                SessionMode::SingleSession => self.run_shared(test, index, started, &mut shared),
            };
            outcomes.push(outcome);
        }

        // shared fixtures live until the plan ends
        for (_, entry) in shared {
            let test_name = plan.tests[entry.last_test].name.clone();
            let paths = self.arrange_recordings(&test_name, &entry.fixture, entry.any_failed);
            self.dispose(entry.fixture);
            // every test pushes exactly one outcome, so indices line up
            outcomes[entry.last_test].artifacts.extend(Self::recordings_written(paths));
        }

        let after = self.stats();
        let stats = LifecycleStats {
            resolutions: after.resolutions - before.resolutions,
            disposals: after.disposals - before.disposals,
            sessions_created: after.sessions_created - before.sessions_created,
            sessions_deleted: after.sessions_deleted - before.sessions_deleted,
            containers_started: after.containers_started - before.containers_started,
            containers_removed: after.containers_removed - before.containers_removed,
            drivers_launched: after.drivers_launched - before.drivers_launched,
            drivers_terminated: after.drivers_terminated - before.drivers_terminated,
        };
        PlanReport { outcomes, stats }
    }

    fn run_per_test(&self, test: &TestCase, started: Instant) -> TestOutcome {
        let mut fixtures = Vec::with_capacity(test.requests.len());
        let mut failure = None;
        for request in &test.requests {
            match self.resolve_fixture(request) {
                Ok(f) => fixtures.push(f),
                Err(e) => {
                    failure = Some(format!("browser resolution failed: {e}"));
                    break;
                }
            }
        }
        let mut artifacts = Vec::new();
        let mut message = failure.clone();
        if failure.is_none() {
            let groups = fixtures.iter().map(|f| f.sessions.clone()).collect();
            let ctx = TestContext::new(&test.name, &self.settings.out_dir, groups);
            if let Err(e) = Self::run_body(test, &ctx) {
                message = Some(e);
            }
        }
        let failed = message.is_some();
        if failure.is_none() && self.wants_screenshot(failed) {
            let sessions: Vec<_> = fixtures.iter().flat_map(|f| f.sessions.iter().cloned()).collect();
            artifacts.extend(self.capture_failure_artifacts(&test.name, &sessions));
        }
        let mut recordings = Vec::new();
        for fixture in fixtures {
            recordings.extend(self.arrange_recordings(&test.name, &fixture, failed));
            self.dispose(fixture);
        }
        artifacts.extend(Self::recordings_written(recordings));
        TestOutcome {
            name: test.name.clone(),
            status: if failed { TestStatus::Failed } else { TestStatus::Passed },
            artifacts,
            duration: started.elapsed(),
            message,
        }
    }

    fn run_shared(
        &self,
        test: &TestCase,
        index: usize,
        started: Instant,
        shared: &mut Vec<(String, SharedFixture)>,
    ) -> TestOutcome {
        let mut slots = Vec::with_capacity(test.requests.len());
        let mut message = None;
        for request in &test.requests {
            let key = request.cache_key();
            // a request listed twice in one test gets two fixtures
            let taken = |slot: usize| slots.contains(&slot);
            if let Some(slot) = shared.iter().enumerate().position(|(i, (k, _))| *k == key && !taken(i)) {
                slots.push(slot);
                continue;
            }
            match self.resolve_fixture(request) {
                Ok(fixture) => {
                    shared.push((key, SharedFixture { fixture, last_test: index, any_failed: false }));
                    slots.push(shared.len() - 1);
                }
                Err(e) => {
                    message = Some(format!("browser resolution failed: {e}"));
                    break;
                }
            }
        }
        let resolved = message.is_none();
        for &slot in &slots {
            shared[slot].1.last_test = index;
        }
        if resolved {
            let groups = slots.iter().map(|&s| shared[s].1.fixture.sessions.clone()).collect();
            let ctx = TestContext::new(&test.name, &self.settings.out_dir, groups);
            if let Err(e) = Self::run_body(test, &ctx) {
                message = Some(e);
            }
        }
        let failed = message.is_some();
        for &slot in &slots {
            shared[slot].1.any_failed |= failed;
        }
        let mut artifacts = Vec::new();
        if resolved && self.wants_screenshot(failed) {
            let sessions: Vec<_> = slots.iter().flat_map(|&s| shared[s].1.fixture.sessions.iter().cloned()).collect();
            artifacts.extend(self.capture_failure_artifacts(&test.name, &sessions));
        }
        TestOutcome {
            name: test.name.clone(),
            status: if failed { TestStatus::Failed } else { TestStatus::Passed },
            artifacts,
            duration: started.elapsed(),
            message,
        }
    }
}

fn artifact_stem(test: &str, session_id: &str) -> String {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
    format!("{}-{}-{stamp}", sanitize_file_name(test), sanitize_file_name(session_id))
}
