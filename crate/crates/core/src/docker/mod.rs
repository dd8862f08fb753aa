//! Browsers in containers.
//!
//! Stable images come from the Aerokube-style repositories, beta and
//! development builds from a separate prerelease repository. Images already
//! bundle the matching driver, so no driver resolution happens here. A
//! container is ready once `GET <driver_url>/status` answers HTTP 200.

mod engine;
mod tags;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::browser::BrowserKind;
use crate::config::{keys, ConfigError, ConfigStore};
use crate::http::{HttpRequest, HttpTransport, TransportError};

pub use engine::{ContainerConfig, EngineClient, HttpEngine, MANAGED_LABEL};
pub use tags::{
    prerelease_tag, resolve_tag, ImageFamily, ImageRef, RegistryTags, Repositories, StaticTags, TagSource,
    VersionSelector,
};

/// Container port of the bundled WebDriver server.
pub const DRIVER_PORT: u16 = 4444;
/// Container port of the VNC server.
pub const VNC_PORT: u16 = 5900;

#[derive(Debug, Error)]
pub enum DockerError {
    #[error("container engine {op} failed (HTTP {status}): {message}")]
    Engine { op: &'static str, status: u16, message: String },
    #[error("container engine unreachable: {0}")]
    Transport(#[from] TransportError),
    #[error("registry error: {0}")]
    Registry(String),
    #[error("invalid version selector `{0}`")]
    InvalidSelector(String),
    #[error("{0} has no container images")]
    UnsupportedKind(BrowserKind),
    #[error("no {selector} image family for {kind}")]
    PrereleaseUnavailable { kind: BrowserKind, selector: String },
    #[error("tag `{tag}` not found in {repository}")]
    TagNotFound { repository: String, tag: String },
    #[error("latest-{requested} needs {needed} distinct majors in {repository}, found {majors}", needed = .requested + 1)]
    InsufficientHistory { repository: String, requested: u32, majors: usize },
    #[error("image pull failed: {0}")]
    Pull(String),
    #[error("container {container} has no host mapping for port {port}")]
    NoPortMapping { container: String, port: u16 },
    #[error("container {container} not ready after {waited:?}")]
    ReadinessTimeout { container: String, waited: Duration },
    #[error("recording retrieval failed: {0}")]
    Recording(String),
    #[error("invalid browser spec: {0}")]
    InvalidSpec(String),
    #[error("fleet startup failed: {}", .0.join("; "))]
    Fleet(Vec<String>),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Screen geometry `width x height x depth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Screen {
    pub width: u32,
    pub height: u32,
    pub depth: u32,
}

impl Default for Screen {
    fn default() -> Self {
        Screen { width: 1920, height: 1080, depth: 24 }
    }
}

impl FromStr for Screen {
    type Err = DockerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<u32> = s
            .split('x')
            .map(|p| p.trim().parse::<u32>())
            .collect::<Result<_, _>>()
            .map_err(|_| DockerError::InvalidSpec(format!("bad screen geometry `{s}`")))?;
        match parts[..] {
            [width, height, depth] if width > 0 && height > 0 && depth > 0 => Ok(Screen { width, height, depth }),
            _ => Err(DockerError::InvalidSpec(format!("bad screen geometry `{s}`"))),
        }
    }
}

impl fmt::Display for Screen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.width, self.height, self.depth)
    }
}

impl Serialize for Screen {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Screen {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DockerBrowserSpec {
    pub kind: BrowserKind,
    pub version: VersionSelector,
    #[serde(default)]
    pub vnc: bool,
    #[serde(default)]
    pub recording: bool,
    #[serde(default)]
    pub screen: Screen,
}

impl DockerBrowserSpec {
    pub fn new(kind: BrowserKind, version: VersionSelector) -> Self {
        DockerBrowserSpec { kind, version, vnc: false, recording: false, screen: Screen::default() }
    }

    pub fn validate(&self) -> Result<(), DockerError> {
        if !self.kind.dockerizable() {
            return Err(DockerError::UnsupportedKind(self.kind));
        }
        if let VersionSelector::LatestMinus(0) = self.version {
            return Err(DockerError::InvalidSelector("latest-0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContainerState {
    Starting,
    Ready,
    Stopped,
    Removed,
}

#[derive(Debug)]
struct HandleState {
    state: ContainerState,
    retain_recording: bool,
    recording_path: Option<PathBuf>,
}

/// A container started by the farm. State transitions are internally synchronized.
#[derive(Debug)]
pub struct ContainerHandle {
    pub container_id: String,
    pub image: ImageRef,
    driver_url: String,
    pub vnc_url: Option<String>,
    recording: bool,
    inner: Mutex<HandleState>,
}

impl ContainerHandle {
    /// Rebuild a handle for a container known to be running (e.g. from a manifest).
    pub fn attach(
        container_id: String,
        image: ImageRef,
        driver_url: String,
        vnc_url: Option<String>,
        recording_path: Option<PathBuf>,
    ) -> Self {
        ContainerHandle {
            container_id,
            image,
            driver_url,
            vnc_url,
            recording: recording_path.is_some(),
            inner: Mutex::new(HandleState {
                state: ContainerState::Ready,
                retain_recording: recording_path.is_some(),
                recording_path,
            }),
        }
    }

    pub fn state(&self) -> ContainerState {
        self.inner.lock().unwrap().state
    }

    /// Host-reachable WebDriver endpoint; only available while ready.
    pub fn driver_url(&self) -> Option<&str> {
        (self.state() == ContainerState::Ready).then_some(self.driver_url.as_str())
    }

    pub fn recording_enabled(&self) -> bool {
        self.recording
    }

    /// Where the recording will be copied on removal, if it is retained.
    pub fn recording_path(&self) -> Option<PathBuf> {
        let inner = self.inner.lock().unwrap();
        if inner.retain_recording {
            inner.recording_path.clone()
        } else {
            None
        }
    }

    /// Choose whether the recording is kept and under which file name.
    pub fn set_recording_retention(&self, retain: bool, path: Option<PathBuf>) {
        let mut inner = self.inner.lock().unwrap();
        inner.retain_recording = retain && self.recording;
        if let Some(p) = path {
            inner.recording_path = Some(p);
        }
    }
}

/// Knobs of the farm, usually read from configuration.
#[derive(Debug, Clone)]
pub struct FarmSettings {
    pub repositories: Repositories,
    pub wait_timeout: Duration,
    pub poll_interval: Duration,
    pub parallelism: usize,
    pub recording_path_in_container: String,
    pub out_dir: PathBuf,
    /// Host name under which mapped ports are published.
    pub published_host: String,
    pub shm_size: Option<u64>,
}

impl Default for FarmSettings {
    fn default() -> Self {
        FarmSettings::from_config(&ConfigStore::defaults()).expect("defaults are well typed")
    }
}

impl FarmSettings {
    pub fn from_config(config: &ConfigStore) -> Result<Self, ConfigError> {
        Ok(FarmSettings {
            repositories: Repositories::from_config(config)?,
            wait_timeout: config.duration(keys::DOCKER_WAIT_TIMEOUT)?,
            poll_interval: Duration::from_millis(config.integer(keys::DOCKER_POLL_INTERVAL_MS)?.max(1) as u64),
            parallelism: config.integer(keys::DOCKER_FLEET_PARALLELISM)?.max(1) as usize,
            recording_path_in_container: config.string(keys::DOCKER_RECORDING_PATH)?,
            out_dir: config.path(keys::OUTPUT_FOLDER)?,
            published_host: HttpEngine::published_host(&config.string(keys::DOCKER_HOST)?),
            shm_size: Some(2 * 1024 * 1024 * 1024),
        })
    }
}

/// Starts, tracks and disposes browser containers.
#[derive(Clone)]
pub struct DockerFarm {
    engine: Arc<dyn EngineClient>,
    tags: Arc<dyn TagSource>,
    probe_transport: Arc<dyn HttpTransport>,
    settings: FarmSettings,
}

impl DockerFarm {
    pub fn new(
        engine: Arc<dyn EngineClient>,
        tags: Arc<dyn TagSource>,
        probe_transport: Arc<dyn HttpTransport>,
        settings: FarmSettings,
    ) -> Self {
        DockerFarm { engine, tags, probe_transport, settings }
    }

    pub fn engine(&self) -> &Arc<dyn EngineClient> {
        &self.engine
    }

    pub fn settings(&self) -> &FarmSettings {
        &self.settings
    }

    /// Resolve the image for `spec` from the repository's current tag list.
    pub fn resolve_image(&self, spec: &DockerBrowserSpec) -> Result<ImageRef, DockerError> {
        spec.validate()?;
        let repository = self.settings.repositories.for_selector(spec.kind, &spec.version)?;
        let tags = self.tags.tags(repository)?;
        resolve_tag(spec.kind, &spec.version, &tags, &self.settings.repositories)
    }

    fn container_config(&self, spec: &DockerBrowserSpec, image: &ImageRef) -> ContainerConfig {
        let vnc = spec.vnc || spec.recording;
        let mut env = vec![format!("SCREEN_RESOLUTION={}", spec.screen)];
        let mut exposed_ports = vec![DRIVER_PORT];
        if vnc {
            env.push("ENABLE_VNC=true".into());
            exposed_ports.push(VNC_PORT);
        }
        if spec.recording {
            env.push("ENABLE_VIDEO=true".into());
            env.push(format!("VIDEO_PATH={}", self.settings.recording_path_in_container));
        }
        let labels = BTreeMap::from([
            (MANAGED_LABEL.to_string(), "true".to_string()),
            ("io.webtestkit.browser".to_string(), spec.kind.to_string()),
        ]);
        ContainerConfig { image: image.name(), env, exposed_ports, labels, shm_size: self.settings.shm_size }
    }

    /// Pull (when missing), create, start and wait for the in-container driver.
    /// On any failure after creation the container is removed.
    pub fn start_browser(&self, spec: &DockerBrowserSpec) -> Result<Arc<ContainerHandle>, DockerError> {
        let image = self.resolve_image(spec)?;
        self.ensure_image(&image)?;
        self.start_container(spec, &image)
    }

    fn ensure_image(&self, image: &ImageRef) -> Result<(), DockerError> {
        if !self.engine.image_present(&image.name())? {
            log::info!("pulling {}", image.name());
            self.engine.pull(&image.repository, &image.tag)?;
        }
        Ok(())
    }

    fn start_container(&self, spec: &DockerBrowserSpec, image: &ImageRef) -> Result<Arc<ContainerHandle>, DockerError> {
        let config = self.container_config(spec, image);
        let id = self.engine.create(&config)?;
        let mut started = false;
        let result = self.bring_up(&id, spec, image, &mut started);
        if result.is_err() {
            if started {
                if let Err(e) = self.engine.stop(&id) {
                    log::warn!("stopping failed container {id}: {e}");
                }
            }
            if let Err(e) = self.engine.remove(&id) {
                log::warn!("removing failed container {id}: {e}");
            }
        }
        result
    }

    fn bring_up(
        &self,
        id: &str,
        spec: &DockerBrowserSpec,
        image: &ImageRef,
        started: &mut bool,
    ) -> Result<Arc<ContainerHandle>, DockerError> {
        self.engine.start(id)?;
        *started = true;
        let host = &self.settings.published_host;
        let driver_port = self
            .engine
            .host_port(id, DRIVER_PORT)?
            .ok_or_else(|| DockerError::NoPortMapping { container: id.to_string(), port: DRIVER_PORT })?;
        let vnc_url = if spec.vnc || spec.recording {
            let port = self
                .engine
                .host_port(id, VNC_PORT)?
                .ok_or_else(|| DockerError::NoPortMapping { container: id.to_string(), port: VNC_PORT })?;
            Some(format!("vnc://{host}:{port}"))
        } else {
            None
        };
        let driver_url = format!("http://{host}:{driver_port}");
        self.wait_ready(id, &driver_url)?;
        if let Some(vnc) = &vnc_url {
            log::info!("container {id} VNC server at {vnc}");
        }
        let recording_path = spec.recording.then(|| {
            self.settings.out_dir.join(format!("{}.mp4", crate::sanitize_file_name(&short_id(id))))
        });
        Ok(Arc::new(ContainerHandle {
            container_id: id.to_string(),
            image: image.clone(),
            driver_url,
            vnc_url,
            recording: spec.recording,
            inner: Mutex::new(HandleState {
                state: ContainerState::Ready,
                retain_recording: spec.recording,
                recording_path,
            }),
        }))
    }

    fn wait_ready(&self, id: &str, driver_url: &str) -> Result<(), DockerError> {
        let started = Instant::now();
        let status = format!("{driver_url}/status");
        loop {
            if let Ok(response) = self.probe_transport.send(&HttpRequest::get(status.clone())) {
                if response.status == 200 {
                    return Ok(());
                }
            }
            if started.elapsed() >= self.settings.wait_timeout {
                return Err(DockerError::ReadinessTimeout { container: id.to_string(), waited: started.elapsed() });
            }
            std::thread::sleep(self.settings.poll_interval);
        }
    }

    /// Stop, collect the recording when retained, then remove. Idempotent;
    /// the handle ends `Removed` even when the engine reports errors.
    pub fn stop_and_remove(&self, handle: &ContainerHandle) -> Result<(), DockerError> {
        let mut inner = handle.inner.lock().unwrap();
        if inner.state == ContainerState::Removed {
            return Ok(());
        }
        let mut first_error: Option<DockerError> = None;
        if inner.state != ContainerState::Stopped {
            if let Err(e) = self.engine.stop(&handle.container_id) {
                first_error.get_or_insert(e);
            }
            inner.state = ContainerState::Stopped;
        }
        if handle.recording && inner.retain_recording {
            if let Some(dest) = inner.recording_path.clone() {
                if let Err(e) = self.copy_recording(&handle.container_id, &dest) {
                    first_error.get_or_insert(e);
                }
            }
        }
        if let Err(e) = self.engine.remove(&handle.container_id) {
            first_error.get_or_insert(e);
        }
        inner.state = ContainerState::Removed;
        first_error.map_or(Ok(()), Err)
    }

    fn copy_recording(&self, id: &str, dest: &Path) -> Result<(), DockerError> {
        let archive = self.engine.copy_from(id, &self.settings.recording_path_in_container)?;
        let mut tar = tar::Archive::new(archive.as_slice());
        let rec_err = |e: std::io::Error| DockerError::Recording(e.to_string());
        for entry in tar.entries().map_err(rec_err)? {
            let mut entry = entry.map_err(rec_err)?;
            if entry.header().entry_type().is_file() {
                let mut bytes = Vec::new();
                entry.read_to_end(&mut bytes).map_err(rec_err)?;
                if let Some(parent) = dest.parent() {
                    std::fs::create_dir_all(parent).map_err(rec_err)?;
                }
                std::fs::write(dest, bytes).map_err(rec_err)?;
                return Ok(());
            }
        }
        Err(DockerError::Recording(format!("archive from {id} holds no file")))
    }

    /// Start `count` identical containers with bounded parallelism. All or
    /// nothing: on any failure the members that did start are disposed.
    pub fn start_fleet(&self, spec: &DockerBrowserSpec, count: usize) -> Result<Vec<Arc<ContainerHandle>>, DockerError> {
        if count == 0 {
            return Err(DockerError::InvalidSpec("fleet size must be at least 1".into()));
        }
        let image = self.resolve_image(spec)?;
        self.ensure_image(&image)?;
        let results = crate::exec::bounded_indexed(count, self.settings.parallelism, |_| self.start_container(spec, &image));
        let mut handles = Vec::with_capacity(count);
        let mut failures = Vec::new();
        for (idx, result) in results.into_iter().enumerate() {
            match result {
                Ok(h) => handles.push(h),
                Err(e) => failures.push(format!("member {idx}: {e}")),
            }
        }
        if failures.is_empty() {
            return Ok(handles);
        }
        for handle in &handles {
            if let Err(e) = self.stop_and_remove(handle) {
                log::warn!("rolling back container {}: {e}", handle.container_id);
            }
        }
        Err(DockerError::Fleet(failures))
    }
}

fn short_id(id: &str) -> String {
    id.chars().take(12).collect()
}
