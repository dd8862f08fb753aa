use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use serde_json::{json, Value};

use crate::server::{query_param, RecordedRequest, Reply, Served};
use crate::webdriver::{MockWebDriver, WebDriverFaults};

/// Bytes of the fake recording copied out of containers.
pub const FAKE_MP4: &[u8] = b"\x00\x00\x00\x18ftypmp42\x00\x00\x00\x00mp42isomfake-recording";

/// 1-based indices of container operations that should fail.
#[derive(Debug, Clone, Default)]
pub struct EngineFaults {
    pub fail_create_at: Option<usize>,
    pub fail_start_at: Option<usize>,
    /// The driver of the n-th created container never becomes ready.
    pub not_ready_at: Option<usize>,
    pub fail_stop: bool,
    pub fail_pull: bool,
    /// The driver of the n-th created container rejects new sessions.
    pub reject_sessions_at: Option<usize>,
    /// Session deletes on every driver answer this status.
    pub driver_delete_status: Option<u16>,
}

struct Container {
    driver: Option<MockWebDriver>,
    labels: BTreeMap<String, String>,
    env: Vec<String>,
    exposed: Vec<String>,
    started: bool,
    image: String,
}

#[derive(Default)]
struct State {
    images: BTreeSet<String>,
    tags: BTreeMap<String, Vec<String>>,
    containers: BTreeMap<String, Container>,
    faults: EngineFaults,
    creates: usize,
    // containers that actually came into existence
    made: usize,
    starts: usize,
    removed: usize,
    pulls: usize,
    // sessions of drivers whose containers are gone
    gone_created: usize,
    gone_deleted: usize,
    calls: Vec<String>,
    next: u64,
}

/// Subset of the Docker Engine API plus a registry tag listing. Every created
/// container runs its own [`MockWebDriver`].
pub struct MockEngine {
    served: Served,
    state: Arc<Mutex<State>>,
}

impl MockEngine {
    pub fn start() -> Self {
        Self::with_faults(EngineFaults::default())
    }

    pub fn with_faults(faults: EngineFaults) -> Self {
        let state = Arc::new(Mutex::new(State { faults, ..Default::default() }));
        let shared = state.clone();
        let served = Served::start(move |req| {
            let mut st = shared.lock().unwrap();
            st.calls.push(format!("{} {}", req.method, req.path));
            handle(&mut st, &req)
        });
        MockEngine { served, state }
    }

    pub fn url(&self) -> &str {
        &self.served.url
    }

    /// Publish tags for a repository on the registry endpoint.
    pub fn with_tags(self, repository: &str, tags: &[&str]) -> Self {
        self.state.lock().unwrap().tags.insert(repository.to_string(), tags.iter().map(|t| t.to_string()).collect());
        self
    }

    /// Mark an image as already present locally.
    pub fn with_image(self, image: &str) -> Self {
        self.state.lock().unwrap().images.insert(image.to_string());
        self
    }

    pub fn set_faults(&self, faults: EngineFaults) {
        self.state.lock().unwrap().faults = faults;
    }

    /// Containers successfully created; injected create failures are not counted.
    pub fn created(&self) -> usize {
        self.state.lock().unwrap().made
    }

    pub fn removed(&self) -> usize {
        self.state.lock().unwrap().removed
    }

    pub fn pulls(&self) -> usize {
        self.state.lock().unwrap().pulls
    }

    /// Containers not yet removed.
    pub fn live_containers(&self) -> usize {
        self.state.lock().unwrap().containers.len()
    }

    pub fn running_containers(&self) -> usize {
        self.state.lock().unwrap().containers.values().filter(|c| c.started).count()
    }

    pub fn images_of_live(&self) -> Vec<String> {
        self.state.lock().unwrap().containers.values().map(|c| c.image.clone()).collect()
    }

    pub fn env_of_live(&self) -> Vec<Vec<String>> {
        self.state.lock().unwrap().containers.values().map(|c| c.env.clone()).collect()
    }

    pub fn calls(&self) -> Vec<String> {
        self.state.lock().unwrap().calls.clone()
    }

    /// Sessions ever created on container drivers.
    pub fn sessions_created(&self) -> usize {
        let st = self.state.lock().unwrap();
        st.gone_created + st.containers.values().filter_map(|c| c.driver.as_ref()).map(|d| d.sessions_created()).sum::<usize>()
    }

    /// Sessions ever deleted on container drivers.
    pub fn sessions_deleted(&self) -> usize {
        let st = self.state.lock().unwrap();
        st.gone_deleted + st.containers.values().filter_map(|c| c.driver.as_ref()).map(|d| d.sessions_deleted()).sum::<usize>()
    }
}

fn engine_error(status: u16, message: &str) -> Reply {
    Reply::json(status, json!({ "message": message }))
}

fn tar_with(name: &str, content: &[u8]) -> Vec<u8> {
    let mut builder = tar::Builder::new(Vec::new());
    let mut header = tar::Header::new_gnu();
    header.set_size(content.len() as u64);
    header.set_mode(0o644);
    header.set_cksum();
    builder.append_data(&mut header, name, content).expect("in-memory tar");
    builder.into_inner().expect("in-memory tar")
}

fn handle(st: &mut State, req: &RecordedRequest) -> Reply {
    let path = req.path.as_str();
    if path == "/_ping" {
        return Reply::bytes(200, b"OK".to_vec(), "text/plain");
    }
    if let Some(rest) = path.strip_prefix("/v2/repositories/") {
        let repo = rest.trim_end_matches('/').strip_suffix("/tags").unwrap_or(rest);
        return match st.tags.get(repo) {
            Some(tags) => {
                let results: Vec<Value> = tags.iter().map(|t| json!({ "name": t })).collect();
                Reply::json(200, json!({ "count": results.len(), "next": null, "results": results }))
            }
            None => Reply::json(404, json!({ "message": "repository not found" })),
        };
    }
    if let Some(image) = path.strip_prefix("/images/").and_then(|r| r.strip_suffix("/json")) {
        let image = image.to_string();
        return if st.images.contains(&image) {
            Reply::json(200, json!({ "Id": format!("sha256:{image}") }))
        } else {
            engine_error(404, &format!("No such image: {image}"))
        };
    }
    if path == "/images/create" && req.method == "POST" {
        let repo = query_param(&req.query, "fromImage").unwrap_or_default();
        let tag = query_param(&req.query, "tag").unwrap_or_else(|| "latest".into());
        st.pulls += 1;
        if st.faults.fail_pull {
            let body = format!("{}\n{}\n", json!({"status":"Pulling"}), json!({"error":"manifest unknown"}));
            return Reply::bytes(200, body.into_bytes(), "application/json");
        }
        st.images.insert(format!("{repo}:{tag}"));
        let body = format!("{}\n{}\n", json!({"status":"Pulling"}), json!({"status":"Downloaded newer image"}));
        return Reply::bytes(200, body.into_bytes(), "application/json");
    }
    if path == "/containers/create" && req.method == "POST" {
        st.creates += 1;
        if st.faults.fail_create_at == Some(st.creates) {
            return engine_error(500, "injected create failure");
        }
        let body = req.json();
        let image = body["Image"].as_str().unwrap_or_default().to_string();
        if !st.images.contains(&image) {
            return engine_error(404, &format!("No such image: {image}"));
        }
        let env = body["Env"].as_array().map(|e| e.iter().filter_map(|v| v.as_str().map(String::from)).collect()).unwrap_or_default();
        let exposed = body["ExposedPorts"].as_object().map(|m| m.keys().cloned().collect()).unwrap_or_default();
        let labels = body["Labels"]
            .as_object()
            .map(|m| m.iter().map(|(k, v)| (k.clone(), v.as_str().unwrap_or_default().to_string())).collect())
            .unwrap_or_default();
        st.next += 1;
        st.made += 1;
        let id = format!("{:016x}{:048x}", st.next, st.next);
        let faults = WebDriverFaults {
            not_ready: st.faults.not_ready_at == Some(st.creates),
            reject_sessions: (st.faults.reject_sessions_at == Some(st.creates)).then(|| "injected session failure".into()),
            delete_status: st.faults.driver_delete_status,
        };
        st.containers.insert(id.clone(), Container { driver: Some(MockWebDriver::with_faults(faults)), labels, env, exposed, started: false, image });
        return Reply::json(201, json!({ "Id": id, "Warnings": [] }));
    }
    if path == "/containers/json" {
        let wanted: Vec<String> = query_param(&req.query, "filters")
            .and_then(|f| serde_json::from_str::<Value>(&f).ok())
            .and_then(|v| v["label"].as_array().map(|a| a.iter().filter_map(|l| l.as_str().map(String::from)).collect()))
            .unwrap_or_default();
        let list: Vec<Value> = st
            .containers
            .iter()
            .filter(|(_, c)| wanted.iter().all(|l| c.labels.contains_key(l.split('=').next().unwrap_or(l))))
            .map(|(id, c)| json!({ "Id": id, "Labels": c.labels }))
            .collect();
        return Reply::json(200, Value::Array(list));
    }
    let Some(rest) = path.strip_prefix("/containers/") else {
        return engine_error(404, "page not found");
    };
    let (id, action) = rest.split_once('/').unwrap_or((rest, ""));
    let id = id.to_string();
    if !st.containers.contains_key(&id) {
        return engine_error(404, &format!("No such container: {id}"));
    }
    match (req.method.as_str(), action) {
        ("POST", "start") => {
            st.starts += 1;
            if st.faults.fail_start_at == Some(st.starts) {
                return engine_error(500, "injected start failure");
            }
            let c = st.containers.get_mut(&id).unwrap();
            if c.started {
                return Reply::empty(304);
            }
            c.started = true;
            Reply::empty(204)
        }
        ("GET", "json") => {
            let c = &st.containers[&id];
            let mut ports = serde_json::Map::new();
            if c.started {
                for p in &c.exposed {
                    let host_port = match (p.as_str(), &c.driver) {
                        ("4444/tcp", Some(d)) => d.port(),
                        _ => 59000,
                    };
                    ports.insert(p.clone(), json!([{ "HostIp": "0.0.0.0", "HostPort": host_port.to_string() }]));
                }
            }
            Reply::json(200, json!({ "Id": id, "State": { "Running": c.started }, "NetworkSettings": { "Ports": ports } }))
        }
        ("POST", "stop") => {
            if st.faults.fail_stop {
                return engine_error(500, "injected stop failure");
            }
            let c = st.containers.get_mut(&id).unwrap();
            if !c.started {
                return Reply::empty(304);
            }
            c.started = false;
            Reply::empty(204)
        }
        ("GET", "archive") => {
            let c = &st.containers[&id];
            if !c.env.iter().any(|e| e == "ENABLE_VIDEO=true") {
                return engine_error(404, "Could not find the file in container");
            }
            let path = query_param(&req.query, "path").unwrap_or_default();
            let name = path.rsplit('/').next().unwrap_or("video.mp4").to_string();
            Reply::bytes(200, tar_with(&name, FAKE_MP4), "application/x-tar")
        }
        ("DELETE", "") => {
            // dropping the container shuts its driver down
            if let Some(driver) = st.containers.remove(&id).and_then(|c| c.driver) {
                st.gone_created += driver.sessions_created();
                st.gone_deleted += driver.sessions_deleted();
            }
            st.removed += 1;
            Reply::empty(204)
        }
        _ => engine_error(404, "page not found"),
    }
}
