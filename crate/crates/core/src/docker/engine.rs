use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::{json, Value};

use super::DockerError;
use crate::http::{engine_base_url, HttpRequest, HttpResponse, HttpTransport};

/// Label attached to every container this crate creates.
pub const MANAGED_LABEL: &str = "io.webtestkit.managed";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContainerConfig {
    pub image: String,
    pub env: Vec<String>,
    pub exposed_ports: Vec<u16>,
    pub labels: BTreeMap<String, String>,
    pub shm_size: Option<u64>,
}

impl ContainerConfig {
    /// Body of `POST /containers/create`; every exposed port gets a random host port.
    pub fn to_create_body(&self) -> Value {
        let exposed: serde_json::Map<String, Value> =
            self.exposed_ports.iter().map(|p| (format!("{p}/tcp"), json!({}))).collect();
        let bindings: serde_json::Map<String, Value> = self
            .exposed_ports
            .iter()
            .map(|p| (format!("{p}/tcp"), json!([{ "HostIp": "", "HostPort": "" }])))
            .collect();
        let mut host_config = json!({ "PortBindings": bindings });
        if let Some(shm) = self.shm_size {
            host_config["ShmSize"] = json!(shm);
        }
        json!({
            "Image": self.image,
            "Env": self.env,
            "ExposedPorts": exposed,
            "Labels": self.labels,
            "HostConfig": host_config,
        })
    }
}

/// The container-engine operations the farm relies on.
pub trait EngineClient: Send + Sync {
    fn ping(&self) -> Result<(), DockerError>;
    fn image_present(&self, image: &str) -> Result<bool, DockerError>;
    fn pull(&self, repository: &str, tag: &str) -> Result<(), DockerError>;
    fn create(&self, config: &ContainerConfig) -> Result<String, DockerError>;
    fn start(&self, id: &str) -> Result<(), DockerError>;
    /// Host port mapped to `container_port/tcp`, if any.
    fn host_port(&self, id: &str, container_port: u16) -> Result<Option<u16>, DockerError>;
    fn stop(&self, id: &str) -> Result<(), DockerError>;
    fn remove(&self, id: &str) -> Result<(), DockerError>;
    /// Tar archive holding `path` from the container filesystem.
    fn copy_from(&self, id: &str, path: &str) -> Result<Vec<u8>, DockerError>;
    /// Ids of containers (running or not) carrying `label`.
    fn list_labeled(&self, label: &str) -> Result<Vec<String>, DockerError>;
}

/// Docker Engine REST API client over a unix socket or TCP.
#[derive(Clone)]
pub struct HttpEngine {
    transport: Arc<dyn HttpTransport>,
    base_url: String,
}

fn encode_query(value: &str) -> String {
    url::form_urlencoded::byte_serialize(value.as_bytes()).collect()
}

impl HttpEngine {
    /// `endpoint` is `unix:///path/to/socket`, `tcp://host:port` or an http URL.
    pub fn new(transport: Arc<dyn HttpTransport>, endpoint: &str) -> Result<Self, DockerError> {
        let base_url = engine_base_url(endpoint)?;
        Ok(HttpEngine { transport, base_url })
    }

    /// Host name through which mapped container ports are reachable.
    pub fn published_host(endpoint: &str) -> String {
        endpoint
            .strip_prefix("tcp://")
            .or_else(|| endpoint.strip_prefix("http://"))
            .or_else(|| endpoint.strip_prefix("https://"))
            .and_then(|rest| rest.split([':', '/']).next())
            .filter(|h| !h.is_empty())
            .unwrap_or("127.0.0.1")
            .to_string()
    }

    fn call(&self, op: &'static str, request: HttpRequest, ok: &[u16]) -> Result<HttpResponse, DockerError> {
        let response = self.transport.send(&request)?;
        if ok.contains(&response.status) {
            return Ok(response);
        }
        let message = response
            .json()
            .ok()
            .and_then(|v| v.get("message").and_then(Value::as_str).map(str::to_string))
            .unwrap_or_else(|| String::from_utf8_lossy(&response.body).into_owned());
        Err(DockerError::Engine { op, status: response.status, message })
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base_url)
    }
}

impl EngineClient for HttpEngine {
    fn ping(&self) -> Result<(), DockerError> {
        self.call("ping", HttpRequest::get(self.url("/_ping")), &[200]).map(|_| ())
    }

    fn image_present(&self, image: &str) -> Result<bool, DockerError> {
        let response = self.call("inspect image", HttpRequest::get(self.url(&format!("/images/{image}/json"))), &[200, 404])?;
        Ok(response.status == 200)
    }

    fn pull(&self, repository: &str, tag: &str) -> Result<(), DockerError> {
        let url = self.url(&format!("/images/create?fromImage={}&tag={}", encode_query(repository), encode_query(tag)));
        let response = self.call("pull", HttpRequest::new("POST", url), &[200])?;
        // Progress is streamed as JSON lines; failures show up as an `error` entry.
        for line in String::from_utf8_lossy(&response.body).lines() {
            if let Ok(v) = serde_json::from_str::<Value>(line) {
                if let Some(err) = v.get("error").and_then(Value::as_str) {
                    return Err(DockerError::Pull(format!("{repository}:{tag}: {err}")));
                }
            }
        }
        Ok(())
    }

    fn create(&self, config: &ContainerConfig) -> Result<String, DockerError> {
        let request = HttpRequest::new("POST", self.url("/containers/create")).json(&config.to_create_body());
        let response = self.call("create", request, &[201])?;
        let body = response.json().map_err(|e| DockerError::Engine { op: "create", status: 201, message: e.to_string() })?;
        body.get("Id")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| DockerError::Engine { op: "create", status: 201, message: format!("no Id in {body}") })
    }

    fn start(&self, id: &str) -> Result<(), DockerError> {
        self.call("start", HttpRequest::new("POST", self.url(&format!("/containers/{id}/start"))), &[204, 304]).map(|_| ())
    }

    fn host_port(&self, id: &str, container_port: u16) -> Result<Option<u16>, DockerError> {
        let response = self.call("inspect", HttpRequest::get(self.url(&format!("/containers/{id}/json"))), &[200])?;
        let body = response.json().map_err(|e| DockerError::Engine { op: "inspect", status: 200, message: e.to_string() })?;
        let port = body
            .pointer(&format!("/NetworkSettings/Ports/{container_port}~1tcp"))
            .and_then(Value::as_array)
            .and_then(|bindings| bindings.iter().find_map(|b| b.get("HostPort").and_then(Value::as_str)))
            .and_then(|p| p.parse().ok());
        Ok(port)
    }

    fn stop(&self, id: &str) -> Result<(), DockerError> {
        self.call("stop", HttpRequest::new("POST", self.url(&format!("/containers/{id}/stop?t=5"))), &[204, 304]).map(|_| ())
    }

    fn remove(&self, id: &str) -> Result<(), DockerError> {
        self.call("remove", HttpRequest::new("DELETE", self.url(&format!("/containers/{id}?force=true&v=true"))), &[204, 404])
            .map(|_| ())
    }

    fn copy_from(&self, id: &str, path: &str) -> Result<Vec<u8>, DockerError> {
        let url = self.url(&format!("/containers/{id}/archive?path={}", encode_query(path)));
        self.call("archive", HttpRequest::get(url), &[200]).map(|r| r.body)
    }

    fn list_labeled(&self, label: &str) -> Result<Vec<String>, DockerError> {
        let filters = json!({ "label": [label] }).to_string();
        let url = self.url(&format!("/containers/json?all=true&filters={}", encode_query(&filters)));
        let response = self.call("list", HttpRequest::get(url), &[200])?;
        let body = response.json().map_err(|e| DockerError::Engine { op: "list", status: 200, message: e.to_string() })?;
        Ok(body
            .as_array()
            .map(|items| items.iter().filter_map(|c| c.get("Id").and_then(Value::as_str).map(str::to_string)).collect())
            .unwrap_or_default())
    }
}
