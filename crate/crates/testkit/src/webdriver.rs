use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use base64::Engine as _;
use serde_json::{json, Value};

use crate::server::{RecordedRequest, Reply, Served};
use webtestkit::wire::ELEMENT_KEY;

/// Smallest byte string that passes PNG signature checks, plus an IHDR chunk.
pub const TINY_PNG: &[u8] = &[
    0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a, 0, 0, 0, 13, b'I', b'H', b'D', b'R', 0, 0, 0, 1, 0, 0, 0, 1, 8, 6,
    0, 0, 0, 0x1f, 0x15, 0xc4, 0x89,
];

/// An element of the fake page, addressed by its exact locator expression.
#[derive(Debug, Clone, Default)]
pub struct MockElement {
    pub text: String,
    /// Clicking navigates here.
    pub navigates_to: Option<String>,
}

/// Failure injection knobs. All default to off.
#[derive(Debug, Clone, Default)]
pub struct WebDriverFaults {
    /// New-session requests fail with `session not created` and this message.
    pub reject_sessions: Option<String>,
    /// `DELETE /session/{id}` answers this status with an `unknown error` body.
    pub delete_status: Option<u16>,
    /// `/status` answers 503.
    pub not_ready: bool,
}

#[derive(Default)]
struct Page {
    url: String,
    typed: BTreeMap<String, String>,
}

#[derive(Default)]
struct State {
    sessions: BTreeMap<String, Page>,
    elements: BTreeMap<String, MockElement>,
    titles: BTreeMap<String, String>,
    faults: WebDriverFaults,
    requests: Vec<RecordedRequest>,
    created: usize,
    deleted: usize,
    next_id: u64,
    last_capabilities: Option<Value>,
}

fn w3c_error(status: u16, error: &str, message: &str) -> Reply {
    Reply::json(status, json!({ "value": { "error": error, "message": message, "stacktrace": "" } }))
}

fn ok(value: Value) -> Reply {
    Reply::json(200, json!({ "value": value }))
}

/// Evaluate the few script shapes tests use: `return a+b`, `return arguments[i]`,
/// `return "text"`, and anything starting with `throw`.
fn evaluate(script: &str, args: &[Value]) -> Result<Value, String> {
    let script = script.trim().trim_end_matches(';').trim();
    if script.starts_with("throw") {
        return Err(format!("uncaught exception: {script}"));
    }
    let Some(expr) = script.strip_prefix("return") else { return Ok(Value::Null) };
    let expr = expr.trim();
    if let Some(index) = expr.strip_prefix("arguments[").and_then(|r| r.strip_suffix(']')) {
        let i: usize = index.trim().parse().map_err(|_| format!("bad index in {expr}"))?;
        return Ok(args.get(i).cloned().unwrap_or(Value::Null));
    }
    if let Ok(v) = serde_json::from_str::<Value>(expr) {
        return Ok(v);
    }
    if let Some((a, b)) = expr.split_once('+') {
        if let (Ok(a), Ok(b)) = (a.trim().parse::<i64>(), b.trim().parse::<i64>()) {
            return Ok(json!(a + b));
        }
    }
    Ok(Value::Null)
}

/// Stateful W3C WebDriver server on an ephemeral localhost port.
pub struct MockWebDriver {
    served: Served,
    state: Arc<Mutex<State>>,
}

impl MockWebDriver {
    pub fn start() -> Self {
        Self::with_faults(WebDriverFaults::default())
    }

    pub fn with_faults(faults: WebDriverFaults) -> Self {
        let state = Arc::new(Mutex::new(State { faults, ..Default::default() }));
        let shared = state.clone();
        let served = Served::start(move |req| {
            let mut st = shared.lock().unwrap();
            st.requests.push(req.clone());
            handle(&mut st, &req)
        });
        MockWebDriver { served, state }
    }

    pub fn url(&self) -> &str {
        &self.served.url
    }

    pub fn port(&self) -> u16 {
        self.served.port
    }

    /// Put an element on every page, addressed by its locator expression.
    pub fn element(&self, expression: &str, element: MockElement) -> &Self {
        self.state.lock().unwrap().elements.insert(expression.to_string(), element);
        self
    }

    pub fn title_for(&self, url: &str, title: &str) -> &Self {
        self.state.lock().unwrap().titles.insert(url.to_string(), title.to_string());
        self
    }

    pub fn set_faults(&self, faults: WebDriverFaults) {
        self.state.lock().unwrap().faults = faults;
    }

    pub fn sessions_created(&self) -> usize {
        self.state.lock().unwrap().created
    }

    pub fn sessions_deleted(&self) -> usize {
        self.state.lock().unwrap().deleted
    }

    pub fn live_sessions(&self) -> usize {
        self.state.lock().unwrap().sessions.len()
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.state.lock().unwrap().requests.clone()
    }

    /// `alwaysMatch` of the most recent new-session request.
    pub fn last_capabilities(&self) -> Option<Value> {
        self.state.lock().unwrap().last_capabilities.clone()
    }
}

fn handle(st: &mut State, req: &RecordedRequest) -> Reply {
    let parts: Vec<&str> = req.path.trim_matches('/').split('/').collect();
    match (req.method.as_str(), parts.as_slice()) {
        ("GET", ["status"]) => {
            if st.faults.not_ready {
                Reply::json(503, json!({ "value": { "ready": false, "message": "starting" } }))
            } else {
                ok(json!({ "ready": true, "message": "mock ready" }))
            }
        }
        ("POST", ["session"]) => {
            if let Some(message) = st.faults.reject_sessions.clone() {
                return w3c_error(500, "session not created", &message);
            }
            let body = req.json();
            let caps = body.pointer("/capabilities/alwaysMatch").cloned().unwrap_or(json!({}));
            if caps.get("browserName").and_then(Value::as_str).is_none() {
                return w3c_error(400, "invalid argument", "browserName is required");
            }
            st.next_id += 1;
            let id = format!("mock-{:04}", st.next_id);
            st.sessions.insert(id.clone(), Page { url: "about:blank".into(), ..Default::default() });
            st.created += 1;
            st.last_capabilities = Some(caps.clone());
            ok(json!({ "sessionId": id, "capabilities": caps }))
        }
        (method, ["session", id, rest @ ..]) => {
            let id = id.to_string();
            if !st.sessions.contains_key(&id) {
                return w3c_error(404, "invalid session id", &format!("no session {id}"));
            }
            session_command(st, method, &id, rest, req)
        }
        _ => w3c_error(404, "unknown command", &format!("{} {}", req.method, req.path)),
    }
}

fn session_command(st: &mut State, method: &str, id: &str, rest: &[&str], req: &RecordedRequest) -> Reply {
    match (method, rest) {
        ("DELETE", []) => {
            st.sessions.remove(id);
            st.deleted += 1;
            match st.faults.delete_status {
                Some(status) => w3c_error(status, "unknown error", "delete failed"),
                None => ok(Value::Null),
            }
        }
        ("POST", ["url"]) => {
            let url = req.json().get("url").and_then(Value::as_str).unwrap_or_default().to_string();
            st.sessions.get_mut(id).unwrap().url = url;
            ok(Value::Null)
        }
        ("GET", ["url"]) => ok(json!(st.sessions[id].url)),
        ("GET", ["title"]) => {
            let url = &st.sessions[id].url;
            ok(json!(st.titles.get(url).cloned().unwrap_or_else(|| "Mock Page".into())))
        }
        ("POST", ["element"]) => {
            let value = req.json().get("value").and_then(Value::as_str).unwrap_or_default().to_string();
            if st.elements.contains_key(&value) {
                let element_id = hex_id(&value);
                ok(json!({ ELEMENT_KEY: element_id }))
            } else {
                w3c_error(404, "no such element", &format!("Unable to locate element: {value}"))
            }
        }
        (m, ["element", element_id, action]) => {
            let Some((expr, element)) = st.elements.iter().find(|(k, _)| hex_id(k) == *element_id) else {
                return w3c_error(404, "stale element reference", "element is not attached to the page");
            };
            let (expr, element) = (expr.clone(), element.clone());
            match (m, *action) {
                ("POST", "click") => {
                    if let Some(target) = element.navigates_to {
                        st.sessions.get_mut(id).unwrap().url = target;
                    }
                    ok(Value::Null)
                }
                ("POST", "value") => {
                    let text = req.json().get("text").and_then(Value::as_str).unwrap_or_default().to_string();
                    st.sessions.get_mut(id).unwrap().typed.entry(expr).or_default().push_str(&text);
                    ok(Value::Null)
                }
                ("GET", "text") => {
                    let typed = st.sessions[id].typed.get(&expr).cloned().unwrap_or_default();
                    ok(json!(format!("{}{typed}", element.text)))
                }
                _ => w3c_error(404, "unknown command", action),
            }
        }
        ("POST", ["execute", "sync"]) => {
            let body = req.json();
            let script = body.get("script").and_then(Value::as_str).unwrap_or_default();
            let args = body.get("args").and_then(Value::as_array).cloned().unwrap_or_default();
            match evaluate(script, &args) {
                Ok(v) => ok(v),
                Err(message) => w3c_error(500, "javascript error", &message),
            }
        }
        ("GET", ["screenshot"]) => ok(json!(base64::engine::general_purpose::STANDARD.encode(TINY_PNG))),
        _ => w3c_error(404, "unknown command", &format!("{method} {}", req.path)),
    }
}

fn hex_id(expr: &str) -> String {
    expr.bytes().map(|b| format!("{b:02x}")).collect()
}
