//! Minimal W3C WebDriver client.
//!
//! Covers the commands needed to drive a test: sessions, navigation, element
//! lookup and interaction, script execution and screenshots. Requests follow
//! the W3C shapes (`POST /session`, `POST /session/{id}/url`, ...); error
//! bodies of the form `{"value":{"error":..,"message":..}}` become typed
//! [`WireError`]s.

mod capabilities;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::http::{DefaultTransport, HttpRequest, HttpResponse, HttpTransport, TransportError};

pub use capabilities::Capabilities;

/// W3C web element identifier key.
pub const ELEMENT_KEY: &str = "element-6066-11e4-a52e-4f735466cecf";

/// First eight bytes of every PNG file.
pub const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

#[derive(Debug, Error)]
pub enum WireError {
    #[error("invalid URL `{0}`")]
    InvalidUrl(String),
    #[error("connection refused: {0}")]
    ConnectionRefused(String),
    #[error(transparent)]
    Transport(TransportError),
    #[error("session not created: {message}")]
    SessionNotCreated { message: String, body: Value },
    #[error("invalid session id: {0}")]
    InvalidSessionId(String),
    #[error("no such element for {locator}: {message}")]
    NoSuchElement { locator: String, message: String },
    #[error("stale element reference: {0}")]
    StaleElement(String),
    #[error("javascript error: {0}")]
    JavascriptError(String),
    #[error("{error} (HTTP {status}): {message}")]
    Protocol { status: u16, error: String, message: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid capability: {0}")]
    InvalidCapability(String),
    #[error("screenshot decode failed: {0}")]
    ScreenshotDecode(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl From<TransportError> for WireError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::ConnectionRefused(m) => WireError::ConnectionRefused(m),
            TransportError::InvalidUrl(u) => WireError::InvalidUrl(u),
            other => WireError::Transport(other),
        }
    }
}

/// How a session was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Local,
    Remote,
    Docker,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocatorStrategy {
    #[serde(rename = "css")]
    Css,
    #[serde(rename = "xpath")]
    XPath,
    #[serde(rename = "link-text")]
    LinkText,
    #[serde(rename = "tag-name")]
    TagName,
}

impl LocatorStrategy {
    pub fn w3c_name(&self) -> &'static str {
        match self {
            LocatorStrategy::Css => "css selector",
            LocatorStrategy::XPath => "xpath",
            LocatorStrategy::LinkText => "link text",
            LocatorStrategy::TagName => "tag name",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Locator {
    pub strategy: LocatorStrategy,
    pub expression: String,
}

impl Locator {
    pub fn new(strategy: LocatorStrategy, expression: impl Into<String>) -> Result<Self, WireError> {
        let expression = expression.into();
        if expression.is_empty() {
            return Err(WireError::InvalidUrl("empty locator expression".into()));
        }
        Ok(Locator { strategy, expression })
    }

    pub fn css(expression: impl Into<String>) -> Self {
        Locator { strategy: LocatorStrategy::Css, expression: expression.into() }
    }

    pub fn xpath(expression: impl Into<String>) -> Self {
        Locator { strategy: LocatorStrategy::XPath, expression: expression.into() }
    }
}

impl std::fmt::Display for Locator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} `{}`", self.strategy.w3c_name(), self.expression)
    }
}

/// Opaque element reference, valid only inside the session that found it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementRef {
    session_id: String,
    id: String,
}

impl ElementRef {
    pub fn id(&self) -> &str {
        &self.id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScreenshotMode {
    Base64,
    PngFile,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScreenshotData {
    Base64(String),
    PngFile(PathBuf),
}

/// Decode a Base64 screenshot and check the PNG signature.
pub fn decode_png(payload: &str) -> Result<Vec<u8>, WireError> {
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(payload.trim())
        .map_err(|e| WireError::ScreenshotDecode(e.to_string()))?;
    if bytes.len() < 8 || bytes[..8] != PNG_SIGNATURE {
        return Err(WireError::ScreenshotDecode("payload is not a PNG image".into()));
    }
    Ok(bytes)
}

/// Live state of a WebDriver session.
#[derive(Debug)]
pub struct SessionHandle {
    pub endpoint: String,
    pub session_id: String,
    pub capabilities_echo: Value,
    pub provenance: Provenance,
    live: AtomicBool,
}

impl SessionHandle {
    pub fn is_live(&self) -> bool {
        self.live.load(Ordering::SeqCst)
    }
}

/// Shared HTTP plumbing for sessions. Cheap to clone.
#[derive(Clone)]
pub struct WebDriverClient {
    transport: Arc<dyn HttpTransport>,
}

impl Default for WebDriverClient {
    fn default() -> Self {
        WebDriverClient::new(Arc::new(DefaultTransport::default()))
    }
}

fn validate_url(url: &str) -> Result<(), WireError> {
    url::Url::parse(url).map(|_| ()).map_err(|_| WireError::InvalidUrl(url.to_string()))
}

fn normalize_endpoint(endpoint: &str) -> Result<String, WireError> {
    let parsed = url::Url::parse(endpoint).map_err(|_| WireError::InvalidUrl(endpoint.to_string()))?;
    if !matches!(parsed.scheme(), "http" | "https") {
        return Err(WireError::InvalidUrl(endpoint.to_string()));
    }
    Ok(endpoint.trim_end_matches('/').to_string())
}

/// Map a W3C response to its `value`, or to a typed error.
fn decode_response(response: HttpResponse, context: &ErrorContext) -> Result<Value, WireError> {
    let body: Value = serde_json::from_slice(&response.body).map_err(|e| {
        WireError::MalformedResponse(format!("HTTP {}: {e}: {}", response.status, String::from_utf8_lossy(&response.body)))
    })?;
    let value = body
        .get("value")
        .cloned()
        .ok_or_else(|| WireError::MalformedResponse(format!("missing `value` in {body}")))?;
    let error = value.get("error").and_then(Value::as_str).map(str::to_string);
    if response.is_success() && error.is_none() {
        return Ok(value);
    }
    let error = error.unwrap_or_else(|| "unknown error".into());
    let message = value.get("message").and_then(Value::as_str).unwrap_or_default().to_string();
    Err(match error.as_str() {
        "session not created" => WireError::SessionNotCreated { message, body },
        "invalid session id" => WireError::InvalidSessionId(message),
        "no such element" => WireError::NoSuchElement {
            locator: context.locator.clone().unwrap_or_default(),
            message,
        },
        "stale element reference" => WireError::StaleElement(message),
        "javascript error" => WireError::JavascriptError(message),
        _ => WireError::Protocol { status: response.status, error, message },
    })
}

#[derive(Default)]
struct ErrorContext {
    locator: Option<String>,
}

impl WebDriverClient {
    pub fn new(transport: Arc<dyn HttpTransport>) -> Self {
        WebDriverClient { transport }
    }

    pub fn transport(&self) -> &Arc<dyn HttpTransport> {
        &self.transport
    }

    fn exchange(&self, request: HttpRequest, context: &ErrorContext) -> Result<Value, WireError> {
        let response = self.transport.send(&request)?;
        decode_response(response, context)
    }

    /// `GET /status`; true on HTTP 200.
    pub fn status_ok(&self, endpoint: &str) -> bool {
        let Ok(base) = normalize_endpoint(endpoint) else { return false };
        matches!(self.transport.send(&HttpRequest::get(format!("{base}/status"))), Ok(r) if r.status == 200)
    }

    pub fn new_session(&self, endpoint: &str, caps: &Capabilities, provenance: Provenance) -> Result<Session, WireError> {
        let base = normalize_endpoint(endpoint)?;
        let request = HttpRequest::new("POST", format!("{base}/session")).json(&caps.new_session_body());
        let value = self.exchange(request, &ErrorContext::default())?;
        let session_id = value
            .get("sessionId")
            .and_then(Value::as_str)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| WireError::MalformedResponse(format!("new session response lacks sessionId: {value}")))?
            .to_string();
        let capabilities_echo = value.get("capabilities").cloned().unwrap_or(Value::Object(Default::default()));
        Ok(Session {
            client: self.clone(),
            handle: SessionHandle { endpoint: base, session_id, capabilities_echo, provenance, live: AtomicBool::new(true) },
        })
    }
}

/// A session plus the client that talks to it.
pub struct Session {
    client: WebDriverClient,
    handle: SessionHandle,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session").field("handle", &self.handle).finish()
    }
}

impl Session {
    pub fn handle(&self) -> &SessionHandle {
        &self.handle
    }

    pub fn id(&self) -> &str {
        &self.handle.session_id
    }

    pub fn is_live(&self) -> bool {
        self.handle.is_live()
    }

    fn url(&self, suffix: &str) -> String {
        format!("{}/session/{}{}", self.handle.endpoint, self.handle.session_id, suffix)
    }

    fn ensure_live(&self) -> Result<(), WireError> {
        if self.handle.is_live() {
            Ok(())
        } else {
            Err(WireError::InvalidSessionId(format!("session {} was deleted", self.handle.session_id)))
        }
    }

    fn command(&self, method: &str, suffix: &str, body: Option<Value>, ctx: &ErrorContext) -> Result<Value, WireError> {
        self.ensure_live()?;
        let mut request = HttpRequest::new(method, self.url(suffix));
        if let Some(body) = body {
            request = request.json(&body);
        }
        self.client.exchange(request, ctx)
    }

    pub fn navigate(&self, url: &str) -> Result<(), WireError> {
        self.ensure_live()?;
        validate_url(url)?;
        self.command("POST", "/url", Some(json!({ "url": url })), &ErrorContext::default()).map(|_| ())
    }

    pub fn current_url(&self) -> Result<String, WireError> {
        let v = self.command("GET", "/url", None, &ErrorContext::default())?;
        v.as_str().map(str::to_string).ok_or_else(|| WireError::MalformedResponse(format!("url is not a string: {v}")))
    }

    pub fn title(&self) -> Result<String, WireError> {
        let v = self.command("GET", "/title", None, &ErrorContext::default())?;
        v.as_str().map(str::to_string).ok_or_else(|| WireError::MalformedResponse(format!("title is not a string: {v}")))
    }

    pub fn find_element(&self, locator: &Locator) -> Result<ElementRef, WireError> {
        let ctx = ErrorContext { locator: Some(locator.to_string()) };
        let body = json!({ "using": locator.strategy.w3c_name(), "value": locator.expression });
        let v = self.command("POST", "/element", Some(body), &ctx)?;
        let id = v
            .get(ELEMENT_KEY)
            .and_then(Value::as_str)
            .ok_or_else(|| WireError::MalformedResponse(format!("element reference missing: {v}")))?;
        Ok(ElementRef { session_id: self.handle.session_id.clone(), id: id.to_string() })
    }

    fn element_suffix(&self, element: &ElementRef, action: &str) -> Result<String, WireError> {
        if element.session_id != self.handle.session_id {
            return Err(WireError::StaleElement(format!("element {} belongs to another session", element.id)));
        }
        Ok(format!("/element/{}{}", element.id, action))
    }

    pub fn click(&self, element: &ElementRef) -> Result<(), WireError> {
        let suffix = self.element_suffix(element, "/click")?;
        self.command("POST", &suffix, Some(json!({})), &ErrorContext::default()).map(|_| ())
    }

    pub fn send_keys(&self, element: &ElementRef, text: &str) -> Result<(), WireError> {
        let suffix = self.element_suffix(element, "/value")?;
        self.command("POST", &suffix, Some(json!({ "text": text })), &ErrorContext::default()).map(|_| ())
    }

    pub fn text(&self, element: &ElementRef) -> Result<String, WireError> {
        let suffix = self.element_suffix(element, "/text")?;
        let v = self.command("GET", &suffix, None, &ErrorContext::default())?;
        v.as_str().map(str::to_string).ok_or_else(|| WireError::MalformedResponse(format!("text is not a string: {v}")))
    }

    pub fn execute_script(&self, script: &str, args: Vec<Value>) -> Result<Value, WireError> {
        self.command("POST", "/execute/sync", Some(json!({ "script": script, "args": args })), &ErrorContext::default())
    }

    /// Raw Base64 screenshot payload as returned by the server.
    pub fn screenshot_base64(&self) -> Result<String, WireError> {
        let v = self.command("GET", "/screenshot", None, &ErrorContext::default())?;
        v.as_str().map(str::to_string).ok_or_else(|| WireError::MalformedResponse(format!("screenshot is not a string: {v}")))
    }

    /// Decoded PNG bytes.
    pub fn screenshot_png(&self) -> Result<Vec<u8>, WireError> {
        decode_png(&self.screenshot_base64()?)
    }

    /// Base64 mode returns the payload verbatim; png-file mode writes
    /// `<out_dir>/<session_id>-<timestamp>.png`.
    pub fn screenshot(&self, mode: ScreenshotMode, out_dir: &Path) -> Result<ScreenshotData, WireError> {
        let payload = self.screenshot_base64()?;
        let bytes = decode_png(&payload)?;
        match mode {
            ScreenshotMode::Base64 => Ok(ScreenshotData::Base64(payload)),
            ScreenshotMode::PngFile => {
                let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
                let path = out_dir.join(format!("{}-{stamp}.png", crate::sanitize_file_name(&self.handle.session_id)));
                std::fs::create_dir_all(out_dir).map_err(|e| WireError::Io(e.to_string()))?;
                std::fs::write(&path, bytes).map_err(|e| WireError::Io(e.to_string()))?;
                Ok(ScreenshotData::PngFile(path))
            }
        }
    }

    /// `DELETE /session/{id}`. The handle is dead afterwards even when the
    /// request fails; repeated calls send nothing.
    pub fn delete(&self) -> Result<(), WireError> {
        if !self.handle.live.swap(false, Ordering::SeqCst) {
            return Ok(());
        }
        let request = HttpRequest::new("DELETE", self.url(""));
        match self.client.exchange(request, &ErrorContext::default()) {
            Ok(_) => Ok(()),
            Err(e) => {
                log::warn!("deleting session {} failed: {e}", self.handle.session_id);
                Err(e)
            }
        }
    }
}
