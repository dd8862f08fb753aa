//! Blocking HTTP transport shared by the WebDriver client, the container
//! engine client and the driver downloader.
//!
//! Plain `http(s)://` URLs go through a pooled `ureq` agent. Container engines
//! listening on a unix socket are addressed as
//! `http+unix://<hex-encoded socket path>/<api path>`.

use std::io::Read;
use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub method: String,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Option<Vec<u8>>,
}

impl HttpRequest {
    pub fn new(method: &str, url: impl Into<String>) -> Self {
        HttpRequest { method: method.to_string(), url: url.into(), headers: Vec::new(), body: None }
    }

    pub fn get(url: impl Into<String>) -> Self {
        Self::new("GET", url)
    }

    pub fn json(mut self, body: &serde_json::Value) -> Self {
        self.headers.push(("Content-Type".into(), "application/json; charset=utf-8".into()));
        self.body = Some(serde_json::to_vec(body).expect("JSON values always serialize"));
        self
    }

    pub fn body_text(&self) -> Option<&str> {
        self.body.as_deref().and_then(|b| std::str::from_utf8(b).ok())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl HttpResponse {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }

    pub fn json(&self) -> Result<serde_json::Value, serde_json::Error> {
        serde_json::from_slice(&self.body)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("connection refused: {0}")]
    ConnectionRefused(String),
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("invalid URL `{0}`")]
    InvalidUrl(String),
    #[error("transport failure: {0}")]
    Io(String),
}

/// Anything that can execute an HTTP exchange.
pub trait HttpTransport: Send + Sync {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError>;
}

impl<T: HttpTransport + ?Sized> HttpTransport for std::sync::Arc<T> {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        (**self).send(request)
    }
}

/// Build an `http+unix://` base URL for a socket path.
pub fn unix_socket_url(socket: &str) -> String {
    format!("http+unix://{}", hex::encode(socket.as_bytes()))
}

/// Translate a container engine endpoint (`unix:///path`, `tcp://host:port`,
/// or a plain http URL) into a base URL usable with [`DefaultTransport`].
pub fn engine_base_url(endpoint: &str) -> Result<String, TransportError> {
    if let Some(path) = endpoint.strip_prefix("unix://") {
        if path.is_empty() {
            return Err(TransportError::InvalidUrl(endpoint.to_string()));
        }
        Ok(unix_socket_url(path))
    } else if let Some(rest) = endpoint.strip_prefix("tcp://") {
        Ok(format!("http://{}", rest.trim_end_matches('/')))
    } else if endpoint.starts_with("http://") || endpoint.starts_with("https://") {
        Ok(endpoint.trim_end_matches('/').to_string())
    } else {
        Err(TransportError::InvalidUrl(endpoint.to_string()))
    }
}

/// Production transport.
#[derive(Clone)]
pub struct DefaultTransport {
    agent: ureq::Agent,
    timeout: Duration,
}

impl DefaultTransport {
    pub fn new(connect_timeout: Duration, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(connect_timeout)
            .timeout(timeout)
            .redirects(5)
            .build();
        DefaultTransport { agent, timeout }
    }

    fn send_tcp(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let mut req = self.agent.request(&request.method, &request.url);
        for (k, v) in &request.headers {
            req = req.set(k, v);
        }
        let result = match &request.body {
            Some(body) => req.send_bytes(body),
            None if matches!(request.method.as_str(), "POST" | "PUT") => req.send_bytes(&[]),
            None => req.call(),
        };
        let response = match result {
            Ok(resp) => resp,
            Err(ureq::Error::Status(_, resp)) => resp,
            Err(ureq::Error::Transport(t)) => return Err(map_ureq_transport(&request.url, t)),
        };
        let status = response.status();
        let headers = response
            .headers_names()
            .into_iter()
            .filter_map(|name| response.header(&name).map(|v| (name.clone(), v.to_string())))
            .collect();
        let mut body = Vec::new();
        response
            .into_reader()
            .take(512 * 1024 * 1024)
            .read_to_end(&mut body)
            .map_err(|e| io_error(&request.url, &e))?;
        Ok(HttpResponse { status, headers, body })
    }
}

impl Default for DefaultTransport {
    fn default() -> Self {
        DefaultTransport::new(Duration::from_secs(10), Duration::from_secs(60))
    }
}

fn io_error(url: &str, e: &std::io::Error) -> TransportError {
    match e.kind() {
        std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock => {
            TransportError::Timeout(format!("{url}: {e}"))
        }
        std::io::ErrorKind::ConnectionRefused => TransportError::ConnectionRefused(format!("{url}: {e}")),
        _ => TransportError::Io(format!("{url}: {e}")),
    }
}

fn map_ureq_transport(url: &str, t: ureq::Transport) -> TransportError {
    use ureq::ErrorKind;
    let text = format!("{url}: {t}");
    match t.kind() {
        ErrorKind::InvalidUrl | ErrorKind::UnknownScheme => TransportError::InvalidUrl(url.to_string()),
        ErrorKind::ConnectionFailed | ErrorKind::Dns => TransportError::ConnectionRefused(text),
        ErrorKind::Io if text.to_ascii_lowercase().contains("timed out") => TransportError::Timeout(text),
        _ => TransportError::Io(text),
    }
}

impl HttpTransport for DefaultTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        if request.url.starts_with("http+unix://") {
            send_unix(request, self.timeout)
        } else {
            self.send_tcp(request)
        }
    }
}

#[cfg(unix)]
fn send_unix(request: &HttpRequest, timeout: Duration) -> Result<HttpResponse, TransportError> {
    use std::io::Write;
    use std::os::unix::net::UnixStream;

    let rest = &request.url["http+unix://".len()..];
    let (encoded, path) = match rest.find('/') {
        Some(idx) => (&rest[..idx], &rest[idx..]),
        None => (rest, "/"),
    };
    let socket = hex::decode(encoded)
        .ok()
        .and_then(|b| String::from_utf8(b).ok())
        .ok_or_else(|| TransportError::InvalidUrl(request.url.clone()))?;
    let mut stream = UnixStream::connect(&socket).map_err(|e| io_error(&socket, &e))?;
    stream.set_read_timeout(Some(timeout)).map_err(|e| io_error(&socket, &e))?;
    stream.set_write_timeout(Some(timeout)).map_err(|e| io_error(&socket, &e))?;

    let body = request.body.as_deref().unwrap_or(&[]);
    let mut head = format!("{} {} HTTP/1.1\r\nHost: docker\r\nConnection: close\r\n", request.method, path);
    for (k, v) in &request.headers {
        head.push_str(&format!("{k}: {v}\r\n"));
    }
    head.push_str(&format!("Content-Length: {}\r\n\r\n", body.len()));
    stream.write_all(head.as_bytes()).map_err(|e| io_error(&socket, &e))?;
    stream.write_all(body).map_err(|e| io_error(&socket, &e))?;

    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).map_err(|e| io_error(&socket, &e))?;
    parse_raw_response(&raw).map_err(|reason| TransportError::Io(format!("{socket}: {reason}")))
}

#[cfg(not(unix))]
fn send_unix(request: &HttpRequest, _timeout: Duration) -> Result<HttpResponse, TransportError> {
    Err(TransportError::InvalidUrl(request.url.clone()))
}

/// Parse a complete HTTP/1.x response read until connection close.
pub fn parse_raw_response(raw: &[u8]) -> Result<HttpResponse, String> {
    let mut header_buf = [httparse::EMPTY_HEADER; 64];
    let mut parsed = httparse::Response::new(&mut header_buf);
    let head_len = match parsed.parse(raw).map_err(|e| e.to_string())? {
        httparse::Status::Complete(n) => n,
        httparse::Status::Partial => return Err("truncated response head".into()),
    };
    let status = parsed.code.ok_or("missing status code")?;
    let headers: Vec<(String, String)> = parsed
        .headers
        .iter()
        .map(|h| (h.name.to_string(), String::from_utf8_lossy(h.value).into_owned()))
        .collect();
    let rest = &raw[head_len..];
    let chunked = headers
        .iter()
        .any(|(k, v)| k.eq_ignore_ascii_case("transfer-encoding") && v.to_ascii_lowercase().contains("chunked"));
    let body = if chunked { decode_chunked(rest)? } else { rest.to_vec() };
    Ok(HttpResponse { status, headers, body })
}

fn decode_chunked(mut data: &[u8]) -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    loop {
        let line_end = data.windows(2).position(|w| w == b"\r\n").ok_or("truncated chunk size")?;
        let size_text = std::str::from_utf8(&data[..line_end]).map_err(|e| e.to_string())?;
        let size_text = size_text.split(';').next().unwrap_or("").trim();
        let size = usize::from_str_radix(size_text, 16).map_err(|e| format!("bad chunk size: {e}"))?;
        data = &data[line_end + 2..];
        if size == 0 {
            return Ok(out);
        }
        if data.len() < size + 2 {
            return Err("truncated chunk".into());
        }
        out.extend_from_slice(&data[..size]);
        data = &data[size + 2..];
    }
}
