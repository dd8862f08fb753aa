use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use tiny_http::{Header, Response, Server};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedRequest {
    pub method: String,
    pub path: String,
    pub query: String,
    pub body: String,
}

impl RecordedRequest {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.body).unwrap_or(serde_json::Value::Null)
    }
}

pub(crate) struct Reply {
    pub status: u16,
    pub body: Vec<u8>,
    pub content_type: &'static str,
}

impl Reply {
    pub fn json(status: u16, value: serde_json::Value) -> Self {
        Reply { status, body: value.to_string().into_bytes(), content_type: "application/json" }
    }

    pub fn bytes(status: u16, body: Vec<u8>, content_type: &'static str) -> Self {
        Reply { status, body, content_type }
    }

    pub fn empty(status: u16) -> Self {
        Reply { status, body: Vec::new(), content_type: "text/plain" }
    }
}

/// A background HTTP server on an ephemeral localhost port; stops on drop.
pub(crate) struct Served {
    pub url: String,
    pub port: u16,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl Served {
    pub fn start<F>(handler: F) -> Served
    where
        F: Fn(RecordedRequest) -> Reply + Send + 'static,
    {
        let server = Server::http("127.0.0.1:0").expect("bind mock server");
        let port = server.server_addr().to_ip().expect("ip listener").port();
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let thread = std::thread::spawn(move || {
            while !flag.load(Ordering::SeqCst) {
                let mut request = match server.recv_timeout(Duration::from_millis(5)) {
                    Ok(Some(r)) => r,
                    Ok(None) => continue,
                    Err(_) => break,
                };
                let mut body = String::new();
                let _ = request.as_reader().read_to_string(&mut body);
                let (path, query) = match request.url().split_once('?') {
                    Some((p, q)) => (p.to_string(), q.to_string()),
                    None => (request.url().to_string(), String::new()),
                };
                let recorded = RecordedRequest { method: request.method().as_str().to_uppercase(), path, query, body };
                let reply = handler(recorded);
                let header = Header::from_bytes("Content-Type", reply.content_type).expect("static header");
                let response = Response::from_data(reply.body).with_status_code(reply.status).with_header(header);
                let _ = request.respond(response);
            }
        });
        Served { url: format!("http://127.0.0.1:{port}"), port, stop, thread: Some(thread) }
    }
}

impl Drop for Served {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub(crate) fn query_param(query: &str, name: &str) -> Option<String> {
    url::form_urlencoded::parse(query.as_bytes()).find(|(k, _)| k == name).map(|(_, v)| v.into_owned())
}
