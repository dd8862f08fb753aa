use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::server::{Reply, Served};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRequest {
    pub method: String,
    pub path: String,
    /// Absent means the request must carry no body.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedResponse {
    pub status: u16,
    pub body: Value,
}

/// One recorded request/response pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub request: ExpectedRequest,
    pub response: RecordedResponse,
}

#[derive(Default)]
struct Progress {
    served: usize,
    mismatches: Vec<String>,
}

/// Serves recorded exchanges in order and checks each incoming request
/// against the recording.
pub struct ReplayServer {
    served: Served,
    progress: Arc<Mutex<Progress>>,
    total: usize,
}

impl ReplayServer {
    pub fn start(exchanges: Vec<Exchange>) -> Self {
        let total = exchanges.len();
        let progress = Arc::new(Mutex::new(Progress::default()));
        let shared = progress.clone();
        let served = Served::start(move |req| {
            let mut p = shared.lock().unwrap();
            let Some(exchange) = exchanges.get(p.served) else {
                p.mismatches.push(format!("unexpected extra request {} {}", req.method, req.path));
                return Reply::json(500, serde_json::json!({"value":{"error":"unknown error","message":"replay exhausted"}}));
            };
            let expected = &exchange.request;
            let mut problems = Vec::new();
            if expected.method != req.method || expected.path != req.path {
                problems.push(format!("expected {} {}, got {} {}", expected.method, expected.path, req.method, req.path));
            }
            // bodies are compared as bytes of the compact, key-sorted encoding
            let wanted = expected.body.as_ref().map(|b| b.to_string()).unwrap_or_default();
            if wanted != req.body {
                problems.push(format!("body of {} {}: expected `{wanted}`, got `{}`", req.method, req.path, req.body));
            }
            let index = p.served;
            p.mismatches.extend(problems.into_iter().map(|m| format!("exchange {index}: {m}")));
            p.served += 1;
            Reply::json(exchange.response.status, exchange.response.body.clone())
        });
        ReplayServer { served, progress, total }
    }

    pub fn url(&self) -> &str {
        &self.served.url
    }

    pub fn served(&self) -> usize {
        self.progress.lock().unwrap().served
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn mismatches(&self) -> Vec<String> {
        self.progress.lock().unwrap().mismatches.clone()
    }
}
