use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use crate::server::{Reply, Served};

/// Serves fixed byte payloads by path and counts hits per path.
pub struct FileServer {
    served: Served,
    hits: Arc<Mutex<BTreeMap<String, usize>>>,
}

impl FileServer {
    pub fn start(files: Vec<(String, Vec<u8>)>) -> Self {
        let files: BTreeMap<String, Vec<u8>> = files.into_iter().collect();
        let hits = Arc::new(Mutex::new(BTreeMap::new()));
        let counter = hits.clone();
        let served = Served::start(move |req| {
            *counter.lock().unwrap().entry(req.path.clone()).or_insert(0) += 1;
            match files.get(&req.path) {
                Some(bytes) => Reply::bytes(200, bytes.clone(), "application/octet-stream"),
                None => Reply::empty(404),
            }
        });
        FileServer { served, hits }
    }

    pub fn url(&self) -> &str {
        &self.served.url
    }

    pub fn hits(&self, path: &str) -> usize {
        self.hits.lock().unwrap().get(path).copied().unwrap_or(0)
    }

    pub fn total_hits(&self) -> usize {
        self.hits.lock().unwrap().values().sum()
    }
}
