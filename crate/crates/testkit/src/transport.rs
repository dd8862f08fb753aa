use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use webtestkit::http::{HttpRequest, HttpResponse, HttpTransport, TransportError};

/// Forwards to an inner transport and records every URL requested.
pub struct CountingTransport {
    inner: Arc<dyn HttpTransport>,
    count: AtomicUsize,
    urls: Mutex<Vec<String>>,
}

impl CountingTransport {
    pub fn new(inner: Arc<dyn HttpTransport>) -> Self {
        CountingTransport { inner, count: AtomicUsize::new(0), urls: Mutex::new(Vec::new()) }
    }

    pub fn count(&self) -> usize {
        self.count.load(Ordering::SeqCst)
    }

    pub fn urls(&self) -> Vec<String> {
        self.urls.lock().unwrap().clone()
    }

    pub fn reset(&self) {
        self.count.store(0, Ordering::SeqCst);
        self.urls.lock().unwrap().clear();
    }
}

impl HttpTransport for CountingTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        self.count.fetch_add(1, Ordering::SeqCst);
        self.urls.lock().unwrap().push(request.url.clone());
        self.inner.send(request)
    }
}
