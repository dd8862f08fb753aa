use std::net::TcpListener;
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::driver::DriverArtifact;
use crate::http::{HttpRequest, HttpTransport};

/// A running driver server.
pub trait DriverProcess: Send {
    fn url(&self) -> &str;
    fn terminate(&mut self) -> Result<(), String>;
}

/// Starts driver servers for local browsers.
pub trait DriverLauncher: Send + Sync {
    fn launch(&self, artifact: &DriverArtifact) -> Result<Box<dyn DriverProcess>, String>;
}

/// Spawns the driver binary with `--port=<free port>` and waits for `/status`.
pub struct ProcessLauncher {
    transport: Arc<dyn HttpTransport>,
    startup_timeout: Duration,
}

impl ProcessLauncher {
    pub fn new(transport: Arc<dyn HttpTransport>, startup_timeout: Duration) -> Self {
        ProcessLauncher { transport, startup_timeout }
    }
}

struct ChildDriver {
    child: Option<Child>,
    url: String,
}

impl DriverProcess for ChildDriver {
    fn url(&self) -> &str {
        &self.url
    }

    fn terminate(&mut self) -> Result<(), String> {
        let Some(mut child) = self.child.take() else { return Ok(()) };
        if let Err(e) = child.kill() {
            // already exited is fine
            if e.kind() != std::io::ErrorKind::InvalidInput {
                return Err(e.to_string());
            }
        }
        child.wait().map(|_| ()).map_err(|e| e.to_string())
    }
}

impl Drop for ChildDriver {
    fn drop(&mut self) {
        let _ = self.terminate();
    }
}

fn free_port() -> Result<u16, String> {
    TcpListener::bind("127.0.0.1:0").and_then(|l| l.local_addr()).map(|a| a.port()).map_err(|e| e.to_string())
}

impl DriverLauncher for ProcessLauncher {
    fn launch(&self, artifact: &DriverArtifact) -> Result<Box<dyn DriverProcess>, String> {
        let port = free_port()?;
        let child = Command::new(&artifact.cache_path)
            .arg(format!("--port={port}"))
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| format!("cannot start {}: {e}", artifact.cache_path.display()))?;
        let url = format!("http://127.0.0.1:{port}");
        let mut driver = ChildDriver { child: Some(child), url };
        let started = Instant::now();
        let status = format!("{}/status", driver.url);
        loop {
            if matches!(self.transport.send(&HttpRequest::get(status.clone())), Ok(r) if r.status == 200) {
                return Ok(Box::new(driver));
            }
            if let Some(child) = driver.child.as_mut() {
                if let Ok(Some(exit)) = child.try_wait() {
                    driver.child = None;
                    return Err(format!("{} exited during startup: {exit}", artifact.cache_path.display()));
                }
            }
            if started.elapsed() > self.startup_timeout {
                let _ = driver.terminate();
                return Err(format!("{} not ready after {:?}", artifact.cache_path.display(), self.startup_timeout));
            }
            std::thread::sleep(Duration::from_millis(50));
        }
    }
}
