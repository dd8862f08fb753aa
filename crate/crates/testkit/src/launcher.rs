use std::sync::{Arc, Mutex};

use webtestkit::driver::DriverArtifact;
use webtestkit::harness::{DriverLauncher, DriverProcess};

use crate::webdriver::{MockElement, MockWebDriver, WebDriverFaults};

#[derive(Default)]
struct Counters {
    // servers stay up until the launcher is dropped so counts remain readable
    drivers: Vec<Arc<MockWebDriver>>,
    launched: usize,
    terminated: usize,
    attempts: usize,
    artifacts: Vec<DriverArtifact>,
}

/// Launches a [`MockWebDriver`] instead of a driver binary.
#[derive(Clone, Default)]
pub struct MockLauncher {
    counters: Arc<Mutex<Counters>>,
    fail_launch_at: Option<usize>,
    faults: WebDriverFaults,
    elements: Vec<(String, MockElement)>,
}

struct MockProcess {
    url: String,
    counters: Arc<Mutex<Counters>>,
    done: bool,
}

impl DriverProcess for MockProcess {
    fn url(&self) -> &str {
        &self.url
    }

    fn terminate(&mut self) -> Result<(), String> {
        if !self.done {
            self.done = true;
            self.counters.lock().unwrap().terminated += 1;
        }
        Ok(())
    }
}

impl DriverLauncher for MockLauncher {
    fn launch(&self, artifact: &DriverArtifact) -> Result<Box<dyn DriverProcess>, String> {
        let mut c = self.counters.lock().unwrap();
        c.attempts += 1;
        if self.fail_launch_at == Some(c.attempts) {
            return Err("injected launch failure".into());
        }
        let driver = Arc::new(MockWebDriver::with_faults(self.faults.clone()));
        for (expr, el) in &self.elements {
            driver.element(expr, el.clone());
        }
        c.launched += 1;
        c.artifacts.push(artifact.clone());
        c.drivers.push(driver.clone());
        let url = driver.url().to_string();
        Ok(Box::new(MockProcess { url, counters: self.counters.clone(), done: false }))
    }
}

impl MockLauncher {
    pub fn new() -> Self {
        Self::default()
    }

    /// The 1-based `n`-th launch attempt fails.
    pub fn failing_launch(mut self, n: usize) -> Self {
        self.fail_launch_at = Some(n);
        self
    }

    /// Faults applied to every launched driver.
    pub fn with_faults(mut self, faults: WebDriverFaults) -> Self {
        self.faults = faults;
        self
    }

    /// Element present on every page of every launched driver.
    pub fn with_element(mut self, expression: &str, element: MockElement) -> Self {
        self.elements.push((expression.to_string(), element));
        self
    }

    pub fn launched(&self) -> usize {
        self.counters.lock().unwrap().launched
    }

    pub fn terminated(&self) -> usize {
        self.counters.lock().unwrap().terminated
    }

    pub fn artifacts(&self) -> Vec<DriverArtifact> {
        self.counters.lock().unwrap().artifacts.clone()
    }

    pub fn sessions_created(&self) -> usize {
        self.counters.lock().unwrap().drivers.iter().map(|d| d.sessions_created()).sum()
    }

    pub fn sessions_deleted(&self) -> usize {
        self.counters.lock().unwrap().drivers.iter().map(|d| d.sessions_deleted()).sum()
    }
}
