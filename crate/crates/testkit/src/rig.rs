use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use webtestkit::docker::{DockerFarm, FarmSettings, HttpEngine, RegistryTags};
use webtestkit::driver::{cache_path, ResolutionMetadata};
use webtestkit::http::DefaultTransport;
use webtestkit::{BrowserKind, Platform, VersionString};

use crate::engine::MockEngine;

/// The shipped driver metadata fixture.
pub fn fixture_metadata() -> ResolutionMetadata {
    let path = crate::fixture_path("driver-metadata.json");
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    ResolutionMetadata::from_json(&text, "fixture").expect("fixture metadata parses")
}

/// Put an executable placeholder where the cache expects `driver_version`.
pub fn seed_driver_cache(root: &Path, kind: BrowserKind, platform: Platform, driver_version: &str) {
    let target = cache_path(root, kind, platform, &VersionString::parse(driver_version).expect("valid version"));
    std::fs::create_dir_all(target.parent().unwrap()).unwrap();
    std::fs::write(&target, b"#!/bin/sh\n").unwrap();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(&target, std::fs::Permissions::from_mode(0o755)).unwrap();
    }
}

/// A farm talking to `engine` for both containers and registry tags, with
/// short readiness timeouts.
pub fn mock_farm(engine: &MockEngine, out_dir: &Path, wait_timeout: Duration) -> DockerFarm {
    let transport = Arc::new(DefaultTransport::new(Duration::from_secs(2), Duration::from_secs(10)));
    let client = HttpEngine::new(transport.clone(), engine.url()).expect("mock engine URL");
    let settings = FarmSettings {
        wait_timeout,
        poll_interval: Duration::from_millis(10),
        out_dir: out_dir.to_path_buf(),
        published_host: HttpEngine::published_host(engine.url()),
        ..FarmSettings::default()
    };
    DockerFarm::new(Arc::new(client), Arc::new(RegistryTags::new(transport.clone(), engine.url())), transport, settings)
}

/// Engine preloaded with Chrome and Firefox tag lists.
pub fn browser_engine() -> MockEngine {
    MockEngine::start()
        .with_tags("selenoid/vnc_chrome", &["latest", "124.0", "125.0", "126.0", "126.1", "127.0"])
        .with_tags("selenoid/vnc_firefox", &["126.0", "127.0", "128.0"])
        .with_tags("twilio/selenoid", &["chrome_beta", "chrome_dev", "firefox_beta", "firefox_nightly"])
}
