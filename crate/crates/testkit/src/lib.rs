//! In-process test doubles: a stateful W3C WebDriver server, a record/replay
//! WebDriver server, a container-engine subset that spawns mock drivers, a
//! static file server and a request-counting transport.

mod conformance;
mod engine;
mod files;
mod launcher;
mod replay;
mod rig;
mod server;
mod synth;
mod transport;
mod webdriver;

pub use conformance::{drive_recorded_suite, recorded_exchanges};
pub use engine::{EngineFaults, MockEngine, FAKE_MP4};
pub use files::FileServer;
pub use launcher::MockLauncher;
pub use replay::{Exchange, ExpectedRequest, RecordedResponse, ReplayServer};
pub use rig::{browser_engine, fixture_metadata, mock_farm, seed_driver_cache};
pub use server::RecordedRequest;
pub use synth::{native_dump, random_scenario, synthetic, timeline_with_final_jitter, Synthetic, FREEZE_MS};
pub use transport::CountingTransport;
pub use webdriver::{MockElement, MockWebDriver, WebDriverFaults, TINY_PNG};

/// Absolute path of a file under this crate's `fixtures/` directory.
pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}
