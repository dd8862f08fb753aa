//! Browser test automation toolkit: driver management, a W3C WebDriver
//! client, containerized browsers, a test harness with browser scenarios, and
//! WebRTC quality metrics.

pub mod browser;
pub mod config;
pub mod docker;
pub mod driver;
pub mod exec;
pub mod harness;
pub mod http;
pub mod rtc;
pub mod scenario;
pub mod wire;

pub use browser::{BrowserKind, Platform, VersionString};
pub use config::{ConfigStore, Layer};

/// Replace characters that are unsafe in file names with `_`.
pub fn sanitize_file_name(name: &str) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect();
    match cleaned.trim_matches('.') {
        "" => "_".to_string(),
        s => s.to_string(),
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn sanitize() {
        assert_eq!(super::sanitize_file_name("call[chrome-in-docker-latest]"), "call_chrome-in-docker-latest_");
        assert_eq!(super::sanitize_file_name("../x"), "_x");
        assert_eq!(super::sanitize_file_name(""), "_");
    }
}
