use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use webtestkit::driver::{
    cache_path, detect_browser_version, ensure_driver, load_metadata, parse_version_output, resolve_driver_version,
    DriverError, FixedProbe, MetadataSource, ResolutionMetadata,
};
use webtestkit::http::DefaultTransport;
use webtestkit::{BrowserKind, Platform, VersionString};
use webtestkit_testkit::{fixture_path, CountingTransport, FileServer};

fn fixture_text() -> String {
    std::fs::read_to_string(fixture_path("driver-metadata.json")).unwrap()
}

/// Linear scan of the raw document: the entry with the largest major not above the query.
fn oracle(doc: &Value, kind: &str, major: u64) -> Option<String> {
    doc["entries"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["browser"] == kind && e["browser_major"].as_u64().unwrap() <= major)
        .max_by_key(|e| e["browser_major"].as_u64().unwrap())
        .map(|e| e["driver_version"].as_str().unwrap().to_string())
}

#[test]
fn resolution_matches_scan_oracle() {
    let text = fixture_text();
    let doc: Value = serde_json::from_str(&text).unwrap();
    let meta = ResolutionMetadata::from_json(&text, "fixture").unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let kinds = [BrowserKind::Chrome, BrowserKind::Firefox, BrowserKind::Edge];
    for _ in 0..2000 {
        let kind = kinds[rng.random_range(0..kinds.len())];
        let major = rng.random_range(80..140u64);
        let version = VersionString::from_segments(vec![major, 0, rng.random_range(0..6000), rng.random_range(0..300)]);
        let got = resolve_driver_version(kind, &version, &meta).ok().map(|v| v.raw().to_string());
        assert_eq!(got, oracle(&doc, kind.name(), major), "{kind} {version}");
    }
}

#[test]
fn gaps_fall_back_to_nearest_lower_major() {
    let meta = ResolutionMetadata::from_json(&fixture_text(), "fixture").unwrap();
    let v = |s: &str| VersionString::parse(s).unwrap();
    // chrome 119 and 123 are missing from the fixture
    let table = [
        (BrowserKind::Chrome, "119.0.6045.105", Some(118)),
        (BrowserKind::Chrome, "123.0.6312.58", Some(122)),
        (BrowserKind::Chrome, "124.0.6367.60", Some(124)),
        (BrowserKind::Chrome, "99.0.4844.51", None),
        (BrowserKind::Firefox, "100.0", Some(94)),
        (BrowserKind::Firefox, "128.0.3", Some(128)),
        (BrowserKind::Edge, "113.0.1774.35", Some(112)),
        (BrowserKind::Edge, "117.0.2045.31", Some(116)),
    ];
    for (kind, browser, want_major) in table {
        match (webtestkit::driver::resolve_entry(kind, &v(browser), &meta), want_major) {
            (Ok(entry), Some(m)) => assert_eq!(entry.browser_major, m, "{kind} {browser}"),
            (Err(DriverError::Unresolved { .. }), None) => {}
            (other, want) => panic!("{kind} {browser}: got {other:?}, want {want:?}"),
        }
    }
}

fn zip_with(name: &str, content: &[u8]) -> Vec<u8> {
    let mut buf = std::io::Cursor::new(Vec::new());
    {
        let mut w = zip::ZipWriter::new(&mut buf);
        w.start_file(name, zip::write::SimpleFileOptions::default()).unwrap();
        w.write_all(content).unwrap();
        w.finish().unwrap();
    }
    buf.into_inner()
}

fn served_metadata(server: &FileServer, path: &str, sha256: Option<String>) -> ResolutionMetadata {
    let doc = json!({
        "schema": 1,
        "entries": [{
            "browser": "chrome",
            "browser_major": 126,
            "driver_version": "126.0.6478.126",
            "sha256": sha256,
            "url": format!("{}{path}", server.url()),
        }]
    });
    ResolutionMetadata::from_json(&doc.to_string(), "test").unwrap()
}

#[test]
fn second_ensure_is_a_cache_hit() {
    let archive = zip_with("chromedriver-linux64/chromedriver", b"#!/bin/sh\necho fake\n");
    let server = FileServer::start(vec![("/cd.zip".into(), archive)]);
    let meta = served_metadata(&server, "/cd.zip", None);
    let transport = CountingTransport::new(Arc::new(DefaultTransport::default()));
    let root = tempfile::tempdir().unwrap();
    let browser = VersionString::parse("126.0.6478.55").unwrap();

    let first = ensure_driver(BrowserKind::Chrome, &browser, &meta, root.path(), Platform::LinuxX64, &transport).unwrap();
    let second = ensure_driver(BrowserKind::Chrome, &browser, &meta, root.path(), Platform::LinuxX64, &transport).unwrap();
    assert_eq!(first, second);
    assert_eq!(transport.count(), 1);
    assert_eq!(server.hits("/cd.zip"), 1);
    let expected = cache_path(root.path(), BrowserKind::Chrome, Platform::LinuxX64, &VersionString::parse("126.0.6478.126").unwrap());
    assert_eq!(first.cache_path, expected);
    assert_eq!(std::fs::read(&expected).unwrap(), b"#!/bin/sh\necho fake\n");
}

#[test]
fn concurrent_ensures_download_once() {
    let archive = zip_with("chromedriver", &[1u8; 64 * 1024]);
    let server = FileServer::start(vec![("/cd.zip".into(), archive)]);
    let meta = served_metadata(&server, "/cd.zip", None);
    let transport = CountingTransport::new(Arc::new(DefaultTransport::default()));
    let root = tempfile::tempdir().unwrap();
    let browser = VersionString::parse("126.0.1").unwrap();
    std::thread::scope(|s| {
        for _ in 0..8 {
            s.spawn(|| ensure_driver(BrowserKind::Chrome, &browser, &meta, root.path(), Platform::LinuxX64, &transport).unwrap());
        }
    });
    assert_eq!(transport.count(), 1);
}

fn entries_under(root: &Path) -> Vec<String> {
    walk(root).into_iter().filter(|p| !p.contains(".lock")).collect()
}

fn walk(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).into_iter().flatten().flatten() {
        let path = entry.path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path.display().to_string());
        }
    }
    out
}

#[test]
fn corrupted_archive_leaves_no_entry() {
    let good = zip_with("chromedriver", &[9u8; 8192]);
    let server = FileServer::start(vec![
        ("/truncated.zip".into(), good[..good.len() / 3].to_vec()),
        ("/garbage.zip".into(), b"<html>rate limited</html>".to_vec()),
        ("/good.zip".into(), good.clone()),
    ]);
    let transport = DefaultTransport::default();
    let browser = VersionString::parse("126.0.0.1").unwrap();
    for path in ["/truncated.zip", "/garbage.zip", "/missing.zip"] {
        let root = tempfile::tempdir().unwrap();
        let meta = served_metadata(&server, path, None);
        let err = ensure_driver(BrowserKind::Chrome, &browser, &meta, root.path(), Platform::LinuxX64, &transport).unwrap_err();
        assert!(matches!(err, DriverError::ArchiveFormat(_) | DriverError::HttpStatus { status: 404, .. }), "{path}: {err:?}");
        assert!(entries_under(root.path()).is_empty(), "{path}: {:?}", entries_under(root.path()));
    }
    let root = tempfile::tempdir().unwrap();
    let meta = served_metadata(&server, "/good.zip", Some("00".repeat(32)));
    let err = ensure_driver(BrowserKind::Chrome, &browser, &meta, root.path(), Platform::LinuxX64, &transport).unwrap_err();
    assert!(matches!(err, DriverError::ChecksumMismatch { .. }));
    assert!(entries_under(root.path()).is_empty());

    let meta = served_metadata(&server, "/good.zip", Some(hex::encode(Sha256::digest(&good))));
    ensure_driver(BrowserKind::Chrome, &browser, &meta, root.path(), Platform::LinuxX64, &transport).unwrap();
    assert_eq!(entries_under(root.path()).len(), 1);
}

#[test]
fn safari_uses_the_system_driver() {
    let transport = CountingTransport::new(Arc::new(DefaultTransport::default()));
    let meta = ResolutionMetadata::empty("none");
    let v = VersionString::parse("17.4").unwrap();
    let artifact = ensure_driver(BrowserKind::Safari, &v, &meta, Path::new("/nonexistent"), Platform::MacArm64, &transport).unwrap();
    assert!(!artifact.executable);
    assert_eq!(transport.count(), 0);
}

#[test]
fn metadata_url_is_cached_for_its_ttl() {
    let server = FileServer::start(vec![("/meta.json".into(), fixture_text().into_bytes())]);
    let transport = CountingTransport::new(Arc::new(DefaultTransport::default()));
    let root = tempfile::tempdir().unwrap();
    let source = MetadataSource::Url(format!("{}/meta.json", server.url()));
    let ttl = std::time::Duration::from_secs(3600);
    let a = load_metadata(&source, &transport, root.path(), ttl).unwrap();
    let b = load_metadata(&source, &transport, root.path(), ttl).unwrap();
    assert_eq!(a.entries.len(), b.entries.len());
    assert_eq!(transport.count(), 1);
    let _ = load_metadata(&source, &transport, root.path(), std::time::Duration::ZERO).unwrap();
    assert_eq!(transport.count(), 2);
    assert!(a.entries.len() >= 20);
}

#[test]
fn chrome_for_testing_document() {
    let doc = json!({
        "timestamp": "2024-07-01T00:00:00.000Z",
        "milestones": {
            "125": { "milestone": "125", "version": "125.0.6422.141", "revision": "1",
                     "downloads": { "chromedriver": [
                        { "platform": "linux64", "url": "https://cdn.test/125/linux64/chromedriver-linux64.zip" },
                        { "platform": "win64", "url": "https://cdn.test/125/win64/chromedriver-win64.zip" } ] } },
            "126": { "milestone": "126", "version": "126.0.6478.126", "revision": "2",
                     "downloads": { "chrome": [] } }
        }
    });
    let meta = ResolutionMetadata::from_json(&doc.to_string(), "cft").unwrap();
    assert_eq!(meta.entries.len(), 1);
    let v = VersionString::parse("127.0.1").unwrap();
    let entry = webtestkit::driver::resolve_entry(BrowserKind::Chrome, &v, &meta).unwrap();
    assert_eq!(entry.browser_major, 125);
    assert_eq!(meta.download_for(entry, Platform::WinX64).unwrap().url, "https://cdn.test/125/win64/chromedriver-win64.zip");
    assert!(matches!(meta.download_for(entry, Platform::MacArm64), Err(DriverError::NoDownloadUrl { .. })));
}

#[test]
fn probe_results() {
    let probe = FixedProbe::new()
        .with_output(BrowserKind::Chrome, "Google Chrome 126.0.6478.126 \n")
        .with_output(BrowserKind::Edge, "garbled")
        .with_failure(BrowserKind::Firefox, "segfault");
    assert_eq!(detect_browser_version(BrowserKind::Chrome, &probe).unwrap().unwrap().raw(), "126.0.6478.126");
    assert!(detect_browser_version(BrowserKind::Opera, &probe).unwrap().is_none());
    assert!(matches!(detect_browser_version(BrowserKind::Edge, &probe), Err(DriverError::Probe { .. })));
    assert!(matches!(detect_browser_version(BrowserKind::Firefox, &probe), Err(DriverError::Probe { .. })));
    assert_eq!(parse_version_output("Mozilla Firefox 128.0.3esr").unwrap().major(), 128);
}

