use std::sync::Arc;

use serde_json::json;
use webtestkit::http::DefaultTransport;
use webtestkit::wire::{decode_png, Capabilities, Locator, Provenance, ScreenshotData, ScreenshotMode, WebDriverClient, WireError};
use webtestkit_testkit::{drive_recorded_suite, recorded_exchanges, MockElement, MockWebDriver, WebDriverFaults, TINY_PNG};

fn client() -> WebDriverClient {
    WebDriverClient::new(Arc::new(DefaultTransport::default()))
}

#[test]
fn recorded_exchange_suite_replays_cleanly() {
    let exchanges = recorded_exchanges();
    assert!(exchanges.len() >= 12);
    let errors = exchanges.iter().filter(|x| x.response.body["value"].get("error").is_some()).count();
    assert!(errors >= 3, "fixture has {errors} error bodies");
    assert_eq!(drive_recorded_suite(), Ok(exchanges.len()));
}

#[test]
fn stateful_session_round_trip() {
    let mock = MockWebDriver::start();
    mock.element("#go", MockElement { text: "Go".into(), navigates_to: Some("http://app.test/next".into()) })
        .element("input[name=q]", MockElement::default())
        .title_for("http://app.test/next", "Next page");
    let c = client();
    assert!(c.status_ok(mock.url()));

    let session = c.new_session(mock.url(), &Capabilities::new("firefox"), Provenance::Local).unwrap();
    assert_eq!(mock.last_capabilities().unwrap(), json!({ "browserName": "firefox" }));
    session.navigate("http://app.test/").unwrap();
    let input = session.find_element(&Locator::css("input[name=q]")).unwrap();
    session.send_keys(&input, "web").unwrap();
    session.send_keys(&input, "rtc").unwrap();
    assert_eq!(session.text(&input).unwrap(), "webrtc");

    let go = session.find_element(&Locator::css("#go")).unwrap();
    session.click(&go).unwrap();
    assert_eq!(session.current_url().unwrap(), "http://app.test/next");
    assert_eq!(session.title().unwrap(), "Next page");
    assert_eq!(session.execute_script("return 40+2", vec![]).unwrap(), json!(42));
    assert_eq!(session.screenshot_png().unwrap(), TINY_PNG);

    session.delete().unwrap();
    session.delete().unwrap();
    assert_eq!(mock.sessions_deleted(), 1);
    assert_eq!(mock.live_sessions(), 0);
}

#[test]
fn typed_errors() {
    let mock = MockWebDriver::start();
    let c = client();
    let session = c.new_session(mock.url(), &Capabilities::new("chrome"), Provenance::Remote).unwrap();
    match session.find_element(&Locator::css(".nope")) {
        Err(WireError::NoSuchElement { locator, .. }) => assert!(locator.contains(".nope")),
        other => panic!("{other:?}"),
    }
    assert!(matches!(session.execute_script("throw 1", vec![]), Err(WireError::JavascriptError(_))));
    assert!(matches!(session.navigate("not a url"), Err(WireError::InvalidUrl(_))));

    mock.set_faults(WebDriverFaults { reject_sessions: Some("no chrome here".into()), ..Default::default() });
    match c.new_session(mock.url(), &Capabilities::new("chrome"), Provenance::Remote) {
        Err(WireError::SessionNotCreated { message, .. }) => assert_eq!(message, "no chrome here"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn elements_do_not_cross_sessions() {
    let mock = MockWebDriver::start();
    mock.element("#a", MockElement::default());
    let c = client();
    let one = c.new_session(mock.url(), &Capabilities::new("chrome"), Provenance::Local).unwrap();
    let two = c.new_session(mock.url(), &Capabilities::new("chrome"), Provenance::Local).unwrap();
    let el = one.find_element(&Locator::css("#a")).unwrap();
    assert!(matches!(two.click(&el), Err(WireError::StaleElement(_))));
}

#[test]
fn connection_refused_is_typed() {
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let err = client().new_session(&format!("http://127.0.0.1:{port}"), &Capabilities::new("chrome"), Provenance::Remote);
    assert!(matches!(err, Err(WireError::ConnectionRefused(_))), "{err:?}");
    assert!(matches!(
        client().new_session("ftp://example.org", &Capabilities::new("chrome"), Provenance::Remote),
        Err(WireError::InvalidUrl(_))
    ));
}

#[test]
fn screenshot_modes() {
    let mock = MockWebDriver::start();
    let session = client().new_session(mock.url(), &Capabilities::new("chrome"), Provenance::Local).unwrap();
    let dir = tempfile::tempdir().unwrap();
    match session.screenshot(ScreenshotMode::Base64, dir.path()).unwrap() {
        ScreenshotData::Base64(b) => assert_eq!(decode_png(&b).unwrap(), TINY_PNG),
        other => panic!("{other:?}"),
    }
    match session.screenshot(ScreenshotMode::PngFile, dir.path()).unwrap() {
        ScreenshotData::PngFile(p) => {
            assert_eq!(std::fs::read(&p).unwrap(), TINY_PNG);
            assert!(p.file_name().unwrap().to_str().unwrap().starts_with("mock-0001-"));
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(decode_png("aGVsbG8="), Err(WireError::ScreenshotDecode(_))));
}

#[test]
fn replay_detects_body_drift() {
    use webtestkit_testkit::{Exchange, ExpectedRequest, RecordedResponse, ReplayServer};
    let new_session = Exchange {
        request: ExpectedRequest {
            method: "POST".into(),
            path: "/session".into(),
            body: Some(json!({ "capabilities": { "alwaysMatch": { "browserName": "chrome" } } })),
        },
        response: RecordedResponse { status: 200, body: json!({ "value": { "sessionId": "s1", "capabilities": {} } }) },
    };
    let navigate = Exchange {
        request: ExpectedRequest { method: "POST".into(), path: "/session/s1/url".into(), body: Some(json!({ "url": "http://a/" })) },
        response: RecordedResponse { status: 200, body: json!({ "value": null }) },
    };
    let server = ReplayServer::start(vec![new_session, navigate]);
    let session = client().new_session(server.url(), &Capabilities::new("chrome"), Provenance::Remote).unwrap();
    session.navigate("http://b/").unwrap();
    let mismatches = server.mismatches();
    assert_eq!(mismatches.len(), 1, "{mismatches:?}");
    assert!(mismatches[0].starts_with("exchange 1"));
}
