use std::sync::Arc;

use serde_json::json;
use webtestkit::http::DefaultTransport;
use webtestkit::wire::{Capabilities, Locator, Provenance, WebDriverClient, WireError};

use crate::replay::{Exchange, ReplayServer};

/// Load the recorded W3C exchanges shipped in `fixtures/`.
pub fn recorded_exchanges() -> Vec<Exchange> {
    let path = crate::fixture_path("w3c-exchanges.json");
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).expect("exchange fixture parses")
}

/// Drive the client through the command sequence the recording was taken
/// from. Returns the number of exchanges served, or the first discrepancy.
pub fn drive_recorded_suite() -> Result<usize, String> {
    let exchanges = recorded_exchanges();
    let server = ReplayServer::start(exchanges);
    let client = WebDriverClient::new(Arc::new(DefaultTransport::default()));
    script(&client, server.url())?;
    let mismatches = server.mismatches();
    if !mismatches.is_empty() {
        return Err(mismatches.join("\n"));
    }
    if server.served() != server.total() {
        return Err(format!("served {} of {} exchanges", server.served(), server.total()));
    }
    Ok(server.served())
}

fn check(cond: bool, what: &str) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.to_string())
    }
}

fn script(client: &WebDriverClient, url: &str) -> Result<(), String> {
    let e = |err: WireError| err.to_string();
    let mut caps = Capabilities::new("chrome");
    caps.set_vendor_option("goog:chromeOptions", json!({ "args": ["--headless=new"] })).map_err(e)?;
    let session = client.new_session(url, &caps, Provenance::Remote).map_err(e)?;
    check(session.id() == "f00dfeed-0000-4000-8000-0000000000a1", "session id")?;
    check(session.handle().capabilities_echo["browserVersion"] == "126.0.6478.126", "capability echo")?;

    session.navigate("https://example.org/").map_err(e)?;
    check(session.current_url().map_err(e)? == "https://example.org/", "current url")?;
    check(session.title().map_err(e)? == "Example Domain", "title")?;

    let join = session.find_element(&Locator::css("#join")).map_err(e)?;
    check(join.id() == "el-join-1", "element id")?;
    session.click(&join).map_err(e)?;
    session.send_keys(&join, "alice").map_err(e)?;
    check(session.text(&join).map_err(e)? == "Join", "element text")?;
    check(
        session.execute_script("return arguments[0] + arguments[1];", vec![json!(2), json!(3)]).map_err(e)? == json!(5),
        "script result",
    )?;
    let png = session.screenshot_png().map_err(e)?;
    check(png.starts_with(&webtestkit::wire::PNG_SIGNATURE), "png signature")?;

    match session.find_element(&Locator::xpath("//button[@id='missing']")) {
        Err(WireError::NoSuchElement { locator, .. }) => check(locator.contains("missing"), "locator in error")?,
        other => return Err(format!("expected no such element, got {other:?}")),
    }
    match session.execute_script("throw new Error('boom');", vec![]) {
        Err(WireError::JavascriptError(m)) => check(m.contains("boom"), "javascript error message")?,
        other => return Err(format!("expected javascript error, got {other:?}")),
    }
    match session.click(&join) {
        Err(WireError::StaleElement(_)) => {}
        other => return Err(format!("expected stale element, got {other:?}")),
    }
    session.delete().map_err(e)?;
    check(!session.is_live(), "session dead after delete")?;
    // a dead handle sends nothing
    match session.title() {
        Err(WireError::InvalidSessionId(_)) => {}
        other => return Err(format!("expected invalid session id, got {other:?}")),
    }
    match client.new_session(url, &Capabilities::new("netscape"), Provenance::Remote) {
        Err(WireError::SessionNotCreated { message, .. }) => check(message.contains("matching"), "session not created message")?,
        other => return Err(format!("expected session not created, got {other:?}")),
    }
    Ok(())
}
