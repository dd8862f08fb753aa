use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde_json::Value;

use super::{PeerConnectionTimeline, RtcError, StatSample};

struct Series {
    start: DateTime<Utc>,
    end: DateTime<Utc>,
    values: Vec<Value>,
}

fn parse_series(entry: &Value) -> Option<(String, Series)> {
    let stats_type = entry.get("statsType")?.as_str()?.to_string();
    let start = entry.get("startTime")?.as_str()?.parse().ok()?;
    let end = entry.get("endTime")?.as_str()?.parse().ok()?;
    // values are a JSON array serialized into a string
    let values: Vec<Value> = match entry.get("values")? {
        Value::String(s) => serde_json::from_str(s).ok()?,
        Value::Array(a) => a.clone(),
        _ => return None,
    };
    Some((stats_type, Series { start, end, values }))
}

fn number(v: &Value) -> f64 {
    v.as_f64().unwrap_or(0.0)
}

/// Import a `webrtc-internals` dump: one timeline per peer connection, built
/// from its busiest inbound video stream. Times are relative to the earliest
/// stream start across the dump.
pub fn parse_webrtc_internals(text: &str) -> Result<Vec<PeerConnectionTimeline>, RtcError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| RtcError::Parse(e.to_string()))?;
    let pcs = doc
        .get("PeerConnections")
        .and_then(Value::as_object)
        .ok_or_else(|| RtcError::Schema { path: "$.PeerConnections".into(), reason: "expected an object".into() })?;

    let mut picked = Vec::new();
    for (pc_id, pc) in pcs {
        let Some(stats) = pc.get("stats").and_then(Value::as_object) else { continue };
        // stat id -> field -> series
        let mut streams: BTreeMap<&str, BTreeMap<&str, Series>> = BTreeMap::new();
        for (key, entry) in stats {
            let Some((id, field)) = key.rsplit_once('-') else { continue };
            let Some((stats_type, series)) = parse_series(entry) else { continue };
            if stats_type == "inbound-rtp" {
                streams.entry(id).or_default().insert(field, series);
            }
        }
        let best = streams
            .into_values()
            .filter(|fields| fields.contains_key("bytesReceived"))
            .filter(|fields| {
                fields.get("kind").and_then(|k| k.values.first()).and_then(Value::as_str).is_none_or(|k| k == "video")
            })
            .max_by(|a, b| {
                let last = |f: &BTreeMap<&str, Series>| f["bytesReceived"].values.last().map(number).unwrap_or(0.0);
                last(a).total_cmp(&last(b))
            });
        if let Some(fields) = best {
            picked.push((pc_id.clone(), fields));
        }
    }
    if picked.is_empty() {
        return Err(RtcError::EmptyDump);
    }
    let origin = picked.iter().map(|(_, f)| f["bytesReceived"].start).min().expect("non-empty");

    let mut timelines = Vec::with_capacity(picked.len());
    for (pc_id, fields) in picked {
        let bytes = &fields["bytesReceived"];
        let len = fields
            .values()
            .filter(|s| s.values.first().is_some_and(Value::is_number))
            .map(|s| s.values.len())
            .min()
            .unwrap_or(0);
        if len == 0 {
            continue;
        }
        let span = (bytes.end - bytes.start).num_milliseconds() as f64 / 1000.0;
        let offset = (bytes.start - origin).num_milliseconds() as f64 / 1000.0;
        let period = if len > 1 { span / (len - 1) as f64 } else { 1.0 };
        let at = |name: &str, i: usize| fields.get(name).and_then(|s| s.values.get(i)).map(number).unwrap_or(0.0);
        let samples = (0..len)
            .map(|i| {
                let received = at("packetsReceived", i).max(0.0) as u64;
                let lost = at("packetsLost", i) as i64;
                let expected = (received as i64 + lost).max(0) as u64;
                StatSample {
                    t: offset + period * i as f64,
                    bytes_received: at("bytesReceived", i).max(0.0) as u64,
                    base_seq: 1,
                    highest_seq: expected,
                    packets_received: received,
                    jitter_buffer_delay: at("jitterBufferDelay", i).max(0.0),
                    jitter_buffer_emitted: at("jitterBufferEmittedCount", i).max(0.0) as u64,
                    ..Default::default()
                }
            })
            .collect();
        timelines.push(PeerConnectionTimeline { connection_id: pc_id, samples, sampling_period: period });
    }
    if timelines.is_empty() {
        return Err(RtcError::EmptyDump);
    }
    Ok(timelines)
}
