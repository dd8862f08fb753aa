use std::path::Path;

use serde_json::Value;

use super::{PeerConnectionTimeline, RtcError, StatSample};

/// On-disk dump layouts understood by [`import_dump`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DumpFormat {
    /// Column-oriented schema written by this crate.
    #[default]
    Native,
    /// Browser `webrtc-internals` export. Best effort; frame times are unavailable.
    WebrtcInternals,
}

impl std::str::FromStr for DumpFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "native" => Ok(DumpFormat::Native),
            "webrtc-internals" => Ok(DumpFormat::WebrtcInternals),
            other => Err(format!("unknown dump format `{other}` (native, webrtc-internals)")),
        }
    }
}

pub fn import_dump(path: &Path, format: DumpFormat) -> Result<Vec<PeerConnectionTimeline>, RtcError> {
    let text = std::fs::read_to_string(path).map_err(|e| RtcError::Io(format!("{}: {e}", path.display())))?;
    match format {
        DumpFormat::Native => parse_dump(&text),
        DumpFormat::WebrtcInternals => super::parse_webrtc_internals(&text),
    }
}

fn schema(path: impl Into<String>, reason: impl Into<String>) -> RtcError {
    RtcError::Schema { path: path.into(), reason: reason.into() }
}

fn column<'a>(samples: &'a Value, name: &str, base: &str, len: usize, required: bool) -> Result<Option<&'a Vec<Value>>, RtcError> {
    match samples.get(name) {
        None if required => Err(schema(format!("{base}.{name}"), "missing column")),
        None => Ok(None),
        Some(Value::Array(items)) => {
            if items.len() != len {
                return Err(schema(format!("{base}.{name}"), format!("has {} entries, t has {len}", items.len())));
            }
            Ok(Some(items))
        }
        Some(_) => Err(schema(format!("{base}.{name}"), "expected an array")),
    }
}

fn as_u64(v: &Value, path: String) -> Result<u64, RtcError> {
    v.as_u64().ok_or_else(|| schema(path, "expected a non-negative integer"))
}

fn as_f64(v: &Value, path: String) -> Result<f64, RtcError> {
    v.as_f64().ok_or_else(|| schema(path, "expected a number"))
}

fn u64_column(samples: &Value, name: &str, base: &str, len: usize, out: &mut [StatSample], set: fn(&mut StatSample, u64)) -> Result<(), RtcError> {
    if let Some(items) = column(samples, name, base, len, true)? {
        for (i, v) in items.iter().enumerate() {
            set(&mut out[i], as_u64(v, format!("{base}.{name}[{i}]"))?);
        }
    }
    Ok(())
}

fn parse_connection(conn: &Value, base: &str) -> Result<PeerConnectionTimeline, RtcError> {
    let id = conn
        .get("id")
        .and_then(Value::as_str)
        .ok_or_else(|| schema(format!("{base}.id"), "missing connection id"))?;
    let period = match conn.get("sampling_period") {
        None => 1.0,
        Some(v) => as_f64(v, format!("{base}.sampling_period"))?,
    };
    let samples_base = format!("{base}.samples");
    let samples = conn.get("samples").filter(|v| v.is_object()).ok_or_else(|| schema(&samples_base, "expected an object"))?;
    let t = match samples.get("t") {
        Some(Value::Array(t)) if !t.is_empty() => t,
        Some(Value::Array(_)) => return Err(schema(format!("{samples_base}.t"), "no samples")),
        _ => return Err(schema(format!("{samples_base}.t"), "missing time column")),
    };
    let len = t.len();
    let mut out = vec![StatSample::default(); len];
    for (i, v) in t.iter().enumerate() {
        out[i].t = as_f64(v, format!("{samples_base}.t[{i}]"))?;
    }
    u64_column(samples, "bytes_received", &samples_base, len, &mut out, |s, v| s.bytes_received = v)?;
    u64_column(samples, "highest_seq", &samples_base, len, &mut out, |s, v| s.highest_seq = v)?;
    u64_column(samples, "base_seq", &samples_base, len, &mut out, |s, v| s.base_seq = v)?;
    u64_column(samples, "packets_received", &samples_base, len, &mut out, |s, v| s.packets_received = v)?;
    u64_column(samples, "jitter_buffer_emitted", &samples_base, len, &mut out, |s, v| s.jitter_buffer_emitted = v)?;
    if let Some(items) = column(samples, "jitter_buffer_delay", &samples_base, len, true)? {
        for (i, v) in items.iter().enumerate() {
            out[i].jitter_buffer_delay = as_f64(v, format!("{samples_base}.jitter_buffer_delay[{i}]"))?;
        }
    }
    if let Some(items) = column(samples, "frame_times", &samples_base, len, false)? {
        for (i, v) in items.iter().enumerate() {
            let path = format!("{samples_base}.frame_times[{i}]");
            let frames = v.as_array().ok_or_else(|| schema(&path, "expected an array"))?;
            out[i].frame_times =
                frames.iter().enumerate().map(|(j, f)| as_f64(f, format!("{path}[{j}]"))).collect::<Result<_, _>>()?;
        }
    }
    if let Some(items) = column(samples, "transit_pairs", &samples_base, len, false)? {
        for (i, v) in items.iter().enumerate() {
            let path = format!("{samples_base}.transit_pairs[{i}]");
            let pairs = v.as_array().ok_or_else(|| schema(&path, "expected an array"))?;
            let mut parsed = Vec::with_capacity(pairs.len());
            for (j, p) in pairs.iter().enumerate() {
                let pp = format!("{path}[{j}]");
                match p.as_array().map(Vec::as_slice) {
                    Some([a, b]) => parsed.push((as_f64(a, format!("{pp}[0]"))?, as_f64(b, format!("{pp}[1]"))?)),
                    _ => return Err(schema(pp, "expected [rtp_timestamp, arrival]")),
                }
            }
            out[i].transit_pairs = parsed;
        }
    }
    Ok(PeerConnectionTimeline { connection_id: id.to_string(), samples: out, sampling_period: period })
}

/// Parse the native column-oriented dump.
pub fn parse_dump(text: &str) -> Result<Vec<PeerConnectionTimeline>, RtcError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| RtcError::Parse(e.to_string()))?;
    match doc.get("schema").and_then(Value::as_u64) {
        Some(1) => {}
        Some(other) => return Err(schema("$.schema", format!("unsupported schema version {other}"))),
        None => return Err(schema("$.schema", "missing schema version")),
    }
    let connections = doc
        .get("connections")
        .and_then(Value::as_array)
        .ok_or_else(|| schema("$.connections", "expected an array"))?;
    if connections.is_empty() {
        return Err(RtcError::EmptyDump);
    }
    connections.iter().enumerate().map(|(i, c)| parse_connection(c, &format!("$.connections[{i}]"))).collect()
}

/// The connection whose first sample is earliest; ties go to document order.
pub fn select_first_joined(timelines: &[PeerConnectionTimeline]) -> Option<&PeerConnectionTimeline> {
    timelines.iter().filter(|t| t.first_time().is_some()).fold(None, |best, t| match best {
        Some(b) if b.first_time() <= t.first_time() => Some(b),
        _ => Some(t),
    })
}
