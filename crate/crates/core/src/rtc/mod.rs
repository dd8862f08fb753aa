//! WebRTC receive-side indicators computed from stat-sample timelines:
//! bit rate, jitter delay, freeze count and RFC 3550 cumulative packet loss.

mod dump;
mod export;
mod internals;
mod metrics;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dump::{import_dump, parse_dump, select_first_joined, DumpFormat};
pub use export::{write_csv, write_svg};
pub use internals::parse_webrtc_internals;
pub use metrics::{
    analyze, analyze_all, bit_rate, freeze_count, interarrival_jitter, jitter_buffer_total, jitter_delay, packet_loss,
    qoe_flags, AnalysisSettings, ConnectionAnalysis, QoeFlag, QoeReport,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RtcError {
    #[error("data integrity error in {connection} at sample {index}: {reason}")]
    DataIntegrity { connection: String, index: usize, reason: String },
    #[error("{metric} needs at least {needed} samples, {connection} has {actual}")]
    NotEnoughSamples { connection: String, metric: &'static str, needed: usize, actual: usize },
    #[error("dump schema violation at {path}: {reason}")]
    Schema { path: String, reason: String },
    #[error("dump holds no connections")]
    EmptyDump,
    #[error("cannot parse dump: {0}")]
    Parse(String),
    #[error("I/O error: {0}")]
    Io(String),
}

/// One polling of a connection's receive statistics.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StatSample {
    /// Seconds since session start.
    pub t: f64,
    /// Cumulative bytes.
    pub bytes_received: u64,
    /// Extended highest RTP sequence number received.
    pub highest_seq: u64,
    /// First sequence number of the stream.
    pub base_seq: u64,
    pub packets_received: u64,
    /// (RTP timestamp, arrival time) pairs, both in seconds.
    pub transit_pairs: Vec<(f64, f64)>,
    /// Cumulative seconds packets spent in the jitter buffer.
    pub jitter_buffer_delay: f64,
    pub jitter_buffer_emitted: u64,
    /// Render times (seconds) of frames shown during this sample window.
    pub frame_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeerConnectionTimeline {
    pub connection_id: String,
    pub samples: Vec<StatSample>,
    pub sampling_period: f64,
}

impl PeerConnectionTimeline {
    pub fn new(connection_id: impl Into<String>, samples: Vec<StatSample>) -> Self {
        PeerConnectionTimeline { connection_id: connection_id.into(), samples, sampling_period: 1.0 }
    }

    pub fn first_time(&self) -> Option<f64> {
        self.samples.first().map(|s| s.t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    BitRateKbps,
    JitterDelayMs,
    FreezeCount,
    PacketLoss,
    /// Cumulative jitter-buffer time, not normalized by emitted packets.
    JitterBufferTotalMs,
    /// RFC 3550 inter-arrival jitter estimate.
    InterarrivalJitterMs,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::BitRateKbps => "bit_rate_kbps",
            Metric::JitterDelayMs => "jitter_delay_ms",
            Metric::FreezeCount => "freeze_count",
            Metric::PacketLoss => "packet_loss",
            Metric::JitterBufferTotalMs => "jitter_buffer_total_ms",
            Metric::InterarrivalJitterMs => "interarrival_jitter_ms",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Metric::BitRateKbps => "KBps",
            Metric::JitterDelayMs | Metric::JitterBufferTotalMs | Metric::InterarrivalJitterMs => "ms",
            Metric::FreezeCount => "freezes",
            Metric::PacketLoss => "packets",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub metric: Metric,
    pub points: Vec<(f64, f64)>,
    /// Sample indices with values worth a second look (e.g. negative loss from duplicates).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flagged: Vec<usize>,
}

impl MetricSeries {
    pub fn last_value(&self) -> Option<f64> {
        self.points.last().map(|p| p.1)
    }
}
