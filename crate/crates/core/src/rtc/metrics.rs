use serde::Serialize;

use super::{Metric, MetricSeries, PeerConnectionTimeline, RtcError};
use crate::exec::{map_ordered, Execution};

fn integrity(timeline: &PeerConnectionTimeline, index: usize, reason: impl Into<String>) -> RtcError {
    RtcError::DataIntegrity { connection: timeline.connection_id.clone(), index, reason: reason.into() }
}

// negated comparisons below also reject NaN
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn check_time_order(timeline: &PeerConnectionTimeline) -> Result<(), RtcError> {
    for (i, pair) in timeline.samples.windows(2).enumerate() {
        if !(pair[1].t > pair[0].t) {
            return Err(integrity(timeline, i + 1, format!("time {} does not follow {}", pair[1].t, pair[0].t)));
        }
    }
    Ok(())
}

/// Received KBps between consecutive samples; one point per sample after the first.
pub fn bit_rate(timeline: &PeerConnectionTimeline) -> Result<MetricSeries, RtcError> {
    let samples = &timeline.samples;
    if samples.len() < 2 {
        return Err(RtcError::NotEnoughSamples {
            connection: timeline.connection_id.clone(),
            metric: "bit rate",
            needed: 2,
            actual: samples.len(),
        });
    }
    check_time_order(timeline)?;
    let mut points = Vec::with_capacity(samples.len() - 1);
    for i in 1..samples.len() {
        let (prev, cur) = (&samples[i - 1], &samples[i]);
        if cur.bytes_received < prev.bytes_received {
            return Err(integrity(timeline, i, "bytes_received decreased"));
        }
        let delta = (cur.bytes_received - prev.bytes_received) as f64;
        points.push((cur.t, delta / (cur.t - prev.t) / 1000.0));
    }
    Ok(MetricSeries { metric: Metric::BitRateKbps, points, flagged: Vec::new() })
}

#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn check_jitter_fields(timeline: &PeerConnectionTimeline) -> Result<(), RtcError> {
    for (i, s) in timeline.samples.iter().enumerate() {
        if !(s.jitter_buffer_delay >= 0.0) {
            return Err(integrity(timeline, i, "negative or NaN jitter_buffer_delay"));
        }
        if s.jitter_buffer_emitted == 0 && s.jitter_buffer_delay > 0.0 {
            return Err(integrity(timeline, i, "jitter buffer delay without emitted packets"));
        }
        if i > 0 {
            let prev = &timeline.samples[i - 1];
            if s.jitter_buffer_delay < prev.jitter_buffer_delay || s.jitter_buffer_emitted < prev.jitter_buffer_emitted {
                return Err(integrity(timeline, i, "jitter buffer counters decreased"));
            }
        }
    }
    Ok(())
}

/// Average time per emitted packet spent in the jitter buffer, in ms.
pub fn jitter_delay(timeline: &PeerConnectionTimeline) -> Result<MetricSeries, RtcError> {
    check_jitter_fields(timeline)?;
    let points = timeline
        .samples
        .iter()
        .map(|s| (s.t, s.jitter_buffer_delay * 1000.0 / s.jitter_buffer_emitted.max(1) as f64))
        .collect();
    Ok(MetricSeries { metric: Metric::JitterDelayMs, points, flagged: Vec::new() })
}

/// Cumulative jitter-buffer time in ms.
pub fn jitter_buffer_total(timeline: &PeerConnectionTimeline) -> Result<MetricSeries, RtcError> {
    check_jitter_fields(timeline)?;
    let points = timeline.samples.iter().map(|s| (s.t, s.jitter_buffer_delay * 1000.0)).collect();
    Ok(MetricSeries { metric: Metric::JitterBufferTotalMs, points, flagged: Vec::new() })
}

// Frame times are float seconds; without slack a gap of exactly the
// threshold can round to just below it.
const GAP_SLACK_MS: f64 = 1e-6;

/// Cumulative number of inter-frame gaps of at least `threshold_ms`.
pub fn freeze_count(timeline: &PeerConnectionTimeline, threshold_ms: f64) -> Result<MetricSeries, RtcError> {
    let mut previous: Option<f64> = None;
    let mut count = 0u64;
    let mut points = Vec::with_capacity(timeline.samples.len());
    for (i, s) in timeline.samples.iter().enumerate() {
        for &frame in &s.frame_times {
            if let Some(p) = previous {
                if frame < p {
                    return Err(integrity(timeline, i, format!("frame time {frame} precedes {p}")));
                }
                if (frame - p) * 1000.0 >= threshold_ms - GAP_SLACK_MS {
                    count += 1;
                }
            }
            previous = Some(frame);
        }
        points.push((s.t, count as f64));
    }
    Ok(MetricSeries { metric: Metric::FreezeCount, points, flagged: Vec::new() })
}

/// RFC 3550 cumulative loss: `(highest_seq - base_seq + 1) - packets_received`.
///
/// Negative values (duplicates) are kept and their sample indices flagged.
pub fn packet_loss(timeline: &PeerConnectionTimeline) -> Result<MetricSeries, RtcError> {
    let mut points = Vec::with_capacity(timeline.samples.len());
    let mut flagged = Vec::new();
    for (i, s) in timeline.samples.iter().enumerate() {
        // highest == base - 1 is the legitimate "nothing received yet" state
        if s.highest_seq + 1 < s.base_seq {
            return Err(integrity(timeline, i, "highest_seq below base_seq"));
        }
        let expected = (s.highest_seq + 1 - s.base_seq) as i64;
        let lost = expected - s.packets_received as i64;
        if lost < 0 {
            flagged.push(i);
        }
        points.push((s.t, lost as f64));
    }
    Ok(MetricSeries { metric: Metric::PacketLoss, points, flagged })
}

/// RFC 3550 inter-arrival jitter `J += (|D| - J) / 16`, reported in ms at the
/// end of each sample. `None` when the timeline carries no transit data.
pub fn interarrival_jitter(timeline: &PeerConnectionTimeline) -> Option<MetricSeries> {
    if timeline.samples.iter().all(|s| s.transit_pairs.is_empty()) {
        return None;
    }
    let mut jitter = 0.0f64;
    let mut previous_transit: Option<f64> = None;
    let mut points = Vec::with_capacity(timeline.samples.len());
    for s in &timeline.samples {
        for &(rtp, arrival) in &s.transit_pairs {
            let transit = arrival - rtp;
            if let Some(prev) = previous_transit {
                let d = (transit - prev).abs();
                jitter += (d - jitter) / 16.0;
            }
            previous_transit = Some(transit);
        }
        points.push((s.t, jitter * 1000.0));
    }
    Some(MetricSeries { metric: Metric::InterarrivalJitterMs, points, flagged: Vec::new() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisSettings {
    pub freeze_threshold_ms: f64,
    pub jitter_threshold_ms: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings { freeze_threshold_ms: 500.0, jitter_threshold_ms: 75.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectionAnalysis {
    pub connection_id: String,
    pub bit_rate: MetricSeries,
    pub jitter_delay: MetricSeries,
    pub freeze_count: MetricSeries,
    pub packet_loss: MetricSeries,
    pub jitter_buffer_total: MetricSeries,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interarrival_jitter: Option<MetricSeries>,
}

impl ConnectionAnalysis {
    /// The four headline series.
    pub fn primary_series(&self) -> [&MetricSeries; 4] {
        [&self.bit_rate, &self.jitter_delay, &self.freeze_count, &self.packet_loss]
    }

    pub fn all_series(&self) -> Vec<&MetricSeries> {
        let mut all = self.primary_series().to_vec();
        all.push(&self.jitter_buffer_total);
        if let Some(s) = &self.interarrival_jitter {
            all.push(s);
        }
        all
    }
}

pub fn analyze(timeline: &PeerConnectionTimeline, settings: &AnalysisSettings) -> Result<ConnectionAnalysis, RtcError> {
    Ok(ConnectionAnalysis {
        connection_id: timeline.connection_id.clone(),
        bit_rate: bit_rate(timeline)?,
        jitter_delay: jitter_delay(timeline)?,
        freeze_count: freeze_count(timeline, settings.freeze_threshold_ms)?,
        packet_loss: packet_loss(timeline)?,
        jitter_buffer_total: jitter_buffer_total(timeline)?,
        interarrival_jitter: interarrival_jitter(timeline),
    })
}

/// Analyze many connections, one task per connection.
pub fn analyze_all(
    timelines: &[PeerConnectionTimeline],
    settings: &AnalysisSettings,
    execution: Execution,
) -> Vec<Result<ConnectionAnalysis, RtcError>> {
    map_ordered(timelines, execution, |t| analyze(t, settings))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QoeFlag {
    pub connection_id: String,
    pub metric: Metric,
    pub value: f64,
    pub threshold: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct QoeReport {
    pub entries: Vec<QoeFlag>,
}

impl QoeReport {
    pub fn flagged(&self) -> impl Iterator<Item = &QoeFlag> {
        self.entries.iter().filter(|e| e.flagged)
    }
}

/// Flag connections whose final jitter delay reaches `threshold_ms`.
pub fn qoe_flags(analyses: &[ConnectionAnalysis], threshold_ms: f64) -> QoeReport {
    let entries = analyses
        .iter()
        .filter_map(|a| {
            a.jitter_delay.last_value().map(|value| QoeFlag {
                connection_id: a.connection_id.clone(),
                metric: Metric::JitterDelayMs,
                value,
                threshold: threshold_ms,
                flagged: value >= threshold_ms,
            })
        })
        .collect();
    QoeReport { entries }
}
