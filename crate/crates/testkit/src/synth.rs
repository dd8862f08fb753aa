use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use webtestkit::docker::VersionSelector;
use webtestkit::rtc::{PeerConnectionTimeline, StatSample};
use webtestkit::scenario::{BrowserScenario, BrowserType, ScenarioEntry};
use webtestkit::{BrowserKind, VersionString};

/// A generated timeline plus the values it was built from.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub timeline: PeerConnectionTimeline,
    /// Dropped sequence numbers at or below the highest received one, per sample.
    pub lost: Vec<i64>,
    /// Cumulative inter-frame gaps of at least `FREEZE_MS`, per sample.
    pub freezes: Vec<u64>,
    /// Average jitter-buffer time per emitted packet in ms, per sample.
    pub jitter_ms: Vec<f64>,
    pub total_bytes: u64,
}

pub const FREEZE_MS: u64 = 500;

/// Timeline from `seed`. Times are whole milliseconds, jitter-buffer totals
/// multiples of 1/1024 s, so derived values are exact in binary floating point.
pub fn synthetic(seed: u64) -> Synthetic {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = rng.random_range(2..40usize);
    let period_ms = [100u64, 250, 500, 1000][rng.random_range(0..4)];
    let origin_ms = rng.random_range(0..5_000u64);
    let times_ms: Vec<u64> = (0..n as u64).map(|i| origin_ms + i * period_ms).collect();
    let drop_p = rng.random_range(0.0..0.3);
    let base_seq = rng.random_range(1..60_000u64);
    let with_transit = rng.random_bool(0.5);

    let mut next_seq = base_seq;
    let mut highest = base_seq - 1;
    let mut received = 0u64;
    let mut dropped: Vec<u64> = Vec::new();
    let mut bytes = 0u64;
    let mut emitted = 0u64;
    let mut delay_units = 0u64; // 1/1024 s

    // frame stream with integer-ms gaps, some exactly at the threshold
    let mut frames_ms = Vec::new();
    let mut f = origin_ms.saturating_sub(rng.random_range(0..period_ms));
    let end = *times_ms.last().unwrap();
    while f <= end {
        frames_ms.push(f);
        f += match rng.random_range(0..20) {
            0 => FREEZE_MS,
            1 => FREEZE_MS - 1,
            2 => rng.random_range(FREEZE_MS..3 * FREEZE_MS),
            _ => rng.random_range(10..60),
        };
    }

    let mut samples = Vec::with_capacity(n);
    let (mut lost, mut freezes, mut jitter_ms) = (Vec::new(), Vec::new(), Vec::new());
    let mut frame_idx = 0;
    let mut freeze_total = 0u64;
    let mut prev_frame: Option<u64> = None;
    let mut transit_clock = 0.0f64;
    for (i, &t_ms) in times_ms.iter().enumerate() {
        let mut transit_pairs = Vec::new();
        if i > 0 {
            bytes += rng.random_range(0..200_000u64);
            for _ in 0..rng.random_range(0..50) {
                let seq = next_seq;
                next_seq += 1;
                if rng.random_bool(drop_p) {
                    dropped.push(seq);
                } else {
                    received += 1;
                    highest = seq;
                    emitted += 1;
                    delay_units += rng.random_range(0..200u64);
                    if with_transit {
                        transit_clock += 0.02;
                        transit_pairs.push((transit_clock, transit_clock + rng.random_range(0.010..0.090)));
                    }
                }
            }
        }
        let mut frame_times = Vec::new();
        while frame_idx < frames_ms.len() && frames_ms[frame_idx] <= t_ms {
            let frame = frames_ms[frame_idx];
            if let Some(p) = prev_frame {
                if frame - p >= FREEZE_MS {
                    freeze_total += 1;
                }
            }
            prev_frame = Some(frame);
            frame_times.push(frame as f64 / 1000.0);
            frame_idx += 1;
        }
        lost.push(dropped.iter().filter(|&&s| s <= highest).count() as i64);
        freezes.push(freeze_total);
        jitter_ms.push((delay_units * 125) as f64 / 128.0 / emitted.max(1) as f64);
        samples.push(StatSample {
            t: t_ms as f64 / 1000.0,
            bytes_received: bytes,
            highest_seq: highest,
            base_seq,
            packets_received: received,
            transit_pairs,
            jitter_buffer_delay: delay_units as f64 / 1024.0,
            jitter_buffer_emitted: emitted,
            frame_times,
        });
    }
    let mut timeline = PeerConnectionTimeline::new(format!("synthetic-{seed}"), samples);
    timeline.sampling_period = period_ms as f64 / 1000.0;
    Synthetic { timeline, lost, freezes, jitter_ms, total_bytes: bytes }
}

/// Timeline whose final average jitter-buffer delay is `final_ms`.
pub fn timeline_with_final_jitter(id: &str, final_ms: f64) -> PeerConnectionTimeline {
    let emitted = 10_000u64;
    let samples = (0..=10u64)
        .map(|i| StatSample {
            t: i as f64,
            bytes_received: i * 8_510,
            highest_seq: i * 1_000,
            base_seq: 1,
            packets_received: i * 1_000,
            jitter_buffer_delay: final_ms / 1000.0 * (i * emitted / 10) as f64,
            jitter_buffer_emitted: i * emitted / 10,
            ..StatSample::default()
        })
        .collect();
    PeerConnectionTimeline::new(id, samples)
}

/// Serialize timelines in the native column-oriented dump layout.
pub fn native_dump(timelines: &[PeerConnectionTimeline]) -> String {
    let connections: Vec<serde_json::Value> = timelines
        .iter()
        .map(|tl| {
            let col = |f: &dyn Fn(&StatSample) -> serde_json::Value| -> Vec<serde_json::Value> { tl.samples.iter().map(f).collect() };
            serde_json::json!({
                "id": tl.connection_id,
                "sampling_period": tl.sampling_period,
                "samples": {
                    "t": col(&|s| s.t.into()),
                    "bytes_received": col(&|s| s.bytes_received.into()),
                    "highest_seq": col(&|s| s.highest_seq.into()),
                    "base_seq": col(&|s| s.base_seq.into()),
                    "packets_received": col(&|s| s.packets_received.into()),
                    "jitter_buffer_delay": col(&|s| s.jitter_buffer_delay.into()),
                    "jitter_buffer_emitted": col(&|s| s.jitter_buffer_emitted.into()),
                    "frame_times": col(&|s| s.frame_times.clone().into()),
                    "transit_pairs": col(&|s| s.transit_pairs.iter().map(|&(a, b)| serde_json::json!([a, b])).collect::<Vec<_>>().into()),
                }
            })
        })
        .collect();
    serde_json::json!({ "schema": 1, "connections": connections }).to_string()
}

/// Random valid scenario from `seed`: 1..6 invocations of 1..4 browsers.
pub fn random_scenario(seed: u64) -> BrowserScenario {
    let mut rng = StdRng::seed_from_u64(seed);
    let invocations = (0..rng.random_range(1..6))
        .map(|_| {
            (0..rng.random_range(1..4))
                .map(|_| {
                    let kind = BrowserKind::ALL[rng.random_range(0..BrowserKind::ALL.len())];
                    let docker = kind.dockerizable() && rng.random_bool(0.7);
                    let version = if !docker {
                        VersionSelector::Latest
                    } else {
                        match rng.random_range(0..5) {
                            0 => VersionSelector::Latest,
                            1 => VersionSelector::LatestMinus(rng.random_range(1..6)),
                            2 => VersionSelector::Beta,
                            3 => VersionSelector::Dev,
                            _ => {
                                let text = format!("{}.{}", rng.random_range(60..130), rng.random_range(0..10));
                                VersionSelector::Fixed(VersionString::parse(&text).expect("generated version"))
                            }
                        }
                    };
                    ScenarioEntry::new(BrowserType { kind, docker }, version).expect("generated entry")
                })
                .collect()
        })
        .collect();
    BrowserScenario { invocations }
}
