//! Endpoint superposition and engine scalability benchmarks.
//!
//! Load is open loop: generators inject one frame per source every frame
//! period regardless of how fast the system under test keeps up.

mod endpoint_bench;
mod engine_bench;
mod report;

pub use endpoint_bench::{run_endpoint_bench, EndpointBenchConfig};
pub use engine_bench::{run_engine_bench, EngineBenchConfig};
pub use report::{BenchKind, BenchReport, KernelMeans, LatencyStats, ReportFormat, StageMeans};

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown profile {0}")]
    UnknownProfile(String),
    #[error("bad duration {0:?}")]
    BadDuration(String),
    #[error("{0}")]
    Setup(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Offered-load profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchProfile {
    pub name: String,
    pub sample_rate: f64,
    pub frame_period_ms: f64,
    #[serde(with = "secs")]
    pub duration: Duration,
    pub warmup_frames: u64,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}

/// Name, sample rate, frame period (ms).
const PROFILES: [(&str, f64, f64); 5] = [
    ("lte10", 11.52e6, 1.0),
    ("lte20", 23.04e6, 1.0),
    ("nr20", 23.04e6, 0.5),
    ("nr40", 46.08e6, 0.5),
    // light profile for many-source endpoint runs on small machines
    ("lte1_4", 1.92e6, 1.0),
];

impl BenchProfile {
    pub fn by_name(name: &str) -> Result<Self, BenchError> {
        let (n, fs, p) = PROFILES
            .iter()
            .find(|(n, ..)| *n == name)
            .ok_or_else(|| BenchError::UnknownProfile(name.to_string()))?;
        Ok(BenchProfile {
            name: n.to_string(),
            sample_rate: *fs,
            frame_period_ms: *p,
            duration: Duration::from_secs(30),
            warmup_frames: 1000,
        })
    }

    /// The four single-link profiles of the engine table.
    pub fn table() -> Vec<Self> {
        ["lte10", "lte20", "nr20", "nr40"]
            .iter()
            .map(|n| Self::by_name(n).unwrap())
            .collect()
    }

    pub fn names() -> Vec<&'static str> {
        PROFILES.iter().map(|p| p.0).collect()
    }

    pub fn with_duration(mut self, d: Duration) -> Self {
        self.duration = d;
        self
    }

    pub fn with_warmup(mut self, frames: u64) -> Self {
        self.warmup_frames = frames;
        self
    }

    pub fn frame_samples(&self) -> usize {
        (self.sample_rate * self.frame_period_ms / 1e3).round() as usize
    }

    pub fn frame_period(&self) -> Duration {
        Duration::from_secs_f64(self.frame_period_ms / 1e3)
    }

    /// Frames per source over the whole run, warmup included.
    pub fn total_frames(&self) -> u64 {
        self.warmup_frames
            + (self.duration.as_secs_f64() / (self.frame_period_ms / 1e3)).round() as u64
    }

    pub fn offered_rate(&self) -> f64 {
        1e3 / self.frame_period_ms
    }
}

/// Parses `30s`, `500ms`, `2m` or a bare number of seconds.
pub fn parse_duration(text: &str) -> Result<Duration, BenchError> {
    let t = text.trim();
    let bad = || BenchError::BadDuration(text.to_string());
    let (num, scale) = if let Some(v) = t.strip_suffix("ms") {
        (v, 1e-3)
    } else if let Some(v) = t.strip_suffix('s') {
        (v, 1.0)
    } else if let Some(v) = t.strip_suffix('m') {
        (v, 60.0)
    } else {
        (t, 1.0)
    };
    let v: f64 = num.trim().parse().map_err(|_| bad())?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(bad());
    }
    Ok(Duration::from_secs_f64(v * scale))
}

/// Sleeps without spinning: on small machines a spinning generator would
/// steal the processor's CPU.
fn sleep_until(deadline: std::time::Instant) {
    let now = std::time::Instant::now();
    if deadline > now {
        std::thread::sleep(deadline - now);
    }
}
