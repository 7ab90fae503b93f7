use std::io::Write;

use serde::{Deserialize, Serialize};

use super::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchKind {
    Endpoint,
    Engine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(BenchError::Setup(format!("unknown report format {s}"))),
        }
    }
}

/// Latency summary in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: u64,
    pub mean_us: f64,
    pub p50_us: f64,
    pub p90_us: f64,
    pub p99_us: f64,
    pub max_us: f64,
}

impl LatencyStats {
    pub fn from_us(mut v: Vec<f64>) -> Self {
        if v.is_empty() {
            return Self::default();
        }
        v.sort_by(f64::total_cmp);
        let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
        LatencyStats {
            count: v.len() as u64,
            mean_us: v.iter().sum::<f64>() / v.len() as f64,
            p50_us: q(0.5),
            p90_us: q(0.9),
            p99_us: q(0.99),
            max_us: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageMeans {
    pub queue_wait_us: f64,
    pub processing_us: f64,
    pub delivery_us: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KernelMeans {
    pub cir_us: f64,
    pub path_loss_us: f64,
    pub noise_us: f64,
    pub freq_offset_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub kind: BenchKind,
    pub profile: String,
    pub sample_rate: f64,
    pub frame_period_ms: f64,
    /// Sources (endpoint) or transmitter/receiver pairs (engine).
    pub n: usize,
    pub duration_s: f64,
    pub warmup_frames: u64,
    pub end_to_end: LatencyStats,
    pub stages: StageMeans,
    pub kernels: KernelMeans,
    pub offered_fps: f64,
    pub throughput_fps: f64,
    pub ingested: u64,
    pub delivered: u64,
    pub dropped: u64,
    /// Percent.
    pub drop_rate: f64,
    pub drop_threshold_ms: f64,
    /// Percent.
    pub pass_threshold: f64,
    pub pass: bool,
}

/// One CSV row; the leading columns follow the engine latency table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Row {
    kind: BenchKind,
    profile: String,
    sample_rate_hz: f64,
    frame_period_ms: f64,
    n: usize,
    end_to_end_us: f64,
    queue_wait_us: f64,
    processing_us: f64,
    delivery_us: f64,
    cir_us: f64,
    path_loss_us: f64,
    noise_us: f64,
    freq_offset_us: f64,
    throughput_fps: f64,
    drop_rate_pct: f64,
    offered_fps: f64,
    p50_us: f64,
    p90_us: f64,
    p99_us: f64,
    max_us: f64,
    samples: u64,
    duration_s: f64,
    warmup_frames: u64,
    ingested: u64,
    delivered: u64,
    dropped: u64,
    drop_threshold_ms: f64,
    pass_threshold_pct: f64,
    pass: bool,
}

impl From<&BenchReport> for Row {
    fn from(r: &BenchReport) -> Self {
        Row {
            kind: r.kind,
            profile: r.profile.clone(),
            sample_rate_hz: r.sample_rate,
            frame_period_ms: r.frame_period_ms,
            n: r.n,
            end_to_end_us: r.end_to_end.mean_us,
            queue_wait_us: r.stages.queue_wait_us,
            processing_us: r.stages.processing_us,
            delivery_us: r.stages.delivery_us,
            cir_us: r.kernels.cir_us,
            path_loss_us: r.kernels.path_loss_us,
            noise_us: r.kernels.noise_us,
            freq_offset_us: r.kernels.freq_offset_us,
            throughput_fps: r.throughput_fps,
            drop_rate_pct: r.drop_rate,
            offered_fps: r.offered_fps,
            p50_us: r.end_to_end.p50_us,
            p90_us: r.end_to_end.p90_us,
            p99_us: r.end_to_end.p99_us,
            max_us: r.end_to_end.max_us,
            samples: r.end_to_end.count,
            duration_s: r.duration_s,
            warmup_frames: r.warmup_frames,
            ingested: r.ingested,
            delivered: r.delivered,
            dropped: r.dropped,
            drop_threshold_ms: r.drop_threshold_ms,
            pass_threshold_pct: r.pass_threshold,
            pass: r.pass,
        }
    }
}

impl From<Row> for BenchReport {
    fn from(r: Row) -> Self {
        BenchReport {
            kind: r.kind,
            profile: r.profile,
            sample_rate: r.sample_rate_hz,
            frame_period_ms: r.frame_period_ms,
            n: r.n,
            duration_s: r.duration_s,
            warmup_frames: r.warmup_frames,
            end_to_end: LatencyStats {
                count: r.samples,
                mean_us: r.end_to_end_us,
                p50_us: r.p50_us,
                p90_us: r.p90_us,
                p99_us: r.p99_us,
                max_us: r.max_us,
            },
            stages: StageMeans {
                queue_wait_us: r.queue_wait_us,
                processing_us: r.processing_us,
                delivery_us: r.delivery_us,
            },
            kernels: KernelMeans {
                cir_us: r.cir_us,
                path_loss_us: r.path_loss_us,
                noise_us: r.noise_us,
                freq_offset_us: r.freq_offset_us,
            },
            offered_fps: r.offered_fps,
            throughput_fps: r.throughput_fps,
            ingested: r.ingested,
            delivered: r.delivered,
            dropped: r.dropped,
            drop_rate: r.drop_rate_pct,
            drop_threshold_ms: r.drop_threshold_ms,
            pass_threshold: r.pass_threshold_pct,
            pass: r.pass,
        }
    }
}

impl BenchReport {
    pub fn finish_drop_rate(&mut self) {
        self.drop_rate = if self.ingested == 0 {
            0.0
        } else {
            100.0 * self.dropped as f64 / self.ingested as f64
        };
        self.pass = self.drop_rate < self.pass_threshold;
    }

    pub fn text(&self) -> String {
        let e = &self.end_to_end;
        let mut s = format!(
            "{} bench, profile {} ({:.2} MHz / {} ms), n={}\n",
            match self.kind {
                BenchKind::Endpoint => "endpoint",
                BenchKind::Engine => "engine",
            },
            self.profile,
            self.sample_rate / 1e6,
            self.frame_period_ms,
            self.n
        );
        s += &format!(
            "  end-to-end      {:>10.2} us  (p50 {:.2}, p90 {:.2}, p99 {:.2}, max {:.2}; {} samples)\n",
            e.mean_us, e.p50_us, e.p90_us, e.p99_us, e.max_us, e.count
        );
        s += &format!("    queue wait    {:>10.2} us\n", self.stages.queue_wait_us);
        s += &format!("    processing    {:>10.2} us\n", self.stages.processing_us);
        s += &format!("    delivery      {:>10.2} us\n", self.stages.delivery_us);
        if self.kind == BenchKind::Engine {
            s += &format!("    cir           {:>10.2} us\n", self.kernels.cir_us);
            s += &format!("    path loss     {:>10.2} us\n", self.kernels.path_loss_us);
            s += &format!("    noise         {:>10.2} us\n", self.kernels.noise_us);
            s += &format!(
                "    freq offset   {:>10.2} us\n",
                self.kernels.freq_offset_us
            );
        }
        s += &format!(
            "  throughput      {:>10.1} frames/s (offered {:.1})\n",
            self.throughput_fps, self.offered_fps
        );
        s += &format!(
            "  drop rate       {:>10.3} %  ({} of {}; threshold {} ms) -> {}\n",
            self.drop_rate,
            self.dropped,
            self.ingested,
            self.drop_threshold_ms,
            if self.pass { "PASS" } else { "FAIL" }
        );
        s
    }

    pub fn write_csv<W: Write>(reports: &[BenchReport], w: W) -> Result<(), BenchError> {
        let mut wr = csv::Writer::from_writer(w);
        for r in reports {
            wr.serialize(Row::from(r))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Vec<BenchReport>, BenchError> {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let mut v = Vec::new();
        for row in rd.deserialize::<Row>() {
            v.push(row?.into());
        }
        Ok(v)
    }

    pub fn render(reports: &[BenchReport], format: ReportFormat) -> Result<String, BenchError> {
        Ok(match format {
            ReportFormat::Text => reports
                .iter()
                .map(BenchReport::text)
                .collect::<Vec<_>>()
                .join("\n"),
            ReportFormat::Json => serde_json::to_string_pretty(reports)?,
            ReportFormat::Csv => {
                let mut buf = Vec::new();
                Self::write_csv(reports, &mut buf)?;
                String::from_utf8(buf).expect("csv output is utf-8")
            }
        })
    }
}
