use std::collections::HashMap;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::{
    sleep_until, BenchError, BenchKind, BenchProfile, BenchReport, KernelMeans, LatencyStats,
    StageMeans,
};
use crate::vradio::{InsertOutcome, TimedBuffer};
use crate::Cf32;

#[derive(Debug, Clone)]
pub struct EndpointBenchConfig {
    pub profile: BenchProfile,
    pub n_sources: usize,
    /// How long past a window's end the receiver waits for stragglers.
    pub settle_ms: f64,
    pub drop_threshold_ms: f64,
    /// Percent.
    pub pass_threshold: f64,
    pub seed: u64,
}

impl EndpointBenchConfig {
    pub fn new(profile: BenchProfile, n_sources: usize) -> Self {
        EndpointBenchConfig {
            profile,
            n_sources,
            settle_ms: 5.0,
            drop_threshold_ms: 5.0,
            pass_threshold: 10.0,
            seed: 7,
        }
    }
}

struct State {
    buffer: TimedBuffer,
    /// Window index -> host instants at which each source's insert finished.
    inserted: HashMap<u64, Vec<Instant>>,
}

/// One receive buffer fed by `n_sources` generator threads. Latency is
/// measured from each insert to the release of the window that holds it.
pub fn run_endpoint_bench(cfg: &EndpointBenchConfig) -> Result<BenchReport, BenchError> {
    let p = &cfg.profile;
    if !(1..=64).contains(&cfg.n_sources) {
        return Err(BenchError::Setup(format!(
            "n_sources {} outside 1..=64",
            cfg.n_sources
        )));
    }
    let n = cfg.n_sources;
    let ns = p.frame_samples();
    let period = p.frame_period();
    let total = p.total_frames();
    let warmup = p.warmup_frames;
    let settle = Duration::from_secs_f64(cfg.settle_ms / 1e3);

    let mut buffer = TimedBuffer::new(1, ns as i64 * 64);
    buffer.start_at(0);
    let shared = Arc::new((
        Mutex::new(State {
            buffer,
            inserted: HashMap::new(),
        }),
        Condvar::new(),
    ));
    let t0 = Instant::now() + Duration::from_millis(20);

    let generators: Vec<_> = (0..n)
        .map(|i| {
            let shared = shared.clone();
            let mut rng = StdRng::seed_from_u64(cfg.seed + i as u64);
            let x: Vec<Cf32> = (0..ns)
                .map(|_| Cf32::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)))
                .collect();
            std::thread::spawn(move || {
                for k in 0..total {
                    sleep_until(t0 + period.mul_f64(k as f64));
                    let samples = x.clone();
                    let (m, cv) = &*shared;
                    let mut s = m.lock().unwrap();
                    if s.buffer.insert(k as i64 * ns as i64, i as u32, samples)
                        == InsertOutcome::Buffered
                    {
                        s.inserted.entry(k).or_default().push(Instant::now());
                        cv.notify_all();
                    }
                }
            })
        })
        .collect();

    let mut out = vec![Cf32::new(0.0, 0.0); ns];
    let (mut lat, mut waits, mut drains) = (Vec::new(), Vec::new(), Vec::new());
    let (mut ingested, mut delivered, mut dropped) = (0u64, 0u64, 0u64);
    let mut first_last: Option<(Instant, Instant)> = None;
    let threshold = Duration::from_secs_f64(cfg.drop_threshold_ms / 1e3);
    for k in 0..total {
        let deadline = t0 + period.mul_f64((k + 1) as f64) + settle;
        let (m, cv) = &*shared;
        let mut s = m.lock().unwrap();
        loop {
            let have = s.inserted.get(&k).map_or(0, Vec::len);
            let now = Instant::now();
            if have >= n || now >= deadline {
                break;
            }
            s = cv.wait_timeout(s, deadline - now).unwrap().0;
        }
        let t_start = Instant::now();
        // a reader stalled past the buffer capacity finds its window evicted
        let overrun = s.buffer.drain(k as i64 * ns as i64, &mut out).is_err();
        let t_done = Instant::now();
        let times = s.inserted.remove(&k).unwrap_or_default();
        drop(s);
        std::hint::black_box(&out);
        if k < warmup {
            continue;
        }
        if overrun {
            ingested += n as u64;
            dropped += n as u64;
            continue;
        }
        ingested += n as u64;
        dropped += (n - times.len()) as u64;
        for t in times {
            let l = t_done - t;
            if l > threshold {
                dropped += 1;
            } else {
                delivered += 1;
            }
            lat.push(l.as_secs_f64() * 1e6);
            waits.push((t_start.saturating_duration_since(t)).as_secs_f64() * 1e6);
        }
        drains.push((t_done - t_start).as_secs_f64() * 1e6);
        first_last = Some((first_last.map_or(t_done, |f| f.0), t_done));
    }
    for g in generators {
        g.join().expect("generator thread");
    }

    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let windows = drains.len() as f64;
    let throughput = match first_last {
        Some((a, b)) if b > a => (windows - 1.0) * n as f64 / (b - a).as_secs_f64(),
        _ => 0.0,
    };
    let mut report = BenchReport {
        kind: BenchKind::Endpoint,
        profile: p.name.clone(),
        sample_rate: p.sample_rate,
        frame_period_ms: p.frame_period_ms,
        n,
        duration_s: p.duration.as_secs_f64(),
        warmup_frames: warmup,
        end_to_end: LatencyStats::from_us(lat),
        stages: StageMeans {
            queue_wait_us: mean(&waits),
            processing_us: mean(&drains),
            delivery_us: 0.0,
        },
        kernels: KernelMeans::default(),
        offered_fps: p.offered_rate() * n as f64,
        throughput_fps: throughput,
        ingested,
        delivered,
        dropped,
        drop_rate: 0.0,
        drop_threshold_ms: cfg.drop_threshold_ms,
        pass_threshold: cfg.pass_threshold,
        pass: false,
    };
    report.finish_drop_rate();
    Ok(report)
}
