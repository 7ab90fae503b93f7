use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use super::{
    sleep_until, BenchError, BenchKind, BenchProfile, BenchReport, KernelMeans, LatencyStats,
    StageMeans,
};
use crate::engine::{
    channel_key, ChannelPipeline, Coordinator, EngineConfig, IngestItem, KernelTimes, NodePorts,
    NoisePlacement, OutFrame, ProcessOutcome,
};
use crate::vradio::{host_now_ns, samples_to_ns, Direction, StreamConfig};
use crate::wire::PortType;
use crate::Cf32;

const CENTER_FREQ: f64 = 3.41e9;

#[derive(Debug, Clone)]
pub struct EngineBenchConfig {
    pub profile: BenchProfile,
    /// Transmitters and receivers, all on one channel.
    pub n_links: usize,
    pub drop_threshold_ms: f64,
    /// Percent.
    pub pass_threshold: f64,
    pub taps: usize,
    pub engine_noise: bool,
    pub egress_depth: usize,
    pub seed: u64,
}

impl EngineBenchConfig {
    pub fn new(profile: BenchProfile, n_links: usize) -> Self {
        EngineBenchConfig {
            profile,
            n_links,
            drop_threshold_ms: 5.0,
            pass_threshold: 10.0,
            taps: 1,
            engine_noise: true,
            egress_depth: 64,
            seed: 1,
        }
    }
}

#[derive(Default)]
struct ProcStats {
    e2e: Vec<f64>,
    queue_wait: Vec<f64>,
    processing: Vec<f64>,
    delivery: Vec<f64>,
    kernels: KernelTimes,
    frames: u64,
    first: Option<Instant>,
    last: Option<Instant>,
}

fn set(c: &mut Coordinator, node: &str, key: &str, v: Value) -> Result<(), BenchError> {
    c.set_node_param(node, key, &v)
        .map(|_| ())
        .map_err(|e| BenchError::Setup(e.to_string()))
}

/// Runs `n_links` transmitters and receivers through the channel pipeline.
/// Ingest is a local generator and delivery is a local consumer per
/// receiver, so only the processing path is measured.
pub fn run_engine_bench(cfg: &EngineBenchConfig) -> Result<BenchReport, BenchError> {
    let p = &cfg.profile;
    let n = cfg.n_links.max(1);
    let ns = p.frame_samples();
    let setup = |e: crate::engine::EngineError| BenchError::Setup(e.to_string());

    let mut ec = EngineConfig::local();
    if cfg.engine_noise {
        ec.noise_placement = NoisePlacement::Engine;
    }
    let mut coord = Coordinator::new(ec).map_err(setup)?;
    let (dummy, _) = crossbeam_channel::bounded::<OutFrame>(1);
    let mut outputs = Vec::new();
    let mut tx_ids = Vec::new();
    for i in 0..n {
        let name = format!("tx{i}");
        let u = coord
            .register(
                &name,
                PortType::Tx,
                NodePorts {
                    tx_port: 0,
                    rx_port: 0,
                    egress: dummy.clone(),
                },
            )
            .map_err(setup)?;
        set(
            &mut coord,
            &name,
            "position",
            json!([35.7713, -78.6749 + 1e-4 * i as f64, 10.0]),
        )?;
        set(&mut coord, &name, "freq_offset_hz", json!(150.0))?;
        let cfg_tx = StreamConfig::new(Direction::Tx, CENTER_FREQ, p.sample_rate, ns as u32);
        tx_ids.push(coord.attach(u, cfg_tx, 0).map_err(setup)?);

        let name = format!("rx{i}");
        let (s, r) = crossbeam_channel::bounded(cfg.egress_depth.max(1));
        let u = coord
            .register(
                &name,
                PortType::Rx,
                NodePorts {
                    tx_port: 0,
                    rx_port: 0,
                    egress: s,
                },
            )
            .map_err(setup)?;
        set(
            &mut coord,
            &name,
            "position",
            json!([35.7723, -78.6749 + 1e-4 * i as f64, 1.5]),
        )?;
        let cfg_rx = StreamConfig::new(Direction::Rx, CENTER_FREQ, p.sample_rate, ns as u32);
        coord.attach(u, cfg_rx, 0).map_err(setup)?;
        outputs.push(r);
    }
    drop(dummy);
    if cfg.taps > 1 {
        let taps: Vec<[f32; 2]> = (0..cfg.taps)
            .map(|l| [0.6f32.powi(l as i32), 0.1 * l as f32])
            .collect();
        coord
            .set_channel_param(CENTER_FREQ, "taps", &json!(taps))
            .map_err(setup)?;
    }
    let (view, counters) = coord
        .view(channel_key(CENTER_FREQ))
        .expect("channel exists");
    drop(coord);

    let warmup = p.warmup_frames;
    let threshold_ns = (cfg.drop_threshold_ms * 1e6) as i64;
    let ingested = Arc::new(AtomicU64::new(0));
    let delivered = Arc::new(AtomicU64::new(0));
    let dropped = Arc::new(AtomicU64::new(0));
    let links = n as u64;

    // mocked delivery: drain the egress queues without blocking wakeups, so
    // a hand-off never forces a context switch inside the timed section
    let consumers: Vec<_> = outputs
        .into_iter()
        .map(|r| {
            std::thread::spawn(move || loop {
                match r.try_recv() {
                    Ok(_) => continue,
                    Err(crossbeam_channel::TryRecvError::Empty) => {
                        std::thread::sleep(Duration::from_micros(200))
                    }
                    Err(crossbeam_channel::TryRecvError::Disconnected) => break,
                }
            })
        })
        .collect();

    let (input, queue) = crossbeam_channel::bounded::<IngestItem>(256);
    let processor = {
        let (ingested, delivered, dropped) = (ingested.clone(), delivered.clone(), dropped.clone());
        std::thread::spawn(move || {
            let mut pipeline = ChannelPipeline::new(counters);
            let mut st = ProcStats::default();
            for item in queue.iter() {
                let measured = item.wallclock_tx_time as u64 >= warmup;
                let t_deq = Instant::now();
                let wait = host_now_ns() - item.ingest_host_ns;
                if measured {
                    ingested.fetch_add(links, Ordering::Relaxed);
                }
                if wait > threshold_ns {
                    pipeline.drop_frame(&view, &item);
                    if measured {
                        dropped.fetch_add(links, Ordering::Relaxed);
                    }
                    continue;
                }
                let mut kt = KernelTimes::default();
                let out = pipeline.process(&view, &item, Some(&mut kt));
                let total = t_deq.elapsed();
                let e2e = host_now_ns() - item.ingest_host_ns;
                if !measured {
                    continue;
                }
                let lost = match out {
                    ProcessOutcome::Processed { dropped: d, .. } => d as u64,
                    ProcessOutcome::Ignored => links,
                };
                if e2e > threshold_ns {
                    dropped.fetch_add(links, Ordering::Relaxed);
                } else {
                    dropped.fetch_add(lost, Ordering::Relaxed);
                    delivered.fetch_add(links - lost, Ordering::Relaxed);
                    st.e2e.push(e2e as f64 / 1e3);
                }
                st.queue_wait.push(wait as f64 / 1e3);
                st.processing
                    .push(total.saturating_sub(kt.delivery).as_secs_f64() * 1e6);
                st.delivery.push(kt.delivery.as_secs_f64() * 1e6);
                st.kernels.add(&kt);
                st.frames += 1;
                st.first.get_or_insert(t_deq);
                st.last = Some(t_deq);
            }
            st
        })
    };

    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let x: Vec<Cf32> = (0..ns)
        .map(|_| Cf32::new(rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7)))
        .collect();
    let period = p.frame_period();
    let t0 = Instant::now() + Duration::from_millis(10);
    let total = p.total_frames();
    for k in 0..total {
        sleep_until(t0 + period.mul_f64(k as f64));
        for &id in &tx_ids {
            let samples = x.clone();
            let item = IngestItem {
                stream_id: id,
                emulated_tx_time: samples_to_ns(k as i64 * ns as i64, p.sample_rate),
                wallclock_tx_time: k as i64,
                ingest_host_ns: host_now_ns(),
                num_channels: 1,
                samples,
            };
            if input.try_send(item).is_err() && k >= warmup {
                ingested.fetch_add(links, Ordering::Relaxed);
                dropped.fetch_add(links, Ordering::Relaxed);
            }
        }
    }
    drop(input);
    let st = processor.join().expect("processor thread");
    for c in consumers {
        c.join().expect("consumer thread");
    }

    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let per_frame = |d: Duration| {
        if st.frames == 0 {
            0.0
        } else {
            d.as_secs_f64() * 1e6 / st.frames as f64
        }
    };
    let throughput = match (st.first, st.last) {
        (Some(a), Some(b)) if b > a => (st.frames - 1) as f64 / (b - a).as_secs_f64(),
        _ => 0.0,
    };
    let mut report = BenchReport {
        kind: BenchKind::Engine,
        profile: p.name.clone(),
        sample_rate: p.sample_rate,
        frame_period_ms: p.frame_period_ms,
        n,
        duration_s: p.duration.as_secs_f64(),
        warmup_frames: warmup,
        end_to_end: LatencyStats::from_us(st.e2e),
        stages: StageMeans {
            queue_wait_us: mean(&st.queue_wait),
            processing_us: mean(&st.processing),
            delivery_us: mean(&st.delivery),
        },
        kernels: KernelMeans {
            cir_us: per_frame(st.kernels.cir),
            path_loss_us: per_frame(st.kernels.path_loss),
            noise_us: per_frame(st.kernels.noise),
            freq_offset_us: per_frame(st.kernels.freq_offset),
        },
        offered_fps: p.offered_rate() * n as f64,
        throughput_fps: throughput,
        ingested: ingested.load(Ordering::Relaxed),
        delivered: delivered.load(Ordering::Relaxed),
        dropped: dropped.load(Ordering::Relaxed),
        drop_rate: 0.0,
        drop_threshold_ms: cfg.drop_threshold_ms,
        pass_threshold: cfg.pass_threshold,
        pass: false,
    };
    report.finish_drop_rate();
    Ok(report)
}
