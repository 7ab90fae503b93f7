//! Scripted two-node scenario: a fixed base station and a node driving away
//! along a straight road, on an FDD pair of carriers with the two-ray model.
//! Received power is averaged per reporting interval on both links.

use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::engine::{Engine, EngineConfig, EngineError};
use crate::mobility::{enu_to_geodetic, Geodetic};
use crate::propagation::{power_to_db, PathLossModel};
use crate::vradio::{
    Direction, Endpoint, EndpointConfig, RxStream, Schedule, StreamConfig, TxStream, VirtualClock,
    VradioError,
};
use crate::wire::{Counters, PortType};
use crate::Cf32;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Radio(#[from] VradioError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Thread(String),
}

#[derive(Debug, Clone)]
pub struct DemoConfig {
    pub duration: Duration,
    pub report_every: Duration,
    pub sample_rate: f64,
    pub frame_samples: usize,
    pub downlink_hz: f64,
    pub uplink_hz: f64,
    pub base: Geodetic,
    /// Height of the moving node, m.
    pub mobile_alt: f64,
    pub start_distance_m: f64,
    pub speed_mps: f64,
    /// Baseband tone offset, Hz.
    pub tone_hz: f64,
    /// Receiver thermal noise; off by default so the power curve shows the
    /// channel alone.
    pub noise: bool,
    /// Datagram size on the loopback data plane.
    pub mtu: usize,
    /// Latency budgets. These sit well above the scheduling stalls of a
    /// shared host so a long run stays drop free.
    pub drop_threshold_ms: f64,
    pub tx_buffer_ms: f64,
    pub rx_settle_ms: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            duration: Duration::from_secs(60),
            report_every: Duration::from_secs(1),
            sample_rate: 1.92e6,
            frame_samples: 1920,
            downlink_hz: 3.41e9,
            uplink_hz: 3.32e9,
            base: Geodetic::new(35.7713, -78.6749, 6.0),
            mobile_alt: 1.5,
            start_distance_m: 500.0,
            speed_mps: 20.0,
            tone_hz: 100e3,
            noise: false,
            mtu: 16384,
            drop_threshold_ms: 50.0,
            tx_buffer_ms: 40.0,
            rx_settle_ms: 20.0,
        }
    }
}

/// One reporting interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSample {
    pub t_s: f64,
    pub distance_m: f64,
    pub downlink_dbm: f64,
    pub uplink_dbm: f64,
    /// Transmit power minus the engine's path loss at the end of the interval.
    pub downlink_model_dbm: f64,
    pub uplink_model_dbm: f64,
}

#[derive(Debug, Clone)]
pub struct DemoResult {
    pub samples: Vec<PowerSample>,
    pub counters: Counters,
    pub rx_timeouts: u64,
    pub rx_late_arrivals: u64,
    pub rx_overflows: u64,
}

impl DemoResult {
    /// Drops anywhere on the path: engine, reassembly or receiver buffers.
    pub fn total_drops(&self) -> u64 {
        self.counters.frames_dropped
            + self.counters.reassembly_dropped
            + self.rx_timeouts
            + self.rx_late_arrivals
            + self.rx_overflows
    }
}

pub fn write_csv<W: Write>(samples: &[PowerSample], w: W) -> Result<(), DemoError> {
    let mut wr = csv::Writer::from_writer(w);
    for s in samples {
        wr.serialize(s)?;
    }
    wr.flush()?;
    Ok(())
}

fn tone(cfg: &DemoConfig, k: usize) -> Vec<Cf32> {
    let w = std::f64::consts::TAU * cfg.tone_hz / cfg.sample_rate;
    let n0 = (k * cfg.frame_samples) as f64;
    (0..cfg.frame_samples)
        .map(|i| {
            Cf32::from_polar(
                1.0,
                (w * (n0 + i as f64)).rem_euclid(std::f64::consts::TAU) as f32,
            )
        })
        .collect()
}

fn transmit(
    mut tx: TxStream,
    cfg: DemoConfig,
    start: i64,
    stop: Arc<AtomicBool>,
) -> Result<(), VradioError> {
    let mut k = 0;
    while !stop.load(Ordering::Acquire) {
        let schedule = if k == 0 {
            Schedule::At(start)
        } else {
            Schedule::Now
        };
        tx.send(&tone(&cfg, k), schedule)?;
        k += 1;
    }
    Ok(())
}

/// Mean power of each reporting interval, in dB relative to full scale.
fn receive(
    mut rx: RxStream,
    cfg: DemoConfig,
    start: i64,
    bins: usize,
) -> Result<(Vec<f64>, RxStream), VradioError> {
    let per_bin = (cfg.report_every.as_secs_f64() * cfg.sample_rate / cfg.frame_samples as f64)
        .round() as usize;
    let mut out = vec![Cf32::new(0.0, 0.0); cfg.frame_samples];
    let mut powers = Vec::with_capacity(bins);
    let mut first = true;
    for _ in 0..bins {
        let mut acc = 0.0;
        for _ in 0..per_bin {
            let schedule = if first {
                Schedule::At(start)
            } else {
                Schedule::Now
            };
            first = false;
            rx.recv(&mut out, schedule, Duration::from_secs(1))?;
            acc += out.iter().map(|s| s.norm_sqr() as f64).sum::<f64>();
        }
        powers.push(acc / (per_bin * cfg.frame_samples) as f64);
    }
    Ok((powers, rx))
}

/// Runs the scenario in real time. `on_sample` sees each interval as it
/// completes.
pub fn run_demo(
    cfg: &DemoConfig,
    mut on_sample: impl FnMut(&PowerSample),
) -> Result<DemoResult, DemoError> {
    let engine_cfg = EngineConfig {
        default_path_loss: PathLossModel::two_ray(),
        mtu: cfg.mtu,
        drop_threshold_ms: cfg.drop_threshold_ms,
        ..EngineConfig::local()
    };
    let engine = Engine::start(engine_cfg)?;
    let addr = engine.control_addr().to_string();
    // both radios share one disciplined time base
    let clock = Arc::new(VirtualClock::new());
    let ep = |name: &str| {
        let mut c = EndpointConfig::new(name, addr.clone());
        c.port_type = PortType::RxTx;
        c.mtu = cfg.mtu;
        c.buffer_threshold_ms = cfg.tx_buffer_ms;
        c.rx_settle_ms = cfg.rx_settle_ms;
        c.capacity_ms = 4.0 * (cfg.tx_buffer_ms + cfg.rx_settle_ms);
        c.noise_power = if cfg.noise { None } else { Some(0.0) };
        Endpoint::with_clock(c, clock.clone())
    };
    let base = ep("base")?;
    let mobile = ep("mobile")?;

    let mut m = Map::new();
    m.insert("position".into(), json!(cfg.base));
    base.update(m)?;

    let travel = cfg.speed_mps * (cfg.duration.as_secs_f64() + 5.0);
    let a = enu_to_geodetic(
        [cfg.start_distance_m, 0.0, cfg.mobile_alt - cfg.base.alt],
        cfg.base,
    );
    let b = enu_to_geodetic(
        [
            cfg.start_distance_m + travel,
            0.0,
            cfg.mobile_alt - cfg.base.alt,
        ],
        cfg.base,
    );
    let route = json!([
        {"lat": a.lat, "lon": a.lon, "alt": a.alt, "speed": cfg.speed_mps},
        {"lat": b.lat, "lon": b.lon, "alt": b.alt, "speed": cfg.speed_mps},
    ]);

    let fs = cfg.sample_rate;
    let n = cfg.frame_samples as u32;
    let dl_tx = base.tx_stream(StreamConfig::new(Direction::Tx, cfg.downlink_hz, fs, n))?;
    let ul_rx = base.rx_stream(StreamConfig::new(Direction::Rx, cfg.uplink_hz, fs, n))?;
    let ul_tx = mobile.tx_stream(StreamConfig::new(Direction::Tx, cfg.uplink_hz, fs, n))?;
    let dl_rx = mobile.rx_stream(StreamConfig::new(Direction::Rx, cfg.downlink_hz, fs, n))?;

    let mut m = Map::new();
    m.insert("trajectory".into(), route);
    mobile.update(m)?;

    // one leading interval lets both links fill before measuring
    let bins = (cfg.duration.as_secs_f64() / cfg.report_every.as_secs_f64()).round() as usize + 1;
    let lead = 50_000_000;
    let grid = |t: i64| (t / 1_000_000 + 1) * 1_000_000;
    let start = grid(clock.now() + lead);

    let stop = Arc::new(AtomicBool::new(false));
    let senders = [dl_tx, ul_tx].map(|tx| {
        let (c, s) = (cfg.clone(), stop.clone());
        std::thread::spawn(move || transmit(tx, c, start, s))
    });
    let (c1, c2) = (cfg.clone(), cfg.clone());
    let dl = std::thread::spawn(move || receive(dl_rx, c1, start, bins));
    let ul = std::thread::spawn(move || receive(ul_rx, c2, start, bins));

    // sample the engine's link state once per interval while receiving
    let mut links = Vec::with_capacity(bins);
    let t_start = std::time::Instant::now() + Duration::from_nanos(lead as u64);
    for k in 1..=bins {
        let at = t_start + cfg.report_every.mul_f64(k as f64);
        std::thread::sleep(at.saturating_duration_since(std::time::Instant::now()));
        let snap = engine.snapshot();
        let find = |fc: f64| {
            snap.channels
                .iter()
                .find(|c| (c.center_freq - fc).abs() < 1.0)
                .and_then(|c| c.links.first())
                .map(|l| (l.distance_m, l.path_loss_db))
                .unwrap_or((f64::NAN, f64::NAN))
        };
        links.push((find(cfg.downlink_hz), find(cfg.uplink_hz)));
    }

    let join = |e: Box<dyn std::any::Any + Send>| DemoError::Thread(format!("{e:?}"));
    let (dl_p, dl_rx) = dl.join().map_err(join)??;
    let (ul_p, ul_rx) = ul.join().map_err(join)??;
    stop.store(true, Ordering::Release);
    for s in senders {
        s.join().map_err(join)??;
    }

    let fs_dbm = base.config().full_scale_dbm;
    let mut samples = Vec::new();
    for k in 1..bins {
        let ((d, pl_dl), (_, pl_ul)) = links[k];
        let s = PowerSample {
            t_s: k as f64 * cfg.report_every.as_secs_f64(),
            distance_m: d,
            downlink_dbm: power_to_db(dl_p[k]) + fs_dbm,
            uplink_dbm: power_to_db(ul_p[k]) + fs_dbm,
            downlink_model_dbm: fs_dbm - pl_dl,
            uplink_model_dbm: fs_dbm - pl_ul,
        };
        on_sample(&s);
        samples.push(s);
    }
    let (a, b) = (dl_rx.stats(), ul_rx.stats());
    Ok(DemoResult {
        samples,
        counters: engine.counters(),
        rx_timeouts: a.timeouts + b.timeouts,
        rx_late_arrivals: a.buffer.late_arrivals + b.buffer.late_arrivals,
        rx_overflows: a.buffer.overflows + b.buffer.overflows,
    })
}

impl DemoConfig {
    pub fn settings(&self) -> Value {
        json!({
            "duration_s": self.duration.as_secs_f64(),
            "downlink_hz": self.downlink_hz,
            "uplink_hz": self.uplink_hz,
            "start_distance_m": self.start_distance_m,
            "speed_mps": self.speed_mps,
            "noise": self.noise,
        })
    }
}
