//! Random small scenes run through the engine pipeline, the wire codec and a
//! receive stream, compared with a direct double-precision evaluation of the
//! per-receiver baseband model.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use iqtwin::engine::{
    ChannelPipeline, ChannelView, CounterMap, IngestItem, LinkOverride, RxEntry, TxEntry,
};
use iqtwin::propagation::NoiseSource;
use iqtwin::vradio::{samples_to_ns, Direction, RxStream, Schedule, StreamConfig, VirtualClock};
use iqtwin::wire::{SampleFormat, SignalFrame};
use iqtwin::Cf32;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uuid::Uuid;

use super::Check;

const FC: f64 = 915e6;
const FS: f64 = 1e6;

pub struct Link {
    pub taps: Vec<Complex64>,
    pub delay: usize,
    pub omega: f64,
    pub attenuation: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
}

pub struct Transmitter {
    pub id: u32,
    /// First sample index on the shared timeline.
    pub start: usize,
    pub frames: Vec<Vec<Cf32>>,
}

pub struct Scene {
    pub txs: Vec<Transmitter>,
    pub rxs: Vec<u32>,
    pub links: HashMap<(u32, u32), Link>,
}

fn c64(x: Cf32) -> Complex64 {
    Complex64::new(x.re as f64, x.im as f64)
}

impl Scene {
    pub fn random(seed: u64) -> Scene {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_tx = rng.random_range(1..=3);
        let n_rx = rng.random_range(1..=3);
        let uni = |rng: &mut ChaCha8Rng| {
            Cf32::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        };
        let txs = (0..n_tx)
            .map(|t| Transmitter {
                id: 1 + t as u32,
                start: rng.random_range(0..300),
                frames: (0..rng.random_range(1..=3))
                    .map(|_| {
                        let n = rng.random_range(1..=2048);
                        (0..n).map(|_| uni(&mut rng)).collect()
                    })
                    .collect(),
            })
            .collect::<Vec<_>>();
        let rxs: Vec<u32> = (0..n_rx).map(|r| 101 + r as u32).collect();
        let mut links = HashMap::new();
        for t in &txs {
            for &r in &rxs {
                let taps = (0..rng.random_range(1..=4))
                    .map(|_| {
                        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    })
                    .collect();
                links.insert(
                    (t.id, r),
                    Link {
                        taps,
                        delay: rng.random_range(0..=64),
                        omega: rng.random_range(-0.1..=0.1),
                        attenuation: rng.random_range(0.01..1.0),
                        tx_gain: rng.random_range(0.1..2.0),
                        rx_gain: rng.random_range(0.1..2.0),
                    },
                );
            }
        }
        Scene { txs, rxs, links }
    }

    /// Samples needed to hold everything any receiver can see.
    pub fn span(&self) -> usize {
        let longest = self
            .txs
            .iter()
            .map(|t| t.start + t.frames.iter().map(Vec::len).sum::<usize>())
            .max();
        longest.unwrap_or(0) + 64 + 4
    }

    /// Direct evaluation for receiver `r` over `[0, span)`.
    pub fn oracle(&self, r: u32) -> Vec<Complex64> {
        let span = self.span();
        let mut y = vec![Complex64::new(0.0, 0.0); span];
        for t in &self.txs {
            let x: Vec<Complex64> = t.frames.iter().flatten().map(|s| c64(*s)).collect();
            let l = &self.links[&(t.id, r)];
            for (m, out) in y.iter_mut().enumerate().skip(t.start) {
                // n counts samples from this transmitter's first sample
                let n = m - t.start;
                // a link emits as many samples as it was given; the tail of
                // the last frame stays in the delay line
                if n >= l.delay + x.len() {
                    break;
                }
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, h) in l.taps.iter().enumerate() {
                    if n >= l.delay + k && n - l.delay - k < x.len() {
                        acc += h * l.tx_gain * x[n - l.delay - k];
                    }
                }
                *out += l.rx_gain
                    * l.attenuation
                    * acc
                    * Complex64::from_polar(1.0, l.omega * n as f64);
            }
        }
        y
    }

    /// Pipeline plus codec plus receive buffer, one drained window per
    /// receiver.
    pub fn emulate(&self) -> HashMap<u32, Vec<Cf32>> {
        let mut view = ChannelView::new(FC);
        let mut queues = HashMap::new();
        for t in &self.txs {
            view.tx.insert(
                t.id,
                TxEntry {
                    stream_id: t.id,
                    node: Uuid::new_v4(),
                    config: StreamConfig::new(Direction::Tx, FC, FS, 2048),
                    clock_base_ns: 0,
                },
            );
        }
        for &r in &self.rxs {
            let (s, q) = crossbeam_channel::unbounded();
            view.rx.push(RxEntry {
                stream_id: r,
                node: Uuid::new_v4(),
                config: StreamConfig::new(Direction::Rx, FC, FS, 2048),
                clock_base_ns: 0,
                egress: s,
            });
            queues.insert(r, q);
        }
        for ((t, r), l) in &self.links {
            view.params.overrides.insert(
                (*t, *r),
                LinkOverride {
                    attenuation: Some(l.attenuation),
                    delay_samples: Some(l.delay as u64),
                    omega: Some(l.omega),
                    taps: Some(l.taps.iter().map(|h| [h.re as f32, h.im as f32]).collect()),
                    tx_gain: Some(l.tx_gain),
                    rx_gain: Some(l.rx_gain),
                },
            );
        }

        let mut pipeline = ChannelPipeline::new(CounterMap::default());
        for t in &self.txs {
            let mut pos = t.start;
            for f in &t.frames {
                let item = IngestItem {
                    stream_id: t.id,
                    emulated_tx_time: samples_to_ns(pos as i64, FS),
                    wallclock_tx_time: 0,
                    ingest_host_ns: 0,
                    num_channels: 1,
                    samples: f.clone(),
                };
                pipeline.process(&view, &item, None);
                pos += f.len();
            }
        }

        let clock = Arc::new(VirtualClock::new());
        // every window is already complete
        clock.set_time(1_000_000_000_000);
        let mut out = HashMap::new();
        for &r in &self.rxs {
            let mut rx = RxStream::new(
                r,
                StreamConfig::new(Direction::Rx, FC, FS, 2048),
                clock.clone(),
                Duration::from_secs(1),
                Duration::ZERO,
                NoiseSource::new(0.0, 0),
            )
            .unwrap();
            let ingest = rx.ingest();
            for f in queues[&r].try_iter() {
                let mut frame =
                    SignalFrame::from_samples(SampleFormat::Cf32, f.num_channels, &f.samples)
                        .unwrap();
                frame.stream_id = f.rx_stream;
                frame.source_id = f.tx_stream;
                frame.emulated_tx_time = f.emulated_time;
                let wire = SignalFrame::decode(&frame.encode().unwrap()).unwrap();
                ingest.push(&wire);
            }
            let mut y = vec![Cf32::default(); self.span()];
            let s = rx
                .recv(&mut y, Schedule::At(0), Duration::from_secs(1))
                .unwrap();
            assert!(s.ok(), "{s:?}");
            out.insert(r, y);
        }
        out
    }

    pub fn max_error(&self) -> f64 {
        let got = self.emulate();
        let mut worst = 0f64;
        for &r in &self.rxs {
            for (a, b) in self.oracle(r).iter().zip(&got[&r]) {
                worst = worst.max((a - c64(*b)).norm());
            }
        }
        worst
    }
}

pub fn check_scenes(count: u64) -> Check {
    let t0 = std::time::Instant::now();
    let mut worst = 0f64;
    for seed in 0..count {
        let s = Scene::random(seed);
        let e = s.max_error();
        if e >= 1e-4 {
            return Err(format!("scene {seed}: max error {e:.3e}"));
        }
        worst = worst.max(e);
    }
    let secs = t0.elapsed().as_secs_f64();
    if secs >= 60.0 {
        return Err(format!("took {secs:.1} s"));
    }
    Ok(format!(
        "{count} scenes, max error {worst:.2e} (< 1e-4), {secs:.2} s"
    ))
}
