//! Per-frame channel processing: for each receiver tuned to the channel,
//! resample, apply the transmit antenna gain, CIR, path-loss attenuation,
//! frequency offset, delay, optional noise and the receive antenna gain.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crossbeam_channel::TrySendError;

use super::link::{compute_link, LinkParams};
use super::view::{ChannelView, CounterMap, LinkCounters, LinkKey, RxEntry, TxEntry};
use crate::propagation::{rotator::rotate, thermal_noise_power, Cir, NoiseSource, Resampler};
use crate::vradio::{host_now_ns, ns_to_samples, samples_to_ns, StreamConfig};
use crate::wire::SampleFormat;
use crate::Cf32;

/// A decoded frame waiting for its channel processor.
#[derive(Debug, Clone)]
pub struct IngestItem {
    pub stream_id: u32,
    pub emulated_tx_time: i64,
    pub wallclock_tx_time: i64,
    /// Host monotonic time the frame entered the engine.
    pub ingest_host_ns: i64,
    pub num_channels: u16,
    /// Channel-interleaved.
    pub samples: Vec<Cf32>,
}

/// A processed frame on its way to one receiver.
#[derive(Debug)]
pub struct OutFrame {
    pub rx_stream: u32,
    pub tx_stream: u32,
    /// On the receiver's timeline.
    pub emulated_time: i64,
    pub wallclock_tx_time: i64,
    pub ingest_host_ns: i64,
    pub processed_host_ns: i64,
    pub num_channels: u16,
    pub otw_format: SampleFormat,
    pub samples: Vec<Cf32>,
    pub counters: Arc<LinkCounters>,
}

/// Accumulated time per pipeline kernel.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KernelTimes {
    pub resample: Duration,
    pub antenna: Duration,
    pub cir: Duration,
    pub path_loss: Duration,
    pub freq_offset: Duration,
    pub noise: Duration,
    /// Handing frames to receiver egress queues.
    pub delivery: Duration,
    /// Links processed while these were accumulated.
    pub links: u64,
}

impl KernelTimes {
    pub fn add(&mut self, o: &KernelTimes) {
        self.resample += o.resample;
        self.antenna += o.antenna;
        self.cir += o.cir;
        self.path_loss += o.path_loss;
        self.freq_offset += o.freq_offset;
        self.noise += o.noise;
        self.delivery += o.delivery;
        self.links += o.links;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessOutcome {
    /// Unknown stream or no receiver on the channel.
    Ignored,
    Processed {
        links: usize,
        dropped: usize,
    },
}

struct LinkDsp {
    tx_cfg: StreamConfig,
    rx_cfg: StreamConfig,
    resamplers: Vec<Resampler>,
    cirs: Vec<Cir>,
    noise: Option<NoiseSource>,
    phase: f64,
    started: bool,
    expected_tx_next: i64,
    next_rx_pos: i64,
    group_delay_samples: i64,
    counters: Arc<LinkCounters>,
    failed: bool,
}

impl LinkDsp {
    fn new(tx: &TxEntry, rx: &RxEntry, view: &ChannelView, counters: Arc<LinkCounters>) -> Self {
        let c = rx.config.num_channels as usize;
        let (resamplers, failed) =
            match Resampler::new(tx.config.sample_rate, rx.config.sample_rate) {
                Ok(r) => (vec![r; c], false),
                Err(e) => {
                    log::error!("link {}->{}: {e}", tx.stream_id, rx.stream_id);
                    (Vec::new(), true)
                }
            };
        let group_delay_samples = resamplers.first().map_or(0, |r| {
            (r.group_delay_s() * rx.config.sample_rate).round() as i64
        });
        let noise = view.engine_noise.then(|| {
            let power = view.node(&rx.node).noise_power.unwrap_or_else(|| {
                thermal_noise_power(
                    rx.config.sample_rate,
                    view.noise_figure_db,
                    view.full_scale_dbm,
                )
            });
            NoiseSource::new(power, ((tx.stream_id as u64) << 32) | rx.stream_id as u64)
        });
        LinkDsp {
            tx_cfg: tx.config.clone(),
            rx_cfg: rx.config.clone(),
            resamplers,
            cirs: vec![Cir::identity(); c],
            noise,
            phase: 0.0,
            started: false,
            expected_tx_next: 0,
            next_rx_pos: 0,
            group_delay_samples,
            counters,
            failed,
        }
    }

    fn matches(&self, tx: &TxEntry, rx: &RxEntry) -> bool {
        self.tx_cfg == tx.config && self.rx_cfg == rx.config
    }
}

fn scale(x: &mut [Cf32], g: f64) {
    if g != 1.0 {
        let g = g as f32;
        x.iter_mut().for_each(|s| *s *= g);
    }
}

fn timed<R>(slot: &mut Duration, on: bool, f: impl FnOnce() -> R) -> R {
    if on {
        let t = Instant::now();
        let r = f();
        *slot += t.elapsed();
        r
    } else {
        f()
    }
}

/// Processing state for one channel. Link DSP state persists across frames.
pub struct ChannelPipeline {
    links: HashMap<LinkKey, LinkDsp>,
    counters: CounterMap,
    scratch_in: Vec<Cf32>,
}

impl ChannelPipeline {
    pub fn new(counters: CounterMap) -> Self {
        ChannelPipeline {
            links: HashMap::new(),
            counters,
            scratch_in: Vec::new(),
        }
    }

    /// Forgets DSP state of links no longer present in `view`.
    pub fn retain_links(&mut self, view: &ChannelView) {
        self.links.retain(|(t, r), _| {
            view.tx.contains_key(t) && view.rx.iter().any(|x| x.stream_id == *r)
        });
        self.counters.lock().unwrap().retain(|(t, r), _| {
            view.tx.contains_key(t) && view.rx.iter().any(|x| x.stream_id == *r)
        });
    }

    /// Counts a frame that went stale before processing as dropped on every
    /// link it would have fed.
    pub fn drop_frame(&mut self, view: &ChannelView, item: &IngestItem) -> usize {
        let Some(tx) = view.tx.get(&item.stream_id) else {
            return 0;
        };
        let mut map = self.counters.lock().unwrap();
        let mut n = 0;
        for rx in &view.rx {
            if !view.self_reception && rx.node == tx.node {
                continue;
            }
            let c = map.entry((tx.stream_id, rx.stream_id)).or_default();
            c.ingested
                .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            c.dropped.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            n += 1;
        }
        n
    }

    pub fn process(
        &mut self,
        view: &ChannelView,
        item: &IngestItem,
        mut times: Option<&mut KernelTimes>,
    ) -> ProcessOutcome {
        let Some(tx) = view.tx.get(&item.stream_id) else {
            return ProcessOutcome::Ignored;
        };
        let now = host_now_ns();
        let mut processed = 0;
        let mut dropped = 0;
        for rx in &view.rx {
            if !view.self_reception && rx.node == tx.node {
                continue;
            }
            let params = compute_link(view, tx, rx, now);
            let out = self.process_link(view, tx, rx, &params, item, times.as_deref_mut());
            processed += 1;
            let Some(out) = out else { continue };
            let counters = out.counters.clone();
            let t = times.is_some().then(Instant::now);
            let sent = rx.egress.try_send(out);
            if let (Some(t), Some(kt)) = (t, times.as_deref_mut()) {
                kt.delivery += t.elapsed();
            }
            match sent {
                Ok(()) => {}
                Err(TrySendError::Full(_)) | Err(TrySendError::Disconnected(_)) => {
                    counters
                        .dropped
                        .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    dropped += 1;
                }
            }
        }
        if processed == 0 {
            return ProcessOutcome::Ignored;
        }
        ProcessOutcome::Processed {
            links: processed,
            dropped,
        }
    }

    fn process_link(
        &mut self,
        view: &ChannelView,
        tx: &TxEntry,
        rx: &RxEntry,
        p: &LinkParams,
        item: &IngestItem,
        mut times: Option<&mut KernelTimes>,
    ) -> Option<OutFrame> {
        let key = (tx.stream_id, rx.stream_id);
        let counters = self
            .counters
            .lock()
            .unwrap()
            .entry(key)
            .or_default()
            .clone();
        let dsp = match self.links.get_mut(&key) {
            Some(d) if d.matches(tx, rx) => d,
            _ => {
                self.links
                    .insert(key, LinkDsp::new(tx, rx, view, counters.clone()));
                self.links.get_mut(&key).unwrap()
            }
        };
        dsp.counters = counters.clone();
        counters
            .ingested
            .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let c_tx = item.num_channels.max(1) as usize;
        if dsp.failed || item.samples.len() % c_tx != 0 || c_tx != tx.config.num_channels as usize {
            counters
                .dropped
                .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            return None;
        }
        let fs_tx = tx.config.sample_rate;
        let fs_rx = rx.config.sample_rate;
        let c_rx = rx.config.num_channels as usize;
        let n_in = item.samples.len() / c_tx;
        let s_tx = ns_to_samples(item.emulated_tx_time, fs_tx);

        if !dsp.started || s_tx != dsp.expected_tx_next {
            let rx_pos = ns_to_samples(samples_to_ns(s_tx, fs_tx), fs_rx);
            if dsp.started {
                dsp.phase =
                    (dsp.phase + p.omega * (rx_pos - dsp.next_rx_pos) as f64).rem_euclid(TAU);
            } else {
                // the rotation is indexed by output sample, which the delay shifts by d
                dsp.phase = (p.omega * p.delay_samples as f64).rem_euclid(TAU);
            }
            dsp.next_rx_pos = rx_pos;
            dsp.started = true;
        }
        let rx_pos = dsp.next_rx_pos;

        let on = times.is_some();
        let mut kt = KernelTimes::default();
        let mut chans: Vec<Vec<Cf32>> = Vec::with_capacity(c_rx);
        let mut end_phase = dsp.phase;
        for j in 0..c_rx {
            let src = j % c_tx;
            let x: &[Cf32] = if c_tx == 1 {
                &item.samples
            } else {
                self.scratch_in.clear();
                self.scratch_in
                    .extend(item.samples.iter().skip(src).step_by(c_tx));
                &self.scratch_in
            };
            let resampler = &mut dsp.resamplers[j];
            let mut y = timed(&mut kt.resample, on, || resampler.process(x));
            timed(&mut kt.antenna, on, || scale(&mut y, p.tx_gain));
            let cir = &mut dsp.cirs[j];
            timed(&mut kt.cir, on, || {
                if cir.taps() != p.taps.as_slice() {
                    cir.set_taps(p.taps.to_vec()).expect("taps are never empty");
                }
                cir.process(&mut y)
            });
            timed(&mut kt.path_loss, on, || scale(&mut y, p.attenuation));
            end_phase = timed(&mut kt.freq_offset, on, || {
                rotate(&mut y, dsp.phase, p.omega)
            });
            if let Some(noise) = dsp.noise.as_mut() {
                timed(&mut kt.noise, on, || noise.add_to(&mut y));
            }
            timed(&mut kt.antenna, on, || scale(&mut y, p.rx_gain));
            chans.push(y);
        }
        let n_out = chans.first().map_or(0, Vec::len);
        dsp.phase = end_phase;
        dsp.next_rx_pos = rx_pos + n_out as i64;
        dsp.expected_tx_next = s_tx + n_in as i64;
        if let Some(t) = times.as_deref_mut() {
            kt.links = 1;
            t.add(&kt);
        }
        if n_out == 0 {
            counters
                .delivered
                .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            return None;
        }

        let samples = if c_rx == 1 {
            chans.pop().unwrap()
        } else {
            let mut v = Vec::with_capacity(n_out * c_rx);
            for i in 0..n_out {
                for ch in &chans {
                    v.push(ch[i]);
                }
            }
            v
        };
        let offset = ns_to_samples(tx.clock_base_ns - rx.clock_base_ns, fs_rx);
        let start = rx_pos + offset + p.delay_samples as i64 - dsp.group_delay_samples;
        Some(OutFrame {
            rx_stream: rx.stream_id,
            tx_stream: tx.stream_id,
            emulated_time: samples_to_ns(start, fs_rx),
            wallclock_tx_time: item.wallclock_tx_time,
            ingest_host_ns: item.ingest_host_ns,
            processed_host_ns: host_now_ns(),
            num_channels: rx.config.num_channels,
            otw_format: rx.config.otw_format,
            samples,
            counters,
        })
    }
}
