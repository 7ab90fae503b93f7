use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::clock::{host_now_ns, ns_to_samples, samples_to_ns, VirtualClock};
use super::format::CpuSample;
use super::timed_buffer::{BufferStats, InsertOutcome, TimedBuffer};
use super::tx::Schedule;
use super::{StreamConfig, VradioError};
use crate::propagation::NoiseSource;
use crate::wire::SignalFrame;
use crate::Cf32;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RxStatus {
    /// Samples were evicted since the previous call.
    pub overflow: bool,
    /// The window was not complete before the timeout; output is noise only
    /// and the read position did not move.
    pub timeout: bool,
    /// Emulated time of the first returned sample, ns.
    pub rx_timestamp: i64,
}

impl RxStatus {
    pub fn ok(&self) -> bool {
        !self.overflow && !self.timeout
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RxStats {
    pub frames_received: u64,
    pub frames_rejected: u64,
    pub timeouts: u64,
    pub buffer: BufferStats,
}

struct Shared {
    buffer: TimedBuffer,
    frames_received: u64,
    frames_rejected: u64,
}

/// Producer handle: pushes frames from the network into an [`RxStream`].
#[derive(Clone)]
pub struct RxIngest {
    shared: Arc<Mutex<Shared>>,
    rate: f64,
    channels: u16,
}

impl RxIngest {
    pub fn push(&self, frame: &SignalFrame) -> Option<InsertOutcome> {
        if frame.num_channels != self.channels {
            self.shared.lock().unwrap().frames_rejected += 1;
            return None;
        }
        let samples = frame.samples();
        self.push_samples(frame.emulated_tx_time, frame.source_id, samples)
    }

    pub fn push_samples(
        &self,
        time_ns: i64,
        source: u32,
        samples: Vec<Cf32>,
    ) -> Option<InsertOutcome> {
        let start = ns_to_samples(time_ns, self.rate);
        let mut s = self.shared.lock().unwrap();
        s.frames_received += 1;
        Some(s.buffer.insert(start, source, samples))
    }
}

/// Receive side of a virtual radio.
///
/// A window of samples is ready once the virtual clock has passed its end
/// plus a settle margin; everything that arrived for the window by then is
/// superposed, and receiver noise is added on top.
pub struct RxStream {
    stream_id: u32,
    config: StreamConfig,
    clock: Arc<VirtualClock>,
    shared: Arc<Mutex<Shared>>,
    noise: NoiseSource,
    settle_ns: i64,
    timeouts: u64,
    scratch: Vec<Cf32>,
    closed: bool,
    on_close: Option<Box<dyn FnOnce() + Send>>,
}

impl RxStream {
    pub fn new(
        stream_id: u32,
        config: StreamConfig,
        clock: Arc<VirtualClock>,
        capacity: Duration,
        settle: Duration,
        noise: NoiseSource,
    ) -> Result<Self, VradioError> {
        config.validate()?;
        let cap = ns_to_samples(capacity.as_nanos() as i64, config.sample_rate).max(1);
        let shared = Shared {
            buffer: TimedBuffer::new(config.num_channels as usize, cap),
            frames_received: 0,
            frames_rejected: 0,
        };
        Ok(RxStream {
            stream_id,
            config,
            clock,
            shared: Arc::new(Mutex::new(shared)),
            noise,
            settle_ns: settle.as_nanos() as i64,
            timeouts: 0,
            scratch: Vec::new(),
            closed: false,
            on_close: None,
        })
    }

    pub fn ingest(&self) -> RxIngest {
        RxIngest {
            shared: self.shared.clone(),
            rate: self.config.sample_rate,
            channels: self.config.num_channels,
        }
    }

    pub fn set_on_close(&mut self, f: impl FnOnce() + Send + 'static) {
        self.on_close = Some(Box::new(f));
    }

    pub fn stream_id(&self) -> u32 {
        self.stream_id
    }

    pub fn config(&self) -> &StreamConfig {
        &self.config
    }

    pub fn noise_mut(&mut self) -> &mut NoiseSource {
        &mut self.noise
    }

    pub fn stats(&self) -> RxStats {
        let s = self.shared.lock().unwrap();
        RxStats {
            frames_received: s.frames_received,
            frames_rejected: s.frames_rejected,
            timeouts: self.timeouts,
            buffer: s.buffer.stats(),
        }
    }

    /// Emulated time of the next unscheduled sample, once streaming started.
    pub fn next_time(&self) -> Option<i64> {
        let s = self.shared.lock().unwrap();
        s.buffer
            .cursor()
            .map(|c| samples_to_ns(c, self.config.sample_rate))
    }

    pub fn close(&mut self) {
        if !self.closed {
            self.closed = true;
            if let Some(f) = self.on_close.take() {
                f();
            }
        }
    }

    /// Fills `out` with the next window (`out.len() / num_channels` samples
    /// per channel, interleaved).
    pub fn recv<S: CpuSample>(
        &mut self,
        out: &mut [S],
        schedule: Schedule,
        timeout: Duration,
    ) -> Result<RxStatus, VradioError> {
        if self.closed {
            return Err(VradioError::Closed);
        }
        if S::FORMAT != self.config.cpu_format {
            return Err(VradioError::FormatMismatch {
                expected: self.config.cpu_format,
                got: S::FORMAT,
            });
        }
        let channels = self.config.num_channels as usize;
        if out.is_empty() || out.len() % channels != 0 {
            return Err(VradioError::BadLength {
                len: out.len(),
                channels,
            });
        }
        let n = (out.len() / channels) as i64;
        let rate = self.config.sample_rate;
        let call_host = host_now_ns();

        let start = {
            let mut s = self.shared.lock().unwrap();
            let cursor = s.buffer.cursor();
            match (schedule, cursor) {
                (Schedule::At(t), Some(cur)) => {
                    let pos = ns_to_samples(t, rate);
                    if pos < cur {
                        return Err(VradioError::Rewind {
                            requested: t,
                            cursor: samples_to_ns(cur, rate),
                        });
                    }
                    pos
                }
                (Schedule::At(t), None) => {
                    let pos = ns_to_samples(t, rate);
                    s.buffer.start_at(pos);
                    pos
                }
                (Schedule::Now, Some(cur)) => cur,
                (Schedule::Now, None) => {
                    let pos = ns_to_samples(self.clock.now(), rate);
                    s.buffer.start_at(pos);
                    pos
                }
            }
        };
        let rx_timestamp = samples_to_ns(start, rate);
        let ready_at = samples_to_ns(start + n, rate) + self.settle_ns;
        let give_up_host =
            call_host.saturating_add(timeout.as_nanos().min(i64::MAX as u128) as i64);

        if self.clock.to_host(ready_at) > give_up_host {
            let until = self.clock.from_host(give_up_host);
            self.clock.sleep_until(until);
            self.timeouts += 1;
            self.scratch.resize(out.len(), Cf32::new(0.0, 0.0));
            self.noise.fill(&mut self.scratch);
            let overflow = self.shared.lock().unwrap().buffer.take_overflow();
            for (o, s) in out.iter_mut().zip(&self.scratch) {
                *o = S::from_cf32(*s);
            }
            return Ok(RxStatus {
                overflow,
                timeout: true,
                rx_timestamp,
            });
        }
        self.clock.sleep_until(ready_at);

        self.scratch.resize(out.len(), Cf32::new(0.0, 0.0));
        let overflow = {
            let mut s = self.shared.lock().unwrap();
            s.buffer
                .drain(start, &mut self.scratch)
                .map_err(|e| VradioError::Rewind {
                    requested: rx_timestamp,
                    cursor: samples_to_ns(e.cursor, rate),
                })?;
            s.buffer.take_overflow()
        };
        self.noise.add_to(&mut self.scratch);
        for (o, s) in out.iter_mut().zip(&self.scratch) {
            *o = S::from_cf32(*s);
        }
        Ok(RxStatus {
            overflow,
            timeout: false,
            rx_timestamp,
        })
    }
}

impl Drop for RxStream {
    fn drop(&mut self) {
        self.close();
    }
}
