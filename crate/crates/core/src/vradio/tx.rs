use std::sync::Arc;
use std::time::{Duration, Instant};

use super::clock::{host_now_ns, ns_to_samples, samples_to_ns, VirtualClock};
use super::format::CpuSample;
use super::sink::FrameSink;
use super::{StreamConfig, VradioError};
use crate::wire::SignalFrame;
use crate::Cf32;

/// A send error is reported to the caller on the first failure and then once
/// every this many failures.
const SEND_ERROR_EVERY: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// Next available instant (unscheduled).
    Now,
    /// Explicit hardware time in ns.
    At(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxOutcome {
    Sent {
        time_ns: i64,
    },
    /// The requested time had already passed; nothing was sent.
    Late,
    /// The call was held back by the buffer threshold before sending.
    BlockedThenSent {
        time_ns: i64,
        blocked: Duration,
    },
}

/// Running counters for a TX stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TxStats {
    pub frames_sent: u64,
    pub late: u64,
    pub underflows: u64,
    pub send_errors: u64,
}

/// Transmit side of a virtual radio.
///
/// Frames are placed on an on-the-air FIFO whose head is tracked on the
/// stream's sample grid, so unscheduled frames tile the timeline exactly.
pub struct TxStream {
    stream_id: u32,
    config: StreamConfig,
    clock: Arc<VirtualClock>,
    sink: Box<dyn FrameSink>,
    buffer_threshold_ns: i64,
    /// End of the last enqueued frame, as a sample index at `sample_rate`.
    head: Option<i64>,
    stats: TxStats,
    closed: bool,
    on_close: Option<Box<dyn FnOnce() + Send>>,
    scratch: Vec<Cf32>,
}

impl TxStream {
    pub fn new(
        stream_id: u32,
        config: StreamConfig,
        clock: Arc<VirtualClock>,
        sink: Box<dyn FrameSink>,
        buffer_threshold: Duration,
    ) -> Result<Self, VradioError> {
        config.validate()?;
        Ok(TxStream {
            stream_id,
            config,
            clock,
            sink,
            buffer_threshold_ns: buffer_threshold.as_nanos() as i64,
            head: None,
            stats: TxStats::default(),
            closed: false,
            on_close: None,
            scratch: Vec::new(),
        })
    }

    /// Registers a hook run once when the stream closes (used to detach from
    /// the engine).
    pub fn set_on_close(&mut self, f: impl FnOnce() + Send + 'static) {
        self.on_close = Some(Box::new(f));
    }

    pub fn stream_id(&self) -> u32 {
        self.stream_id
    }

    pub fn config(&self) -> &StreamConfig {
        &self.config
    }

    pub fn stats(&self) -> TxStats {
        self.stats
    }

    pub fn underflows(&self) -> u64 {
        self.stats.underflows
    }

    /// End of the last enqueued frame on the radio timeline, in ns.
    pub fn fifo_head_time(&self) -> Option<i64> {
        self.head.map(|h| samples_to_ns(h, self.config.sample_rate))
    }

    pub fn close(&mut self) {
        if !self.closed {
            self.closed = true;
            if let Some(f) = self.on_close.take() {
                f();
            }
        }
    }

    pub fn send<S: CpuSample>(
        &mut self,
        samples: &[S],
        schedule: Schedule,
    ) -> Result<TxOutcome, VradioError> {
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
        if samples.is_empty() || samples.len() % channels != 0 {
            return Err(VradioError::BadLength {
                len: samples.len(),
                channels,
            });
        }
        let n = (samples.len() / channels) as i64;
        let rate = self.config.sample_rate;
        let now = self.clock.now();

        let (start, stamp) = match schedule {
            Schedule::At(t) if t < now => {
                self.stats.late += 1;
                return Ok(TxOutcome::Late);
            }
            Schedule::At(t) => {
                let start = ns_to_samples(t, rate);
                if self.config.continuous && self.head.is_some_and(|h| start > h) {
                    self.stats.underflows += 1;
                }
                (start, t)
            }
            Schedule::Now => {
                let now_s = ns_to_samples(now, rate);
                let start = self.head.map_or(now_s, |h| h.max(now_s));
                (start, samples_to_ns(start, rate))
            }
        };
        self.head = Some(start + n);

        let head_ns = samples_to_ns(start + n, rate);
        let mut blocked = None;
        if head_ns - now > self.buffer_threshold_ns {
            let t0 = Instant::now();
            self.clock.sleep_until(head_ns - self.buffer_threshold_ns);
            blocked = Some(t0.elapsed());
        }

        self.scratch.clear();
        self.scratch.extend(samples.iter().map(|s| s.to_cf32()));
        let mut frame = SignalFrame::from_samples(
            self.config.otw_format,
            self.config.num_channels,
            &self.scratch,
        )?;
        frame.stream_id = self.stream_id;
        frame.source_id = self.stream_id;
        frame.emulated_tx_time = stamp;
        frame.wallclock_tx_time = host_now_ns();

        if let Err(e) = self.sink.send_frame(&frame) {
            self.stats.send_errors += 1;
            if self.stats.send_errors % SEND_ERROR_EVERY == 1 {
                return Err(VradioError::Send(e));
            }
            log::debug!("stream {}: send failed ({e})", self.stream_id);
        } else {
            self.stats.frames_sent += 1;
        }
        Ok(match blocked {
            Some(blocked) => TxOutcome::BlockedThenSent {
                time_ns: stamp,
                blocked,
            },
            None => TxOutcome::Sent { time_ns: stamp },
        })
    }
}

impl Drop for TxStream {
    fn drop(&mut self) {
        self.close();
    }
}
