use std::sync::atomic::{AtomicI64, Ordering};
use std::time::Duration;

/// Nanoseconds on the host's monotonic clock (`CLOCK_MONOTONIC`), shared by
/// every process on the emulation host.
pub fn host_now_ns() -> i64 {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid out-pointer and CLOCK_MONOTONIC always exists.
    unsafe { libc::clock_gettime(libc::CLOCK_MONOTONIC, &mut ts) };
    ts.tv_sec as i64 * 1_000_000_000 + ts.tv_nsec as i64
}

/// Virtual radio hardware clock with 1 ns resolution.
///
/// It is an affine map of the host clock: `now = host - epoch + offset`. The
/// epoch is captured at construction, so a fresh clock reads close to zero.
#[derive(Debug)]
pub struct VirtualClock {
    epoch: i64,
    offset: AtomicI64,
}

impl Default for VirtualClock {
    fn default() -> Self {
        Self::new()
    }
}

impl VirtualClock {
    pub fn new() -> Self {
        VirtualClock {
            epoch: host_now_ns(),
            offset: AtomicI64::new(0),
        }
    }

    pub fn now(&self) -> i64 {
        self.from_host(host_now_ns())
    }

    /// Sets the current virtual time.
    pub fn set_time(&self, t_ns: i64) {
        let elapsed = host_now_ns() - self.epoch;
        self.offset.store(t_ns - elapsed, Ordering::Release);
    }

    pub fn offset(&self) -> i64 {
        self.offset.load(Ordering::Acquire)
    }

    /// Host time at which this clock reads zero.
    pub fn clock_base_ns(&self) -> i64 {
        self.epoch - self.offset()
    }

    pub fn from_host(&self, host_ns: i64) -> i64 {
        host_ns - self.clock_base_ns()
    }

    pub fn to_host(&self, virtual_ns: i64) -> i64 {
        virtual_ns + self.clock_base_ns()
    }

    /// Sleeps until the clock reads at least `t_ns`.
    pub fn sleep_until(&self, t_ns: i64) {
        loop {
            let now = self.now();
            if now >= t_ns {
                return;
            }
            std::thread::sleep(Duration::from_nanos((t_ns - now) as u64));
        }
    }
}

fn integral_rate(rate: f64) -> Option<i128> {
    (rate.fract() == 0.0 && rate > 0.0 && rate < 1e15).then_some(rate as i128)
}

/// Sample index nearest to time `t_ns` on a timeline sampled at `rate` Hz.
pub fn ns_to_samples(t_ns: i64, rate: f64) -> i64 {
    match integral_rate(rate) {
        Some(r) => (t_ns as i128 * r + 500_000_000).div_euclid(1_000_000_000) as i64,
        None => {
            let whole = t_ns.div_euclid(1_000_000_000);
            let rem = t_ns.rem_euclid(1_000_000_000);
            (whole as f64 * rate + rem as f64 * rate / 1e9).round() as i64
        }
    }
}

/// Time in ns (rounded) of sample index `s` on a timeline sampled at `rate` Hz.
pub fn samples_to_ns(s: i64, rate: f64) -> i64 {
    match integral_rate(rate) {
        Some(r) => (s as i128 * 1_000_000_000 + r / 2).div_euclid(r) as i64,
        None => {
            let whole = (s as f64 / rate).floor();
            let rem = s as f64 - whole * rate;
            (whole * 1e9 + rem * 1e9 / rate).round() as i64
        }
    }
}
