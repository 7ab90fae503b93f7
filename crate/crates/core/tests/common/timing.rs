//! Radio timing properties of the transmit and receive streams.

use std::sync::Arc;
use std::time::Duration;

use iqtwin::propagation::NoiseSource;
use iqtwin::vradio::{
    ns_to_samples, samples_to_ns, CaptureSink, Direction, RxStream, Schedule, StreamConfig,
    TxOutcome, TxStream, VirtualClock,
};
use iqtwin::Cf32;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use super::{all, prop, Check};

const RATES: [f64; 4] = [1.92e6, 7.68e6, 11.52e6, 30.72e6];

fn tx(rate: f64, clock: Arc<VirtualClock>, threshold: Duration) -> (TxStream, CaptureSink) {
    let sink = CaptureSink::new();
    let cfg = StreamConfig::new(Direction::Tx, 3.41e9, rate, 1024);
    let s = TxStream::new(1, cfg, clock, Box::new(sink.clone()), threshold).unwrap();
    (s, sink)
}

fn frame(n: usize, k: usize) -> Vec<Cf32> {
    (0..n).map(|i| Cf32::new(k as f32, i as f32)).collect()
}

/// A frame scheduled before the current time is never put on the air, and
/// does not disturb the frames around it.
pub fn late_frames_are_discarded(
    (now_ms, late_ns, rate_i, n): (i64, i64, usize, usize),
) -> Result<(), TestCaseError> {
    let clock = Arc::new(VirtualClock::new());
    clock.set_time(now_ms * 1_000_000);
    let (mut s, sink) = tx(RATES[rate_i], clock.clone(), Duration::from_secs(3600));
    let ok_at = clock.now() + 50_000_000;
    s.send(&frame(n, 0), Schedule::At(ok_at)).unwrap();
    let head = s.fifo_head_time();
    let r = s
        .send(&frame(n, 1), Schedule::At(clock.now() - late_ns))
        .unwrap();
    prop_assert_eq!(r, TxOutcome::Late);
    prop_assert_eq!(s.fifo_head_time(), head);
    s.send(&frame(n, 2), Schedule::Now).unwrap();
    let frames = sink.frames();
    prop_assert_eq!(frames.len(), 2);
    prop_assert!(frames.iter().all(|f| f.samples()[0].re != 1.0));
    prop_assert_eq!(s.stats().late, 1);
    Ok(())
}

/// Back-to-back unscheduled frames tile the sample grid with no gap and no
/// overlap.
pub fn unscheduled_frames_tile((rate_i, lens): (usize, Vec<usize>)) -> Result<(), TestCaseError> {
    let rate = RATES[rate_i];
    let clock = Arc::new(VirtualClock::new());
    let (mut s, sink) = tx(rate, clock.clone(), Duration::from_secs(3600));
    // keep the FIFO ahead of the running clock so no send falls back to now
    let t0 = clock.now() + 1_000_000_000;
    for (k, n) in lens.iter().enumerate() {
        let when = if k == 0 {
            Schedule::At(t0)
        } else {
            Schedule::Now
        };
        s.send(&frame(*n, k), when).unwrap();
    }
    let frames = sink.frames();
    for w in frames.windows(2) {
        let a = ns_to_samples(w[0].emulated_tx_time, rate);
        let b = ns_to_samples(w[1].emulated_tx_time, rate);
        prop_assert_eq!(b - a, w[0].num_samples as i64);
        prop_assert_eq!(samples_to_ns(b, rate), w[1].emulated_tx_time);
    }
    let total: usize = frames.iter().map(|f| f.num_samples as usize).sum();
    prop_assert_eq!(total, lens.iter().sum::<usize>());
    let first = ns_to_samples(frames[0].emulated_tx_time, rate);
    prop_assert_eq!(
        s.fifo_head_time(),
        Some(samples_to_ns(first + total as i64, rate))
    );
    Ok(())
}

/// A send that would put the FIFO head more than the threshold ahead of now
/// blocks for about the excess.
pub fn backpressure_blocks_for_the_excess(
    (threshold_ms, frame_ms): (u64, u64),
) -> Result<(), TestCaseError> {
    let rate = 1e6;
    let clock = Arc::new(VirtualClock::new());
    let (mut s, _sink) = tx(rate, clock.clone(), Duration::from_millis(threshold_ms));
    let n = (frame_ms * 1000) as usize;
    let x = frame(n, 0);
    let threshold = threshold_ms as i64 * 1_000_000;
    let (mut expected, mut blocked) = (0i64, 0i64);
    let mut unexpected_blocks = 0;
    for _ in 0..(120 / frame_ms) {
        let now = clock.now();
        let head = s.fifo_head_time().map_or(now, |h| h.max(now));
        let excess = head + frame_ms as i64 * 1_000_000 - now - threshold;
        match s.send(&x, Schedule::Now).unwrap() {
            TxOutcome::BlockedThenSent { blocked: b, .. } => {
                blocked += b.as_nanos() as i64;
                expected += excess.max(0);
                // the stream rounds its start onto the sample grid
                if excess < -1_000 {
                    unexpected_blocks += 1;
                }
            }
            TxOutcome::Sent { .. } => {
                // a host stall can let time catch up between the two reads
                prop_assert!(excess <= 200_000, "excess {excess} ns but no block");
            }
            TxOutcome::Late => prop_assert!(false, "unscheduled send reported late"),
        }
    }
    prop_assert_eq!(unexpected_blocks, 0);
    prop_assert!(expected > 0);
    let ratio = blocked as f64 / expected as f64;
    prop_assert!(
        (0.8..=1.2).contains(&ratio),
        "blocked {blocked} ns for {expected} ns excess ({ratio:.3})"
    );
    Ok(())
}

fn rx(noise: NoiseSource, capacity: Duration, clock: Arc<VirtualClock>) -> RxStream {
    let cfg = StreamConfig::new(Direction::Rx, 3.41e9, 1e6, 1000);
    RxStream::new(2, cfg, clock, capacity, Duration::ZERO, noise).unwrap()
}

/// Writing past the buffer capacity latches the overflow flag, which the
/// next read reports exactly once.
pub fn overflow_latches((cap_ms, beyond): (u64, i64)) -> Result<(), TestCaseError> {
    let clock = Arc::new(VirtualClock::new());
    clock.set_time(1_000_000_000_000);
    let mut r = rx(
        NoiseSource::new(0.0, 0),
        Duration::from_millis(cap_ms),
        clock,
    );
    let cap = cap_ms as i64 * 1000;
    let ingest = r.ingest();
    let mut out = vec![Cf32::default(); 100];
    let s = r
        .recv(&mut out, Schedule::At(0), Duration::from_secs(1))
        .unwrap();
    prop_assert!(!s.overflow);

    // fits: ends exactly at cursor + capacity
    ingest.push_samples(
        samples_to_ns(100, 1e6),
        1,
        vec![Cf32::new(1.0, 0.0); cap as usize],
    );
    let s = r
        .recv(&mut out, Schedule::Now, Duration::from_secs(1))
        .unwrap();
    prop_assert!(!s.overflow);

    let cursor = 200;
    let start = cursor + cap + beyond - 10;
    ingest.push_samples(samples_to_ns(start, 1e6), 1, vec![Cf32::new(1.0, 0.0); 10]);
    prop_assert_eq!(r.stats().buffer.overflows, 1);
    let s = r
        .recv(&mut out, Schedule::Now, Duration::from_secs(1))
        .unwrap();
    prop_assert!(s.overflow);
    let s = r
        .recv(&mut out, Schedule::Now, Duration::from_secs(1))
        .unwrap();
    prop_assert!(!s.overflow, "latch must clear after it is reported");
    Ok(())
}

/// With nothing attached a receiver still returns samples: seeded noise at
/// the configured power, identical for identical seeds.
pub fn noise_only_fill((seed, power_db): (u64, f64)) -> Result<(), TestCaseError> {
    let power = 10f64.powf(power_db / 10.0);
    let clock = Arc::new(VirtualClock::new());
    clock.set_time(1_000_000_000_000);
    let mut a = rx(
        NoiseSource::new(power, seed),
        Duration::from_millis(50),
        clock.clone(),
    );
    let mut b = rx(
        NoiseSource::new(power, seed),
        Duration::from_millis(50),
        clock,
    );
    let mut ya = vec![Cf32::default(); 100_000];
    let mut yb = ya.clone();
    let s = a
        .recv(&mut ya, Schedule::At(0), Duration::from_secs(1))
        .unwrap();
    b.recv(&mut yb, Schedule::At(0), Duration::from_secs(1))
        .unwrap();
    prop_assert!(s.ok());
    prop_assert_eq!(&ya, &yb);
    let p = ya.iter().map(|s| s.norm_sqr() as f64).sum::<f64>() / ya.len() as f64;
    prop_assert!((p / power - 1.0).abs() < 0.02, "power {p} vs {power}");
    Ok(())
}

pub fn late_strategy() -> impl Strategy<Value = (i64, i64, usize, usize)> {
    (
        100i64..10_000,
        1i64..50_000_000,
        0..RATES.len(),
        1usize..4096,
    )
}

pub fn tiling_strategy() -> impl Strategy<Value = (usize, Vec<usize>)> {
    (
        0..RATES.len(),
        proptest::collection::vec(1usize..5000, 2..40),
    )
}

pub fn backpressure_strategy() -> impl Strategy<Value = (u64, u64)> {
    (5u64..=20, 2u64..=6)
}

pub fn overflow_strategy() -> impl Strategy<Value = (u64, i64)> {
    (1u64..=20, 1i64..5000)
}

pub fn noise_strategy() -> impl Strategy<Value = (u64, f64)> {
    (any::<u64>(), -120.0f64..0.0)
}

pub fn check_timing() -> Check {
    all(vec![
        (
            "late discard",
            Box::new(|| {
                prop(64, late_strategy(), late_frames_are_discarded).map(|_| String::new())
            }),
        ),
        (
            "contiguity",
            Box::new(|| {
                prop(64, tiling_strategy(), unscheduled_frames_tile).map(|_| String::new())
            }),
        ),
        (
            "backpressure",
            Box::new(|| {
                prop(
                    6,
                    backpressure_strategy(),
                    backpressure_blocks_for_the_excess,
                )
                .map(|_| String::new())
            }),
        ),
        (
            "overflow latch",
            Box::new(|| prop(64, overflow_strategy(), overflow_latches).map(|_| String::new())),
        ),
        (
            "noise-only fill",
            Box::new(|| prop(16, noise_strategy(), noise_only_fill).map(|_| String::new())),
        ),
    ])
}
