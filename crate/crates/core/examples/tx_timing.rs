//! Transmit timing: unscheduled frames tile the timeline, scheduled frames
//! keep their stamp, late requests are discarded, and a full FIFO holds the
//! caller back.

use std::sync::Arc;
use std::time::{Duration, Instant};

use iqtwin::vradio::{CaptureSink, Direction, Schedule, StreamConfig, TxStream, VirtualClock};
use iqtwin::Cf32;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fs = 1.92e6;
    let n = 1920;
    let sink = CaptureSink::new();
    let clock = Arc::new(VirtualClock::new());
    let cfg = StreamConfig::new(Direction::Tx, 3.41e9, fs, n as u32);
    let mut tx = TxStream::new(
        1,
        cfg,
        clock.clone(),
        Box::new(sink.clone()),
        Duration::from_millis(10),
    )?;
    let frame = vec![Cf32::new(0.25, 0.0); n];

    // on the sample grid of the stream (whole ms here)
    let t0 = (clock.now() / 1_000_000 + 2) * 1_000_000;
    println!("scheduled:   {:?}", tx.send(&frame, Schedule::At(t0))?);
    for _ in 0..3 {
        println!("unscheduled: {:?}", tx.send(&frame, Schedule::Now)?);
    }
    println!(
        "late:        {:?}",
        tx.send(&frame, Schedule::At(clock.now() - 1))?
    );

    // push 100 ms of samples; the 10 ms threshold paces the caller
    let start = Instant::now();
    let mut blocked = Duration::ZERO;
    for _ in 0..100 {
        if let iqtwin::vradio::TxOutcome::BlockedThenSent { blocked: b, .. } =
            tx.send(&frame, Schedule::Now)?
        {
            blocked += b;
        }
    }
    println!(
        "100 frames (100 ms of air time) took {:.1} ms, blocked {:.1} ms",
        start.elapsed().as_secs_f64() * 1e3,
        blocked.as_secs_f64() * 1e3
    );

    let stamps: Vec<i64> = sink
        .frames()
        .iter()
        .map(|f| f.emulated_tx_time - t0)
        .collect();
    println!("first stamps relative to t0 (ns): {:?}", &stamps[..4]);
    println!("{:?}", tx.stats());
    Ok(())
}
