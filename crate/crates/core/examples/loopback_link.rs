//! One transmitter and one receiver attached to an in-process engine.
//!
//! The nodes have no positions, so the link is an identity channel and the
//! receiver gets back exactly what was sent, on its own timeline.

use std::sync::Arc;
use std::time::Duration;

use iqtwin::engine::{Engine, EngineConfig};
use iqtwin::vradio::{Direction, Endpoint, EndpointConfig, Schedule, StreamConfig, VirtualClock};
use iqtwin::wire::PortType;
use iqtwin::Cf32;

const FC: f64 = 2.45e9;
const FS: f64 = 1e6;
const N: usize = 1000;
const FRAMES: usize = 50;

fn chirp(k: usize) -> Vec<Cf32> {
    (0..N)
        .map(|i| {
            let t = (k * N + i) as f32 / FS as f32;
            Cf32::from_polar(0.7, 2e5 * t * t)
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    iqtwin::init_logging("warn");
    let engine = Engine::start(EngineConfig::local())?;
    let addr = engine.control_addr().to_string();

    let node = |name: &str, pt| {
        let mut c = EndpointConfig::new(name, addr.clone());
        c.port_type = pt;
        c.noise_power = Some(0.0);
        Endpoint::with_clock(c, Arc::new(VirtualClock::new()))
    };
    let a = node("a", PortType::Tx)?;
    let b = node("b", PortType::Rx)?;
    let mut tx = a.tx_stream(StreamConfig::new(Direction::Tx, FC, FS, N as u32))?;
    let mut rx = b.rx_stream(StreamConfig::new(Direction::Rx, FC, FS, N as u32))?;

    // each radio has its own clock; translate the start instant
    let t_tx = a.clock().now() + 20_000_000;
    let t_rx = t_tx + a.clock().clock_base_ns() - b.clock().clock_base_ns();

    let sender = std::thread::spawn(move || -> Result<(), iqtwin::vradio::VradioError> {
        tx.send(&chirp(0), Schedule::At(t_tx))?;
        for k in 1..FRAMES {
            tx.send(&chirp(k), Schedule::Now)?;
        }
        Ok(())
    });

    let mut out = vec![Cf32::default(); N];
    let mut worst = 0f32;
    for k in 0..FRAMES {
        let at = if k == 0 {
            Schedule::At(t_rx)
        } else {
            Schedule::Now
        };
        let status = rx.recv(&mut out, at, Duration::from_secs(1))?;
        if !status.ok() {
            println!("frame {k}: {status:?}");
        }
        for (x, y) in chirp(k).iter().zip(&out) {
            worst = worst.max((x - y).norm());
        }
    }
    sender.join().expect("sender thread")?;

    println!("{FRAMES} frames of {N} samples, max |y - x| = {worst:.2e}");
    println!("{:?}", engine.counters());
    Ok(())
}
