//! Channel creation, gating, link fan-out and teardown on a live engine.

use std::sync::Arc;
use std::time::Duration;

use iqtwin::engine::{Engine, EngineConfig};
use iqtwin::vradio::{Direction, Endpoint, EndpointConfig, Schedule, StreamConfig, VirtualClock};
use iqtwin::wire::{ChannelInfo, PortType};
use iqtwin::Cf32;

use super::{ensure, Check};

const F1: f64 = 2.45e9;
const F2: f64 = 2.46e9;
const FS: f64 = 1e6;
const N: usize = 1000;

fn channel(engine: &Engine, fc: f64) -> Option<ChannelInfo> {
    engine
        .snapshot()
        .channels
        .into_iter()
        .find(|c| (c.center_freq - fc).abs() < 1.0)
}

fn wait_for(mut cond: impl FnMut() -> bool) -> bool {
    for _ in 0..200 {
        if cond() {
            return true;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    false
}

pub fn check_lifecycle(n: usize) -> Check {
    let engine = Engine::start(EngineConfig::local()).map_err(|e| e.to_string())?;
    let addr = engine.control_addr().to_string();
    let clock = Arc::new(VirtualClock::new());
    let node = |name: String, pt: PortType| {
        let mut c = EndpointConfig::new(name, addr.clone());
        c.port_type = pt;
        c.noise_power = Some(0.0);
        Endpoint::with_clock(c, clock.clone()).map_err(|e| e.to_string())
    };
    let txs: Vec<Endpoint> = (0..n)
        .map(|i| node(format!("tx{i}"), PortType::Tx))
        .collect::<Result<_, _>>()?;
    let rxs: Vec<Endpoint> = (0..n)
        .map(|i| node(format!("rx{i}"), PortType::Rx))
        .collect::<Result<_, _>>()?;
    let far = node("far".into(), PortType::Rx)?;
    let cfg = |d, fc| StreamConfig::new(d, fc, FS, N as u32);

    ensure(engine.snapshot().channels.is_empty(), || {
        "channel before any stream".into()
    })?;

    // first stream creates the channel; a lone transmitter is not processed
    let mut tx_streams = vec![txs[0]
        .tx_stream(cfg(Direction::Tx, F1))
        .map_err(|e| e.to_string())?];
    let ch = channel(&engine, F1).ok_or("no channel after first attach")?;
    ensure(!ch.active && ch.links.is_empty(), || {
        format!("lone TX channel active: {ch:?}")
    })?;
    let burst = vec![Cf32::new(0.5, 0.0); N];
    for _ in 0..5 {
        tx_streams[0]
            .send(&burst, Schedule::Now)
            .map_err(|e| e.to_string())?;
    }
    ensure(wait_for(|| engine.counters().frames_ignored >= 5), || {
        format!(
            "frames from a lone TX were not ignored: {:?}",
            engine.counters()
        )
    })?;
    ensure(engine.counters().frames_delivered == 0, || {
        "delivery without a receiver".into()
    })?;

    for t in &txs[1..] {
        tx_streams.push(
            t.tx_stream(cfg(Direction::Tx, F1))
                .map_err(|e| e.to_string())?,
        );
    }
    let mut rx_streams = Vec::new();
    for r in &rxs {
        rx_streams.push(
            r.rx_stream(cfg(Direction::Rx, F1))
                .map_err(|e| e.to_string())?,
        );
    }
    let mut far_rx = far
        .rx_stream(cfg(Direction::Rx, F2))
        .map_err(|e| e.to_string())?;
    let ch = channel(&engine, F1).ok_or("channel vanished")?;
    ensure(ch.active, || "channel with TX and RX is not active".into())?;
    ensure(ch.links.len() == n * n, || {
        format!("{} links for {n} x {n}", ch.links.len())
    })?;
    let other = channel(&engine, F2).ok_or("no channel at the second frequency")?;
    ensure(!other.active && other.links.is_empty(), || {
        format!("second channel: {other:?}")
    })?;
    ensure(engine.snapshot().channels.len() == 2, || {
        "expected two channels".into()
    })?;

    // traffic on F1; the F2 receiver must read exact zeros
    let before = engine.counters().frames_delivered;
    let start = (clock.now() / 1_000_000 + 30) * 1_000_000;
    // interleaved, so backpressure on one stream does not make the others late
    for k in 0..10 {
        for s in tx_streams.iter_mut() {
            let when = if k == 0 {
                Schedule::At(start)
            } else {
                Schedule::Now
            };
            s.send(&burst, when).map_err(|e| e.to_string())?;
        }
    }
    let mut y = vec![Cf32::default(); 10 * N];
    let st = far_rx
        .recv(&mut y, Schedule::At(start), Duration::from_secs(2))
        .map_err(|e| e.to_string())?;
    let leak = y.iter().map(|s| s.norm_sqr() as f64).sum::<f64>();
    ensure(st.ok() && leak == 0.0, || {
        format!("cross-frequency leakage {leak} ({st:?})")
    })?;
    let mut got = vec![Cf32::default(); 10 * N];
    let st = rx_streams[0]
        .recv(&mut got, Schedule::At(start), Duration::from_secs(2))
        .map_err(|e| e.to_string())?;
    let want = n as f32 * 0.5;
    ensure(
        st.ok()
            && got
                .iter()
                .all(|s| (s.re - want).abs() < 1e-5 && s.im == 0.0),
        || {
            let bad = got
                .iter()
                .position(|s| (s.re - want).abs() >= 1e-5 || s.im != 0.0);
            format!("co-channel receiver did not see the {n} superposed transmitters ({st:?}, first bad {bad:?}: {:?})", bad.map(|i| got[i]))
        },
    )?;
    let expect = (n * n * 10) as u64;
    ensure(
        wait_for(|| engine.counters().frames_delivered - before >= expect),
        || {
            format!(
                "delivered {} of {expect}",
                engine.counters().frames_delivered - before
            )
        },
    )?;

    drop(tx_streams);
    ensure(channel(&engine, F1).is_some_and(|c| !c.active), || {
        "channel without TX still active".into()
    })?;
    drop(rx_streams);
    ensure(channel(&engine, F1).is_none(), || {
        "empty channel not destroyed".into()
    })?;
    drop(far_rx);
    ensure(engine.snapshot().channels.is_empty(), || {
        "channels left after detach".into()
    })?;

    Ok(format!(
        "created on first stream, gated, {n}x{n} = {} links, isolation exact (leak 0), destroyed when empty",
        n * n
    ))
}
