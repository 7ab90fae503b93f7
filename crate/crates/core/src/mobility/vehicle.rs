use std::io::Read;
use std::net::{SocketAddr, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use super::geometry::GeoPose;
use super::mavlink::{MavMessage, MavParser, ParserStats};
use super::pose::PoseSlot;
use crate::vradio::host_now_ns;

/// Applies one telemetry message to a pose slot.
pub fn apply_message(slot: &PoseSlot, msg: &MavMessage, now_ns: i64) {
    match *msg {
        MavMessage::GlobalPosition(g) => slot.update(|p| {
            *p = GeoPose {
                lat: g.lat,
                lon: g.lon,
                alt: g.relative_alt,
                velocity: [g.vel_ned[1], g.vel_ned[0], -g.vel_ned[2]],
                timestamp: now_ns,
                ..*p
            }
        }),
        MavMessage::Attitude(a) => slot.update(|p| {
            p.roll = a.roll as f64;
            p.pitch = a.pitch as f64;
            p.yaw = a.yaw as f64;
        }),
    }
}

/// Background TCP client that follows a vehicle's telemetry stream and keeps
/// the latest pose in a [`PoseSlot`]. Reconnects after errors.
pub struct VehicleConnector {
    stop: Arc<AtomicBool>,
    stats: Arc<Mutex<ParserStats>>,
    handle: Option<JoinHandle<()>>,
}

impl VehicleConnector {
    pub fn spawn(addr: SocketAddr, slot: PoseSlot) -> Self {
        let stop = Arc::new(AtomicBool::new(false));
        let stats = Arc::new(Mutex::new(ParserStats::default()));
        let (s, st) = (stop.clone(), stats.clone());
        let handle = std::thread::Builder::new()
            .name(format!("vehicle-{addr}"))
            .spawn(move || run(addr, slot, s, st))
            .expect("spawn vehicle connector");
        VehicleConnector {
            stop,
            stats,
            handle: Some(handle),
        }
    }

    pub fn stats(&self) -> ParserStats {
        *self.stats.lock().unwrap()
    }
}

impl Drop for VehicleConnector {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Release);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn run(addr: SocketAddr, slot: PoseSlot, stop: Arc<AtomicBool>, stats: Arc<Mutex<ParserStats>>) {
    let mut buf = [0u8; 4096];
    while !stop.load(Ordering::Acquire) {
        let mut stream = match TcpStream::connect_timeout(&addr, Duration::from_millis(500)) {
            Ok(s) => s,
            Err(e) => {
                log::debug!("vehicle {addr}: {e}");
                std::thread::sleep(Duration::from_millis(500));
                continue;
            }
        };
        let _ = stream.set_read_timeout(Some(Duration::from_millis(50)));
        let mut parser = MavParser::new();
        while !stop.load(Ordering::Acquire) {
            match stream.read(&mut buf) {
                Ok(0) => break,
                Ok(n) => {
                    let now = host_now_ns();
                    for m in parser.push(&buf[..n]) {
                        apply_message(&slot, &m, now);
                    }
                    *stats.lock().unwrap() = parser.stats();
                }
                Err(e)
                    if matches!(
                        e.kind(),
                        std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut
                    ) => {}
                Err(e) => {
                    log::debug!("vehicle {addr}: {e}");
                    break;
                }
            }
        }
    }
}
