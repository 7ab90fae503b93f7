//! Following a vehicle's MAVLink telemetry.
//!
//! A stand-in autopilot serves GLOBAL_POSITION_INT and ATTITUDE packets over
//! TCP with line noise in between. The connector parses the stream and keeps
//! the latest pose, which the engine would use for that node's geometry.

use std::io::Write;
use std::net::TcpListener;
use std::time::Duration;

use iqtwin::mobility::mavlink::{attitude_payload, encode_v1, global_position_payload};
use iqtwin::mobility::{PoseSlot, VehicleConnector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;

    let autopilot = std::thread::spawn(move || -> std::io::Result<()> {
        let (mut s, _) = listener.accept()?;
        for k in 0..20u32 {
            let lat = 35.7713 + 1e-5 * k as f64;
            let pos =
                global_position_payload(100 * k, lat, -78.6749, 120.0, 30.0, [11.1, 0.0, -0.5]);
            let att = attitude_payload(100 * k, 0.02, -0.05, 0.1 * k as f32);
            s.write_all(&encode_v1(2 * k as u8, 33, &pos))?;
            s.write_all(b"\x00\x13line noise")?;
            s.write_all(&encode_v1(2 * k as u8 + 1, 30, &att))?;
            std::thread::sleep(Duration::from_millis(20));
        }
        Ok(())
    });

    let slot = PoseSlot::new();
    let conn = VehicleConnector::spawn(addr, slot.clone());
    for _ in 0..4 {
        std::thread::sleep(Duration::from_millis(100));
        if let Some(p) = slot.latest() {
            println!(
                "lat {:.6} lon {:.6} alt {:.1} m  yaw {:.2} rad  v_enu [{:.1}, {:.1}, {:.1}] m/s",
                p.lat, p.lon, p.alt, p.yaw, p.velocity[0], p.velocity[1], p.velocity[2]
            );
        }
    }
    autopilot.join().expect("autopilot thread")?;
    std::thread::sleep(Duration::from_millis(50));
    println!("{:?}", conn.stats());
    Ok(())
}
