//! A waypoint route seen from a fixed base station: distance, Doppler shift
//! and two-ray loss along the way.

use iqtwin::mobility::{link_geometry, GeoPose, Trajectory};
use iqtwin::propagation::{doppler_offset, PathLossModel};

const ROUTE: &str = r#"{
  "waypoints": [
    {"lat": 35.7713, "lon": -78.6700, "alt": 1.5, "speed": 15.0},
    {"lat": 35.7760, "lon": -78.6700, "alt": 1.5, "speed": 25.0},
    {"lat": 35.7760, "lon": -78.6640, "alt": 1.5, "speed": 25.0}
  ],
  "loop": true
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fc = 3.41e9;
    let route = Trajectory::from_json(ROUTE)?;
    let base = GeoPose::fixed(35.7713, -78.6749, 6.0);
    let model = PathLossModel::two_ray();
    println!("route lasts {:.1} s and loops", route.duration());
    println!(
        "{:>6} {:>9} {:>9} {:>10} {:>9}",
        "t (s)", "d (m)", "v_r m/s", "doppler Hz", "loss dB"
    );
    let mut t = 0.0;
    while t <= route.duration() * 1.1 {
        let p = route.pose((t * 1e9) as i64);
        let g = link_geometry(&base, &p, base.position());
        let fd = doppler_offset(g.radial_velocity, fc);
        let loss = model.loss_db(g.distance, fc, (base.alt, p.alt))?;
        println!(
            "{t:>6.0} {:>9.1} {:>9.2} {fd:>10.2} {loss:>9.2}",
            g.distance, g.radial_velocity
        );
        t += 3.0;
    }
    Ok(())
}
