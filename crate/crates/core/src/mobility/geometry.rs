use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::geodesy::{enu_to_geodetic, geodetic_to_enu, Geodetic};

/// Position, attitude and velocity of a node at one instant.
///
/// Attitude follows the aerospace convention: body x forward, y right, z
/// down; yaw clockwise from north, then pitch, then roll (Z-Y-X).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GeoPose {
    pub lat: f64,
    pub lon: f64,
    pub alt: f64,
    #[serde(default)]
    pub yaw: f64,
    #[serde(default)]
    pub pitch: f64,
    #[serde(default)]
    pub roll: f64,
    /// East, north, up in m/s.
    #[serde(default)]
    pub velocity: [f64; 3],
    /// Host monotonic time of the sample, ns.
    #[serde(default)]
    pub timestamp: i64,
}

impl GeoPose {
    pub fn fixed(lat: f64, lon: f64, alt: f64) -> Self {
        GeoPose {
            lat,
            lon,
            alt,
            ..Default::default()
        }
    }

    pub fn position(&self) -> Geodetic {
        Geodetic::new(self.lat, self.lon, self.alt)
    }

    /// Moves the pose along its velocity for `dt` seconds.
    pub fn extrapolate(&self, dt: f64) -> GeoPose {
        let v = self.velocity;
        let p = enu_to_geodetic([v[0] * dt, v[1] * dt, v[2] * dt], self.position());
        GeoPose {
            lat: p.lat,
            lon: p.lon,
            alt: p.alt,
            timestamp: self.timestamp + (dt * 1e9) as i64,
            ..*self
        }
    }
}

/// Direction angles in a body frame, radians. Azimuth is in `[0, 2pi)`
/// clockwise from the body x axis, elevation positive upward.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Angles {
    pub az: f64,
    pub el: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub distance: f64,
    /// Departure direction in the transmitter body frame.
    pub aod: Angles,
    /// Arrival direction (towards the transmitter) in the receiver body frame.
    pub aoa: Angles,
    /// Rate of change of distance, m/s; positive when separating.
    pub radial_velocity: f64,
}

/// Rotates an ENU world vector into the body frame of a node with the given
/// attitude.
pub fn enu_to_body(v: [f64; 3], yaw: f64, pitch: f64, roll: f64) -> [f64; 3] {
    let ned = [v[1], v[0], -v[2]];
    let (sy, cy) = yaw.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sr, cr) = roll.sin_cos();
    // body->NED is Rz(yaw) Ry(pitch) Rx(roll); apply the transpose
    let r = [
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ];
    [0, 1, 2].map(|j| r[0][j] * ned[0] + r[1][j] * ned[1] + r[2][j] * ned[2])
}

fn body_angles(b: [f64; 3]) -> Angles {
    let horiz = b[0].hypot(b[1]);
    if horiz == 0.0 && b[2] == 0.0 {
        return Angles::default();
    }
    Angles {
        az: b[1].atan2(b[0]).rem_euclid(TAU),
        el: (-b[2]).atan2(horiz),
    }
}

/// Geometry from ENU positions, attitudes `(yaw, pitch, roll)` and ENU
/// velocities.
pub fn link_geometry_enu(
    p_tx: [f64; 3],
    att_tx: (f64, f64, f64),
    v_tx: [f64; 3],
    p_rx: [f64; 3],
    att_rx: (f64, f64, f64),
    v_rx: [f64; 3],
) -> LinkGeometry {
    let d = [p_rx[0] - p_tx[0], p_rx[1] - p_tx[1], p_rx[2] - p_tx[2]];
    let distance = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if distance == 0.0 {
        return LinkGeometry::default();
    }
    let u = d.map(|x| x / distance);
    let back = u.map(|x| -x);
    let rel = [v_rx[0] - v_tx[0], v_rx[1] - v_tx[1], v_rx[2] - v_tx[2]];
    LinkGeometry {
        distance,
        aod: body_angles(enu_to_body(u, att_tx.0, att_tx.1, att_tx.2)),
        aoa: body_angles(enu_to_body(back, att_rx.0, att_rx.1, att_rx.2)),
        radial_velocity: rel[0] * u[0] + rel[1] * u[1] + rel[2] * u[2],
    }
}

pub fn link_geometry(tx: &GeoPose, rx: &GeoPose, origin: Geodetic) -> LinkGeometry {
    let p_tx = geodetic_to_enu(tx.position(), origin);
    let p_rx = geodetic_to_enu(rx.position(), origin);
    link_geometry_enu(
        p_tx,
        (tx.yaw, tx.pitch, tx.roll),
        tx.velocity,
        p_rx,
        (rx.yaw, rx.pitch, rx.roll),
        rx.velocity,
    )
}
