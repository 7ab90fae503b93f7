use std::path::Path;

use serde::{Deserialize, Serialize};

use super::geodesy::{enu_to_geodetic, geodetic_to_enu, Geodetic};
use super::geometry::GeoPose;
use super::MobilityError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub lat: f64,
    pub lon: f64,
    pub alt: f64,
    /// Speed on the leg that starts here, m/s.
    pub speed: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TrajectoryFile {
    List(Vec<Waypoint>),
    Full {
        waypoints: Vec<Waypoint>,
        #[serde(default, rename = "loop")]
        looped: bool,
    },
}

struct Leg {
    from: [f64; 3],
    dir: [f64; 3],
    length: f64,
    speed: f64,
    t_start: f64,
}

/// Waypoint player: constant speed along straight ENU legs.
pub struct Trajectory {
    origin: Geodetic,
    legs: Vec<Leg>,
    end: [f64; 3],
    duration: f64,
    looped: bool,
}

impl Trajectory {
    pub fn new(waypoints: Vec<Waypoint>, looped: bool) -> Result<Self, MobilityError> {
        let first = *waypoints.first().ok_or(MobilityError::EmptyTrajectory)?;
        if let Some(w) = waypoints.iter().find(|w| !(w.speed > 0.0)) {
            return Err(MobilityError::BadSpeed(w.speed));
        }
        let origin = Geodetic::new(first.lat, first.lon, first.alt);
        let mut pts: Vec<([f64; 3], f64)> = waypoints
            .iter()
            .map(|w| {
                (
                    geodetic_to_enu(Geodetic::new(w.lat, w.lon, w.alt), origin),
                    w.speed,
                )
            })
            .collect();
        if looped && pts.len() > 1 {
            pts.push(pts[0]);
        }
        let mut legs = Vec::new();
        let mut t = 0.0;
        for w in pts.windows(2) {
            let (a, b) = (w[0].0, w[1].0);
            let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let length = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if length == 0.0 {
                continue;
            }
            legs.push(Leg {
                from: a,
                dir: d.map(|x| x / length),
                length,
                speed: w[0].1,
                t_start: t,
            });
            t += length / w[0].1;
        }
        let end = pts.last().unwrap().0;
        Ok(Trajectory {
            origin,
            legs,
            end,
            duration: t,
            looped,
        })
    }

    /// Reads a JSON list of `{lat, lon, alt, speed}` or an object
    /// `{"waypoints": [...], "loop": true}`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, MobilityError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self, MobilityError> {
        match serde_json::from_str(text)? {
            TrajectoryFile::List(w) => Self::new(w, false),
            TrajectoryFile::Full { waypoints, looped } => Self::new(waypoints, looped),
        }
    }

    /// Seconds to traverse all legs once.
    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn origin(&self) -> Geodetic {
        self.origin
    }

    /// ENU position (about the first waypoint) and velocity after `t` seconds.
    pub fn state(&self, t: f64) -> ([f64; 3], [f64; 3]) {
        if self.legs.is_empty() {
            return (self.end, [0.0; 3]);
        }
        let t = if self.looped {
            t.rem_euclid(self.duration)
        } else {
            t.max(0.0)
        };
        if t >= self.duration {
            return (self.end, [0.0; 3]);
        }
        let i = self.legs.partition_point(|l| l.t_start <= t) - 1;
        let leg = &self.legs[i];
        let s = ((t - leg.t_start) * leg.speed).min(leg.length);
        let pos = [0, 1, 2].map(|k| leg.from[k] + leg.dir[k] * s);
        (pos, leg.dir.map(|x| x * leg.speed))
    }

    /// Pose `t_ns` after the start; yaw faces the direction of travel.
    pub fn pose(&self, t_ns: i64) -> GeoPose {
        let (pos, vel) = self.state(t_ns as f64 / 1e9);
        let g = enu_to_geodetic(pos, self.origin);
        let yaw = if vel[0] == 0.0 && vel[1] == 0.0 {
            self.last_heading()
        } else {
            vel[0].atan2(vel[1])
        };
        GeoPose {
            lat: g.lat,
            lon: g.lon,
            alt: g.alt,
            yaw,
            pitch: 0.0,
            roll: 0.0,
            velocity: vel,
            timestamp: t_ns,
        }
    }

    fn last_heading(&self) -> f64 {
        self.legs.last().map_or(0.0, |l| l.dir[0].atan2(l.dir[1]))
    }
}
