//! WGS-84 geodetic, ECEF and local east-north-up conversions.

use serde::{Deserialize, Serialize};

const A: f64 = 6_378_137.0;
const F: f64 = 1.0 / 298.257_223_563;
const E2: f64 = F * (2.0 - F);

/// Geodetic position: degrees and metres above the reference.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Geodetic {
    pub lat: f64,
    pub lon: f64,
    pub alt: f64,
}

impl Geodetic {
    pub fn new(lat: f64, lon: f64, alt: f64) -> Self {
        Geodetic { lat, lon, alt }
    }
}

pub fn geodetic_to_ecef(p: Geodetic) -> [f64; 3] {
    let (lat, lon) = (p.lat.to_radians(), p.lon.to_radians());
    let (sl, cl) = lat.sin_cos();
    let n = A / (1.0 - E2 * sl * sl).sqrt();
    [
        (n + p.alt) * cl * lon.cos(),
        (n + p.alt) * cl * lon.sin(),
        (n * (1.0 - E2) + p.alt) * sl,
    ]
}

pub fn ecef_to_geodetic(x: [f64; 3]) -> Geodetic {
    let lon = x[1].atan2(x[0]);
    let p = x[0].hypot(x[1]);
    // fixed-point iteration on latitude; converges to sub-nanodegree in a few steps
    let mut lat = x[2].atan2(p * (1.0 - E2));
    let mut alt = 0.0;
    for _ in 0..8 {
        let sl = lat.sin();
        let n = A / (1.0 - E2 * sl * sl).sqrt();
        alt = if lat.cos().abs() > 1e-12 {
            p / lat.cos() - n
        } else {
            x[2].abs() - n * (1.0 - E2)
        };
        lat = x[2].atan2(p * (1.0 - E2 * n / (n + alt)));
    }
    Geodetic {
        lat: lat.to_degrees(),
        lon: lon.to_degrees(),
        alt,
    }
}

fn enu_basis(origin: Geodetic) -> [[f64; 3]; 3] {
    let (lat, lon) = (origin.lat.to_radians(), origin.lon.to_radians());
    let (sl, cl) = lat.sin_cos();
    let (so, co) = lon.sin_cos();
    [
        [-so, co, 0.0],
        [-sl * co, -sl * so, cl],
        [cl * co, cl * so, sl],
    ]
}

/// `(east, north, up)` of `p` in metres relative to `origin`.
pub fn geodetic_to_enu(p: Geodetic, origin: Geodetic) -> [f64; 3] {
    let a = geodetic_to_ecef(p);
    let o = geodetic_to_ecef(origin);
    let d = [a[0] - o[0], a[1] - o[1], a[2] - o[2]];
    let b = enu_basis(origin);
    [0, 1, 2].map(|i| b[i][0] * d[0] + b[i][1] * d[1] + b[i][2] * d[2])
}

pub fn enu_to_geodetic(enu: [f64; 3], origin: Geodetic) -> Geodetic {
    let b = enu_basis(origin);
    let o = geodetic_to_ecef(origin);
    let x = [0, 1, 2].map(|j| o[j] + b[0][j] * enu[0] + b[1][j] * enu[1] + b[2][j] * enu[2]);
    ecef_to_geodetic(x)
}
