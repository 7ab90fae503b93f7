use std::f64::consts::PI;
use std::path::Path;

use super::units::db_to_amp;
use super::PropagationError;

/// Gain floor for pattern nulls, dBi.
const NULL_FLOOR_DBI: f64 = -40.0;

/// Antenna gain pattern sampled on an azimuth x elevation lattice of dBi
/// values. Azimuth wraps around 360 degrees; elevation is clamped to the
/// grid's range.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaPattern {
    pub name: String,
    /// Ascending, within [0, 360).
    az_deg: Vec<f64>,
    /// Ascending, within [-90, 90].
    el_deg: Vec<f64>,
    /// Row-major by azimuth: `gain[a * el.len() + e]`.
    gain_dbi: Vec<f64>,
}

impl AntennaPattern {
    pub fn from_grid(
        name: impl Into<String>,
        az_deg: Vec<f64>,
        el_deg: Vec<f64>,
        gain_dbi: Vec<f64>,
    ) -> Result<Self, PropagationError> {
        let bad = |m: &str| Err(PropagationError::Pattern(m.to_string()));
        if az_deg.is_empty() || el_deg.is_empty() {
            return bad("empty grid");
        }
        if gain_dbi.len() != az_deg.len() * el_deg.len() {
            return bad("gain count does not match grid size");
        }
        if !az_deg.windows(2).all(|w| w[0] < w[1])
            || az_deg[0] < 0.0
            || *az_deg.last().unwrap() >= 360.0
        {
            return bad("azimuths must be ascending within [0, 360)");
        }
        if !el_deg.windows(2).all(|w| w[0] < w[1])
            || el_deg[0] < -90.0
            || *el_deg.last().unwrap() > 90.0
        {
            return bad("elevations must be ascending within [-90, 90]");
        }
        if gain_dbi.iter().any(|g| !g.is_finite()) {
            return bad("non-finite gain");
        }
        Ok(AntennaPattern {
            name: name.into(),
            az_deg,
            el_deg,
            gain_dbi,
        })
    }

    pub fn isotropic() -> Self {
        AntennaPattern {
            name: "isotropic".into(),
            az_deg: vec![0.0],
            el_deg: vec![-90.0, 90.0],
            gain_dbi: vec![0.0, 0.0],
        }
    }

    /// Half-wave dipole along the body z axis, tabulated every degree of
    /// elevation.
    pub fn dipole() -> Self {
        let el_deg: Vec<f64> = (-90..=90).map(f64::from).collect();
        let gain_dbi = el_deg
            .iter()
            .map(|el| {
                let theta = (90.0 - el).to_radians();
                let s = theta.sin();
                if s.abs() < 1e-12 {
                    return NULL_FLOOR_DBI;
                }
                let g = 1.64 * ((PI / 2.0 * theta.cos()).cos() / s).powi(2);
                (10.0 * g.log10()).max(NULL_FLOOR_DBI)
            })
            .collect();
        AntennaPattern {
            name: "dipole".into(),
            az_deg: vec![0.0],
            el_deg,
            gain_dbi,
        }
    }

    /// Built-in pattern by name.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "isotropic" => Some(Self::isotropic()),
            "dipole" => Some(Self::dipole()),
            _ => None,
        }
    }

    /// Loads `az_deg,el_deg,gain_dbi` rows (header optional) on a regular grid
    /// covering the full azimuth circle.
    pub fn load_csv(
        name: impl Into<String>,
        path: impl AsRef<Path>,
    ) -> Result<Self, PropagationError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv(name, &text)
    }

    pub fn parse_csv(name: impl Into<String>, text: &str) -> Result<Self, PropagationError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let vals: Vec<Result<f64, _>> = rec.iter().map(str::parse::<f64>).collect();
            match vals.as_slice() {
                [Ok(a), Ok(e), Ok(g)] => rows.push((a.rem_euclid(360.0), *e, *g)),
                _ if rows.is_empty() => continue, // header
                _ => return Err(PropagationError::Pattern(format!("bad row: {:?}", rec))),
            }
        }
        let mut az: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut el: Vec<f64> = rows.iter().map(|r| r.1).collect();
        az.sort_by(f64::total_cmp);
        az.dedup();
        el.sort_by(f64::total_cmp);
        el.dedup();
        if rows.len() != az.len() * el.len() {
            return Err(PropagationError::Pattern(format!(
                "{} rows do not form a full {}x{} grid",
                rows.len(),
                az.len(),
                el.len()
            )));
        }
        let regular = |v: &[f64]| {
            v.windows(2)
                .all(|w| ((w[1] - w[0]) - (v[1] - v[0])).abs() < 1e-6)
        };
        if az.len() > 1 {
            let step = az[1] - az[0];
            if !regular(&az) || ((az.len() as f64) * step - 360.0).abs() > 1e-6 {
                return Err(PropagationError::Pattern(
                    "azimuth axis must evenly cover 360 degrees".into(),
                ));
            }
        }
        if el.len() > 1 && !regular(&el) {
            return Err(PropagationError::Pattern(
                "elevation axis is not regular".into(),
            ));
        }
        let mut gain = vec![f64::NAN; az.len() * el.len()];
        for (a, e, g) in rows {
            let ai = az.partition_point(|x| *x < a);
            let ei = el.partition_point(|x| *x < e);
            let slot = &mut gain[ai * el.len() + ei];
            if !slot.is_nan() {
                return Err(PropagationError::Pattern(format!(
                    "duplicate point ({a}, {e})"
                )));
            }
            *slot = g;
        }
        Self::from_grid(name, az, el, gain)
    }

    fn at(&self, a: usize, e: usize) -> f64 {
        self.gain_dbi[a * self.el_deg.len() + e]
    }

    /// Interpolated gain in dBi; angles in radians.
    pub fn gain_dbi(&self, az: f64, el: f64) -> f64 {
        let az = az.to_degrees().rem_euclid(360.0);
        let el = el.to_degrees().clamp(-90.0, 90.0);

        let na = self.az_deg.len();
        let (a0, a1, ta) = if na == 1 {
            (0, 0, 0.0)
        } else {
            let i = self.az_deg.partition_point(|x| *x <= az);
            let (lo, hi) = if i == 0 { (na - 1, 0) } else { (i - 1, i % na) };
            let x0 = self.az_deg[lo];
            let mut x1 = self.az_deg[hi];
            let mut x = az;
            if x1 <= x0 {
                x1 += 360.0;
            }
            if x < x0 {
                x += 360.0;
            }
            (lo, hi, (x - x0) / (x1 - x0))
        };

        let ne = self.el_deg.len();
        let (e0, e1, te) = if ne == 1 || el <= self.el_deg[0] {
            (0, 0, 0.0)
        } else if el >= self.el_deg[ne - 1] {
            (ne - 1, ne - 1, 0.0)
        } else {
            let i = self.el_deg.partition_point(|x| *x <= el);
            let (y0, y1) = (self.el_deg[i - 1], self.el_deg[i]);
            (i - 1, i, (el - y0) / (y1 - y0))
        };

        let g00 = self.at(a0, e0);
        let g01 = self.at(a0, e1);
        let g10 = self.at(a1, e0);
        let g11 = self.at(a1, e1);
        let g0 = g00 + (g01 - g00) * te;
        let g1 = g10 + (g11 - g10) * te;
        g0 + (g1 - g0) * ta
    }

    /// Linear amplitude gain; angles in radians.
    pub fn gain(&self, az: f64, el: f64) -> f64 {
        db_to_amp(self.gain_dbi(az, el))
    }
}
