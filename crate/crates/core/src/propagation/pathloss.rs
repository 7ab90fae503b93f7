use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::units::SPEED_OF_LIGHT;
use super::PropagationError;

/// Friis free-space loss in dB.
pub fn free_space_loss(d: f64, f: f64) -> Result<f64, PropagationError> {
    if !(d > 0.0) {
        return Err(PropagationError::BadDistance(d));
    }
    if !(f > 0.0) {
        return Err(PropagationError::BadFrequency(f));
    }
    Ok(20.0 * (4.0 * PI * d * f / SPEED_OF_LIGHT).log10())
}

/// Coherent two-ray ground reflection loss in dB.
///
/// `gamma` is the ground reflection coefficient (-1 for a perfect conductor at
/// grazing incidence).
pub fn two_ray_loss(
    d: f64,
    f: f64,
    h_t: f64,
    h_r: f64,
    gamma: f64,
) -> Result<f64, PropagationError> {
    if !(d > 0.0) {
        return Err(PropagationError::BadDistance(d));
    }
    if !(f > 0.0) {
        return Err(PropagationError::BadFrequency(f));
    }
    if !(h_t > 0.0 && h_r > 0.0) {
        return Err(PropagationError::BadHeights(h_t, h_r));
    }
    let lambda = SPEED_OF_LIGHT / f;
    let k = 2.0 * PI / lambda;
    let l1 = d.hypot(h_t - h_r);
    let l2 = d.hypot(h_t + h_r);
    let e = Complex64::from_polar(1.0 / l1, -k * l1) + Complex64::from_polar(gamma / l2, -k * l2);
    // |E| can vanish at an exact null; cap the loss instead of returning inf.
    let mag = (lambda / (4.0 * PI) * e.norm()).max(1e-15);
    Ok(-20.0 * mag.log10())
}

/// Path-loss model selectable per node or per engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum PathLossModel {
    FreeSpace,
    TwoRay {
        /// Defaults to the transmitter altitude.
        #[serde(default)]
        tx_height: Option<f64>,
        #[serde(default)]
        rx_height: Option<f64>,
        #[serde(default = "minus_one")]
        reflection_coeff: f64,
    },
    Fixed {
        loss_db: f64,
    },
    /// `(distance m, loss dB)` points, interpolated in log-distance.
    Custom {
        points: Vec<(f64, f64)>,
    },
}

fn minus_one() -> f64 {
    -1.0
}

impl Default for PathLossModel {
    fn default() -> Self {
        PathLossModel::FreeSpace
    }
}

impl PathLossModel {
    pub fn two_ray() -> Self {
        PathLossModel::TwoRay {
            tx_height: None,
            rx_height: None,
            reflection_coeff: -1.0,
        }
    }

    /// Checks parameters that do not depend on the link geometry.
    pub fn validate(&self) -> Result<(), PropagationError> {
        match self {
            PathLossModel::Custom { points } if !points.iter().any(|p| p.0 > 0.0) => {
                Err(PropagationError::EmptyTable)
            }
            PathLossModel::TwoRay {
                tx_height: Some(a), ..
            }
            | PathLossModel::TwoRay {
                rx_height: Some(a), ..
            } if !(*a > 0.0) => Err(PropagationError::BadHeights(*a, *a)),
            _ => Ok(()),
        }
    }

    /// Loss in dB at distance `d` and frequency `f`. `heights` are the node
    /// altitudes, used by the two-ray model when no explicit height is set.
    pub fn loss_db(&self, d: f64, f: f64, heights: (f64, f64)) -> Result<f64, PropagationError> {
        match self {
            PathLossModel::FreeSpace => free_space_loss(d, f),
            PathLossModel::TwoRay {
                tx_height,
                rx_height,
                reflection_coeff,
            } => two_ray_loss(
                d,
                f,
                tx_height.unwrap_or(heights.0),
                rx_height.unwrap_or(heights.1),
                *reflection_coeff,
            ),
            PathLossModel::Fixed { loss_db } => Ok(*loss_db),
            PathLossModel::Custom { points } => interpolate_table(points, d),
        }
    }
}

fn interpolate_table(points: &[(f64, f64)], d: f64) -> Result<f64, PropagationError> {
    if !(d > 0.0) {
        return Err(PropagationError::BadDistance(d));
    }
    let mut pts: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0 > 0.0).collect();
    if pts.is_empty() {
        return Err(PropagationError::EmptyTable);
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let x = d.log10();
    let first = pts[0];
    let last = pts[pts.len() - 1];
    if d <= first.0 {
        return Ok(first.1);
    }
    if d >= last.0 {
        return Ok(last.1);
    }
    let i = pts.partition_point(|p| p.0 <= d);
    let (a, b) = (pts[i - 1], pts[i]);
    let (xa, xb) = (a.0.log10(), b.0.log10());
    Ok(a.1 + (b.1 - a.1) * (x - xa) / (xb - xa))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fspl_reference_points() {
        let f0 = SPEED_OF_LIGHT / (4.0 * PI);
        assert!(free_space_loss(1.0, f0).unwrap().abs() < 1e-12);
        let l = free_space_loss(100.0, 3.41e9).unwrap();
        assert!((l - 83.10).abs() < 0.01, "{l}");
        let l10 = free_space_loss(1000.0, 3.41e9).unwrap();
        assert!((l10 - l - 20.0).abs() < 1e-9);
        assert!(free_space_loss(0.0, 1e9).is_err());
    }

    /// Independent two-ray evaluation with real arithmetic only.
    fn two_ray_oracle(d: f64, f: f64, ht: f64, hr: f64, g: f64) -> f64 {
        let lam = 299_792_458.0 / f;
        let l1 = (d * d + (ht - hr) * (ht - hr)).sqrt();
        let l2 = (d * d + (ht + hr) * (ht + hr)).sqrt();
        let p1 = -2.0 * std::f64::consts::PI * l1 / lam;
        let p2 = -2.0 * std::f64::consts::PI * l2 / lam;
        let re = p1.cos() / l1 + g * p2.cos() / l2;
        let im = p1.sin() / l1 + g * p2.sin() / l2;
        -20.0 * (lam / (4.0 * std::f64::consts::PI) * (re * re + im * im).sqrt()).log10()
    }

    #[test]
    fn two_ray_matches_scalar_oracle() {
        let got = two_ray_loss(1000.0, 3.41e9, 1.0, 1.0, -1.0).unwrap();
        let want = two_ray_oracle(1000.0, 3.41e9, 1.0, 1.0, -1.0);
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn two_ray_far_field_asymptote() {
        let (ht, hr, f) = (6.0, 1.5, 3.41e9);
        let lambda = SPEED_OF_LIGHT / f;
        let d_min = 100.0 * ht * hr / lambda;
        for d in [d_min, 2.0 * d_min, 10.0 * d_min] {
            let asym = 40.0 * d.log10() - 20.0 * (ht * hr).log10();
            let got = two_ray_loss(d, f, ht, hr, -1.0).unwrap();
            assert!((got - asym).abs() < 1.0, "d={d}: {got} vs {asym}");
        }
    }

    #[test]
    fn two_ray_rejects_degenerate_geometry() {
        assert!(two_ray_loss(0.0, 1e9, 1.0, 1.0, -1.0).is_err());
        assert!(two_ray_loss(10.0, 1e9, 0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn custom_table_interpolates_in_log_distance() {
        let m = PathLossModel::Custom {
            points: vec![(10.0, 60.0), (100.0, 80.0)],
        };
        assert!((m.loss_db(10f64.powf(1.5), 1e9, (1.0, 1.0)).unwrap() - 70.0).abs() < 1e-12);
        assert_eq!(m.loss_db(1.0, 1e9, (1.0, 1.0)).unwrap(), 60.0);
        assert_eq!(m.loss_db(1e4, 1e9, (1.0, 1.0)).unwrap(), 80.0);
        assert!(PathLossModel::Custom { points: vec![] }.validate().is_err());
    }

    #[test]
    fn model_json_shapes() {
        let m: PathLossModel = serde_json::from_str(r#"{"model":"two_ray"}"#).unwrap();
        assert_eq!(m, PathLossModel::two_ray());
        let m: PathLossModel = serde_json::from_str(r#"{"model":"fixed","loss_db":30}"#).unwrap();
        assert_eq!(m.loss_db(5.0, 1e9, (1.0, 1.0)).unwrap(), 30.0);
    }

    proptest! {
        #[test]
        fn two_ray_without_reflection_is_friis(d in 1.0f64..1e5, f in 1e8f64..1e10, ht in 0.5f64..100.0, hr in 0.5f64..100.0) {
            let l1 = d.hypot(ht - hr);
            let a = two_ray_loss(d, f, ht, hr, 0.0).unwrap();
            let b = free_space_loss(l1, f).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn fspl_nonnegative_beyond_one_metre(d in 1.0f64..1e6, f in 2.4e7f64..1e11) {
            prop_assert!(free_space_loss(d, f).unwrap() >= 0.0);
        }
    }
}
