use std::sync::Arc;

use super::view::{ChannelView, NodeView, RxEntry, TxEntry};
use crate::mobility::{link_geometry, LinkGeometry};
use crate::propagation::{db_to_amp, doppler_offset, omega_for, PathLossModel, SPEED_OF_LIGHT};
use crate::Cf32;

/// Resolved per-link channel state for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams {
    /// `None` when either end has no position.
    pub geometry: Option<LinkGeometry>,
    pub path_loss_db: f64,
    /// Linear amplitude factor.
    pub attenuation: f64,
    /// Propagation delay in receiver samples.
    pub delay_samples: u64,
    /// rad/sample at the receiver rate.
    pub omega: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    pub taps: Arc<Vec<Cf32>>,
}

fn unit_taps() -> Arc<Vec<Cf32>> {
    Arc::new(vec![Cf32::new(1.0, 0.0)])
}

/// Path-loss model for a link: receiver node, then transmitter node, then
/// channel, then engine default.
fn model_for<'a>(view: &'a ChannelView, tx: &'a NodeView, rx: &'a NodeView) -> &'a PathLossModel {
    rx.path_loss
        .as_ref()
        .or(tx.path_loss.as_ref())
        .or(view.params.path_loss.as_ref())
        .unwrap_or(&view.default_path_loss)
}

pub fn compute_link(view: &ChannelView, tx: &TxEntry, rx: &RxEntry, host_ns: i64) -> LinkParams {
    let txn = view.node(&tx.node);
    let rxn = view.node(&rx.node);
    let fc = view.center_freq;
    let fs = rx.config.sample_rate;

    let geometry = if tx.node == rx.node {
        // self-reception: co-located antenna, no path
        None
    } else {
        match (txn.mobility.pose(host_ns), rxn.mobility.pose(host_ns)) {
            (Some(a), Some(b)) => {
                let origin = {
                    let mut o = view.origin.lock().unwrap();
                    *o.get_or_insert(a.position())
                };
                Some((link_geometry(&a, &b, origin), a.alt, b.alt))
            }
            _ => None,
        }
    };

    let mut p = LinkParams {
        geometry: geometry.map(|g| g.0),
        path_loss_db: 0.0,
        attenuation: 1.0,
        delay_samples: 0,
        omega: omega_for(txn.freq_offset_hz + view.params.freq_offset_hz, fs),
        tx_gain: 1.0,
        rx_gain: 1.0,
        taps: if view.params.taps.is_empty() {
            unit_taps()
        } else {
            Arc::new(view.params.taps.clone())
        },
    };

    if let Some((g, h_tx, h_rx)) = geometry {
        let d = g.distance.max(1.0);
        let model = model_for(view, &txn, &rxn);
        let heights = (h_tx.max(0.1), h_rx.max(0.1));
        let loss = model.loss_db(d, fc, heights).or_else(|e| {
            log::warn!("path loss {model:?} failed ({e}); using free space");
            PathLossModel::FreeSpace.loss_db(d, fc, heights)
        });
        p.path_loss_db = loss.unwrap_or(0.0).max(0.0);
        p.attenuation = db_to_amp(-p.path_loss_db);
        p.delay_samples = (g.distance / SPEED_OF_LIGHT * fs).round() as u64;
        p.omega += omega_for(doppler_offset(g.radial_velocity, fc), fs);
        p.tx_gain = txn.antenna.gain(g.aod.az, g.aod.el);
        p.rx_gain = rxn.antenna.gain(g.aoa.az, g.aoa.el);
    }

    if let Some(o) = view.params.overrides.get(&(tx.stream_id, rx.stream_id)) {
        if let Some(a) = o.attenuation {
            p.attenuation = a;
            p.path_loss_db = -20.0 * a.log10();
        }
        if let Some(d) = o.delay_samples {
            p.delay_samples = d;
        }
        if let Some(w) = o.omega {
            p.omega = w;
        }
        if let Some(t) = &o.taps {
            if !t.is_empty() {
                p.taps = Arc::new(t.iter().map(|c| Cf32::new(c[0], c[1])).collect());
            }
        }
        if let Some(g) = o.tx_gain {
            p.tx_gain = g;
        }
        if let Some(g) = o.rx_gain {
            p.rx_gain = g;
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::view::{LinkOverride, NodeMobility};
    use crate::mobility::{enu_to_geodetic, GeoPose, Geodetic};
    use crate::propagation::free_space_loss;
    use crate::vradio::{Direction, StreamConfig};
    use uuid::Uuid;

    fn scene(distance_east: f64) -> (ChannelView, TxEntry, RxEntry) {
        let mut v = ChannelView::new(3.41e9);
        let (a, b) = (Uuid::new_v4(), Uuid::new_v4());
        let o = Geodetic::new(35.727, -78.696, 10.0);
        let p = enu_to_geodetic([distance_east, 0.0, 0.0], o);
        v.nodes.insert(
            a,
            NodeView {
                mobility: NodeMobility::Fixed(GeoPose::fixed(o.lat, o.lon, o.alt)),
                ..Default::default()
            },
        );
        v.nodes.insert(
            b,
            NodeView {
                mobility: NodeMobility::Fixed(GeoPose::fixed(p.lat, p.lon, p.alt)),
                ..Default::default()
            },
        );
        let (s, _r) = crossbeam_channel::bounded(1);
        let tx = TxEntry {
            stream_id: 1,
            node: a,
            config: StreamConfig::new(Direction::Tx, 3.41e9, 1.92e6, 1920),
            clock_base_ns: 0,
        };
        let rx = RxEntry {
            stream_id: 2,
            node: b,
            config: StreamConfig::new(Direction::Rx, 3.41e9, 1.92e6, 1920),
            clock_base_ns: 0,
            egress: s,
        };
        (v, tx, rx)
    }

    #[test]
    fn free_space_link_from_fixed_positions() {
        let (v, tx, rx) = scene(1000.0);
        let p = compute_link(&v, &tx, &rx, 0);
        let g = p.geometry.unwrap();
        assert!((g.distance - 1000.0).abs() < 1e-3);
        let want = free_space_loss(g.distance, 3.41e9).unwrap();
        assert!((p.path_loss_db - want).abs() < 1e-9);
        assert!((p.attenuation - 10f64.powf(-want / 20.0)).abs() < 1e-15);
        // 1000 m / c * 1.92e6 = 6.4 samples
        assert_eq!(p.delay_samples, 6);
        assert_eq!(p.omega, 0.0);
    }

    #[test]
    fn node_model_overrides_default() {
        let (mut v, tx, rx) = scene(1000.0);
        v.nodes.get_mut(&rx.node).unwrap().path_loss = Some(PathLossModel::Fixed { loss_db: 42.0 });
        assert_eq!(compute_link(&v, &tx, &rx, 0).path_loss_db, 42.0);
    }

    #[test]
    fn missing_position_is_identity() {
        let (mut v, tx, rx) = scene(1000.0);
        v.nodes.get_mut(&rx.node).unwrap().mobility = NodeMobility::None;
        let p = compute_link(&v, &tx, &rx, 0);
        assert_eq!(
            (p.attenuation, p.delay_samples, p.tx_gain, p.rx_gain),
            (1.0, 0, 1.0, 1.0)
        );
        assert!(p.geometry.is_none());
    }

    #[test]
    fn overrides_replace_geometry_values() {
        let (mut v, tx, rx) = scene(1000.0);
        v.params.overrides.insert(
            (1, 2),
            LinkOverride {
                attenuation: Some(0.5),
                delay_samples: Some(3),
                omega: Some(0.01),
                taps: Some(vec![[0.0, 1.0]]),
                tx_gain: None,
                rx_gain: Some(2.0),
            },
        );
        let p = compute_link(&v, &tx, &rx, 0);
        assert_eq!(
            (p.attenuation, p.delay_samples, p.omega, p.rx_gain),
            (0.5, 3, 0.01, 2.0)
        );
        assert_eq!(p.taps.as_slice(), &[Cf32::new(0.0, 1.0)]);
    }
}
