//! Immutable snapshots of channel configuration handed to processing threads.
//! A processor takes one `Arc<ChannelView>` per frame, so a reconfiguration
//! never mixes old and new parameters inside a frame.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crossbeam_channel::Sender;
use serde::Deserialize;
use uuid::Uuid;

use super::pipeline::OutFrame;
use crate::mobility::{GeoPose, Geodetic, PoseSlot, Trajectory};
use crate::propagation::{AntennaPattern, PathLossModel};
use crate::vradio::StreamConfig;
use crate::Cf32;

/// Where a node's pose comes from.
#[derive(Clone, Default)]
pub enum NodeMobility {
    /// No position: links involving the node use identity geometry.
    #[default]
    None,
    Fixed(GeoPose),
    Vehicle(PoseSlot),
    /// Played back from `start_host_ns` on the host monotonic clock.
    Trajectory {
        trajectory: Arc<Trajectory>,
        start_host_ns: i64,
    },
}

impl NodeMobility {
    pub fn pose(&self, host_ns: i64) -> Option<GeoPose> {
        match self {
            NodeMobility::None => None,
            NodeMobility::Fixed(p) => Some(*p),
            NodeMobility::Vehicle(slot) => slot.at(host_ns),
            NodeMobility::Trajectory {
                trajectory,
                start_host_ns,
            } => Some(trajectory.pose(host_ns - start_host_ns)),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            NodeMobility::None => "none".into(),
            NodeMobility::Fixed(_) => "fixed".into(),
            NodeMobility::Vehicle(_) => "vehicle".into(),
            NodeMobility::Trajectory { .. } => "trajectory".into(),
        }
    }
}

#[derive(Clone)]
pub struct NodeView {
    pub antenna: Arc<AntennaPattern>,
    pub mobility: NodeMobility,
    pub path_loss: Option<PathLossModel>,
    /// Local-oscillator offset of the node's transmitter, Hz.
    pub freq_offset_hz: f64,
    /// Engine-side noise power for links into this node; `None` = thermal.
    pub noise_power: Option<f64>,
}

impl Default for NodeView {
    fn default() -> Self {
        NodeView {
            antenna: Arc::new(AntennaPattern::isotropic()),
            mobility: NodeMobility::None,
            path_loss: None,
            freq_offset_hz: 0.0,
            noise_power: None,
        }
    }
}

#[derive(Clone)]
pub struct TxEntry {
    pub stream_id: u32,
    pub node: Uuid,
    pub config: StreamConfig,
    pub clock_base_ns: i64,
}

#[derive(Clone)]
pub struct RxEntry {
    pub stream_id: u32,
    pub node: Uuid,
    pub config: StreamConfig,
    pub clock_base_ns: i64,
    pub egress: Sender<OutFrame>,
}

/// Per-link values that replace the geometry-derived ones when set.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct LinkOverride {
    #[serde(default)]
    pub attenuation: Option<f64>,
    #[serde(default)]
    pub delay_samples: Option<u64>,
    #[serde(default)]
    pub omega: Option<f64>,
    #[serde(default)]
    pub taps: Option<Vec<[f32; 2]>>,
    #[serde(default)]
    pub tx_gain: Option<f64>,
    #[serde(default)]
    pub rx_gain: Option<f64>,
}

#[derive(Clone, Default)]
pub struct ChannelParams {
    pub path_loss: Option<PathLossModel>,
    /// CIR applied to every link unless overridden; empty = unit tap.
    pub taps: Vec<Cf32>,
    pub freq_offset_hz: f64,
    pub overrides: HashMap<(u32, u32), LinkOverride>,
}

#[derive(Debug, Default)]
pub struct LinkCounters {
    pub ingested: AtomicU64,
    pub delivered: AtomicU64,
    pub dropped: AtomicU64,
}

impl LinkCounters {
    pub fn get(&self) -> (u64, u64, u64) {
        (
            self.ingested.load(Ordering::Relaxed),
            self.delivered.load(Ordering::Relaxed),
            self.dropped.load(Ordering::Relaxed),
        )
    }
}

pub type LinkKey = (u32, u32);
pub type CounterMap = Arc<Mutex<HashMap<LinkKey, Arc<LinkCounters>>>>;

/// Everything a channel processor needs for one frame.
#[derive(Clone)]
pub struct ChannelView {
    pub center_freq: f64,
    pub tx: HashMap<u32, TxEntry>,
    pub rx: Vec<RxEntry>,
    pub nodes: HashMap<Uuid, NodeView>,
    pub params: ChannelParams,
    pub default_path_loss: PathLossModel,
    pub self_reception: bool,
    /// Shared ENU origin; set by the first fixed node or the first pose seen.
    pub origin: Arc<Mutex<Option<Geodetic>>>,
    pub engine_noise: bool,
    pub noise_figure_db: f64,
    pub full_scale_dbm: f64,
}

impl ChannelView {
    pub fn new(center_freq: f64) -> Self {
        ChannelView {
            center_freq,
            tx: HashMap::new(),
            rx: Vec::new(),
            nodes: HashMap::new(),
            params: ChannelParams::default(),
            default_path_loss: PathLossModel::FreeSpace,
            self_reception: true,
            origin: Arc::default(),
            engine_noise: false,
            noise_figure_db: 7.0,
            full_scale_dbm: 0.0,
        }
    }

    pub fn is_active(&self) -> bool {
        !self.tx.is_empty() && !self.rx.is_empty()
    }

    pub fn node(&self, id: &Uuid) -> NodeView {
        self.nodes.get(id).cloned().unwrap_or_default()
    }
}
