use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::mobility::Geodetic;
use crate::propagation::PathLossModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoisePlacement {
    /// Receivers add their own noise (the engine adds none).
    #[default]
    Endpoint,
    /// The engine adds noise on every link before the receive antenna gain.
    Engine,
}

/// Settings applied to a node when it registers under this name.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NodeProfile {
    #[serde(default)]
    pub position: Option<Geodetic>,
    /// `host:port` of a MAVLink telemetry server.
    #[serde(default)]
    pub vehicle: Option<String>,
    /// Path to a trajectory JSON file.
    #[serde(default)]
    pub trajectory: Option<String>,
    #[serde(default)]
    pub antenna: Option<String>,
    #[serde(default)]
    pub path_loss: Option<PathLossModel>,
    #[serde(default)]
    pub freq_offset_hz: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngineConfig {
    #[serde(default = "default_control")]
    pub control_addr: String,
    /// Address the per-node data sockets bind to.
    #[serde(default = "default_host")]
    pub data_host: String,
    /// First data port; 0 lets the OS pick.
    #[serde(default)]
    pub port_base: u16,
    #[serde(default = "default_port_count")]
    pub port_count: u16,
    #[serde(default)]
    pub default_path_loss: PathLossModel,
    #[serde(default = "default_antenna")]
    pub default_antenna: String,
    /// Extra antenna patterns: name -> CSV path.
    #[serde(default)]
    pub antennas: HashMap<String, String>,
    #[serde(default)]
    pub nodes: HashMap<String, NodeProfile>,
    #[serde(default = "default_drop_threshold")]
    pub drop_threshold_ms: f64,
    #[serde(default)]
    pub noise_placement: NoisePlacement,
    #[serde(default = "default_nf")]
    pub noise_figure_db: f64,
    #[serde(default)]
    pub full_scale_dbm: f64,
    #[serde(default = "default_liveness")]
    pub liveness_timeout_ms: u64,
    #[serde(default = "default_depth")]
    pub egress_depth: usize,
    #[serde(default = "default_true")]
    pub self_reception: bool,
    #[serde(default = "default_mtu")]
    pub mtu: usize,
}

fn default_control() -> String {
    "127.0.0.1:5600".into()
}
fn default_host() -> String {
    "127.0.0.1".into()
}
fn default_port_count() -> u16 {
    2000
}
fn default_antenna() -> String {
    "isotropic".into()
}
fn default_drop_threshold() -> f64 {
    5.0
}
fn default_nf() -> f64 {
    7.0
}
fn default_liveness() -> u64 {
    10_000
}
fn default_depth() -> usize {
    64
}
fn default_true() -> bool {
    true
}
fn default_mtu() -> usize {
    1500
}

impl Default for EngineConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl EngineConfig {
    /// Loopback control plane on an OS-assigned port; handy for tests.
    pub fn local() -> Self {
        EngineConfig {
            control_addr: "127.0.0.1:0".into(),
            ..Default::default()
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| EngineError::Config(e.to_string()))
    }
}
