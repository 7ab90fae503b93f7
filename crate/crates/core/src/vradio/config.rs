use std::path::Path;

use serde::{Deserialize, Serialize};

use super::VradioError;
use crate::wire::{PortType, SampleFormat};

/// Highest sample rate the 1 ns timeline can represent.
pub const MAX_SAMPLE_RATE: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Tx,
    Rx,
}

/// Per-stream radio configuration, created by the application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub direction: Direction,
    /// Hz
    pub center_freq: f64,
    /// Samples per second; the sample period of the stream is its inverse.
    pub sample_rate: f64,
    #[serde(default = "one")]
    pub num_channels: u16,
    #[serde(default)]
    pub cpu_format: SampleFormat,
    #[serde(default)]
    pub otw_format: SampleFormat,
    /// Samples per channel in each signal frame.
    pub frame_samples: u32,
    /// TX only: count gaps between scheduled frames as underflows.
    #[serde(default)]
    pub continuous: bool,
}

fn one() -> u16 {
    1
}

impl StreamConfig {
    pub fn new(
        direction: Direction,
        center_freq: f64,
        sample_rate: f64,
        frame_samples: u32,
    ) -> Self {
        StreamConfig {
            direction,
            center_freq,
            sample_rate,
            num_channels: 1,
            cpu_format: SampleFormat::Cf32,
            otw_format: SampleFormat::Cf32,
            frame_samples,
            continuous: false,
        }
    }

    pub fn with_otw(mut self, fmt: SampleFormat) -> Self {
        self.otw_format = fmt;
        self
    }

    pub fn with_channels(mut self, n: u16) -> Self {
        self.num_channels = n;
        self
    }

    pub fn continuous(mut self) -> Self {
        self.continuous = true;
        self
    }

    pub fn validate(&self) -> Result<(), VradioError> {
        if !(self.sample_rate > 0.0 && self.sample_rate <= MAX_SAMPLE_RATE) {
            return Err(VradioError::InvalidConfig(format!(
                "sample rate {} outside (0, 1e9]",
                self.sample_rate
            )));
        }
        if !(self.center_freq > 0.0 && self.center_freq.is_finite()) {
            return Err(VradioError::InvalidConfig(format!(
                "center frequency {}",
                self.center_freq
            )));
        }
        if self.frame_samples == 0 {
            return Err(VradioError::InvalidConfig(
                "frame_samples must be at least 1".into(),
            ));
        }
        if self.num_channels == 0 {
            return Err(VradioError::InvalidConfig(
                "num_channels must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Endpoint configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub node_name: String,
    /// `host:port` of the engine control plane.
    pub engine_addr: String,
    #[serde(default = "rxtx")]
    pub port_type: PortType,
    #[serde(default)]
    pub streams: Vec<StreamConfig>,
    #[serde(default = "default_threshold")]
    pub buffer_threshold_ms: f64,
    #[serde(default = "default_capacity")]
    pub capacity_ms: f64,
    #[serde(default = "default_settle")]
    pub rx_settle_ms: f64,
    /// Receiver noise power in sample units; `None` uses the thermal floor.
    #[serde(default)]
    pub noise_power: Option<f64>,
    #[serde(default = "default_nf")]
    pub noise_figure_db: f64,
    /// Power in dBm that a unit-magnitude sample represents.
    #[serde(default)]
    pub full_scale_dbm: f64,
    #[serde(default)]
    pub noise_seed: u64,
    #[serde(default = "default_mtu")]
    pub mtu: usize,
}

fn rxtx() -> PortType {
    PortType::RxTx
}
fn default_threshold() -> f64 {
    10.0
}
fn default_capacity() -> f64 {
    50.0
}
fn default_settle() -> f64 {
    5.0
}
fn default_nf() -> f64 {
    7.0
}
fn default_mtu() -> usize {
    1500
}

impl EndpointConfig {
    pub fn new(node_name: impl Into<String>, engine_addr: impl Into<String>) -> Self {
        EndpointConfig {
            node_name: node_name.into(),
            engine_addr: engine_addr.into(),
            port_type: PortType::RxTx,
            streams: Vec::new(),
            buffer_threshold_ms: default_threshold(),
            capacity_ms: default_capacity(),
            rx_settle_ms: default_settle(),
            noise_power: None,
            noise_figure_db: default_nf(),
            full_scale_dbm: 0.0,
            noise_seed: 0,
            mtu: default_mtu(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VradioError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| VradioError::InvalidConfig(e.to_string()))
    }
}
