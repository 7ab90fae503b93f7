use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use uuid::Uuid;

use super::WireError;
use crate::vradio::StreamConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PortType {
    #[serde(rename = "RX")]
    Rx,
    #[serde(rename = "TX")]
    Tx,
    #[serde(rename = "RXTX")]
    RxTx,
}

impl PortType {
    pub fn can_transmit(self) -> bool {
        matches!(self, PortType::Tx | PortType::RxTx)
    }

    pub fn can_receive(self) -> bool {
        matches!(self, PortType::Rx | PortType::RxTx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    DuplicateName,
    UnknownNode,
    UnknownStream,
    UnknownChannel,
    InvalidStream,
    UnknownKey,
    InvalidValue,
    PortExhausted,
    Internal,
}

/// Control-plane message. Serialized as a JSON object tagged by `type`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ControlMessage {
    RegisterNode {
        name: String,
        port_type: PortType,
    },
    /// `tx_port`: engine port the node sends its TX frames to.
    /// `rx_port`: port the node listens on for frames from the engine.
    RegisterAck {
        uuid: Uuid,
        tx_port: u16,
        rx_port: u16,
    },
    AttachStream {
        uuid: Uuid,
        stream: StreamConfig,
        /// Host monotonic time (ns) at which the node's virtual clock read 0.
        #[serde(default)]
        clock_base_ns: i64,
    },
    AttachAck {
        uuid: Uuid,
        stream_id: u32,
        center_freq: f64,
    },
    DetachStream {
        uuid: Uuid,
        stream_id: u32,
    },
    UpdateNode {
        uuid: Uuid,
        settings: Map<String, Value>,
    },
    Keepalive {
        uuid: Uuid,
    },
    /// Management: set one parameter of a node addressed by name.
    SetNodeParam {
        node: String,
        key: String,
        value: Value,
    },
    /// Management: set one parameter of the channel at `center_freq`.
    SetChannelParam {
        center_freq: f64,
        key: String,
        value: Value,
    },
    GetState,
    State {
        snapshot: Snapshot,
    },
    Ack {
        #[serde(default)]
        applied: Map<String, Value>,
    },
    Error {
        code: ErrorCode,
        text: String,
    },
}

impl ControlMessage {
    pub fn error(code: ErrorCode, text: impl Into<String>) -> Self {
        ControlMessage::Error {
            code,
            text: text.into(),
        }
    }

    /// The node identity carried by endpoint requests, if any.
    pub fn uuid(&self) -> Option<Uuid> {
        match self {
            ControlMessage::RegisterAck { uuid, .. }
            | ControlMessage::AttachStream { uuid, .. }
            | ControlMessage::AttachAck { uuid, .. }
            | ControlMessage::DetachStream { uuid, .. }
            | ControlMessage::UpdateNode { uuid, .. }
            | ControlMessage::Keepalive { uuid } => Some(*uuid),
            _ => None,
        }
    }
}

/// A message plus an optional request id that replies echo back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlEnvelope {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    #[serde(flatten)]
    pub msg: ControlMessage,
}

pub fn encode_control(msg: &ControlMessage) -> String {
    serde_json::to_string(msg).expect("control messages always serialize")
}

pub fn decode_control(text: &str) -> Result<ControlMessage, WireError> {
    Ok(serde_json::from_str(text)?)
}

pub fn encode_envelope(env: &ControlEnvelope) -> String {
    serde_json::to_string(env).expect("control messages always serialize")
}

pub fn decode_envelope(text: &str) -> Result<ControlEnvelope, WireError> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Snapshot {
    pub nodes: Vec<NodeInfo>,
    pub channels: Vec<ChannelInfo>,
    pub counters: Counters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub uuid: Uuid,
    pub name: String,
    pub port_type: PortType,
    pub tx_port: u16,
    pub rx_port: u16,
    pub antenna: String,
    pub mobility: String,
    #[serde(default)]
    pub path_loss: Option<Value>,
    /// Latest position as [lat deg, lon deg, alt m], when known.
    #[serde(default)]
    pub position: Option<[f64; 3]>,
    pub streams: Vec<StreamInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamInfo {
    pub stream_id: u32,
    pub config: StreamConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelInfo {
    pub center_freq: f64,
    pub active: bool,
    pub tx_streams: Vec<u32>,
    pub rx_streams: Vec<u32>,
    pub links: Vec<LinkInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkInfo {
    pub tx_stream: u32,
    pub rx_stream: u32,
    pub distance_m: f64,
    pub path_loss_db: f64,
    pub delay_samples: u64,
    pub omega: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    pub taps: usize,
    pub ingested: u64,
    pub delivered: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counters {
    pub frames_ingested: u64,
    pub frames_ignored: u64,
    pub frames_delivered: u64,
    pub frames_dropped: u64,
    pub reassembly_dropped: u64,
    pub protocol_errors: u64,
}
