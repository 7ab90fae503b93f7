//! Data-plane frame codec, UDP fragmentation, and the JSON control protocol.
//!
//! The byte layouts are documented in `docs/protocol.md`. Everything here is
//! pure: the only stateful piece is [`ReassemblyTable`], owned by a single
//! receiving socket.

mod control;
mod fragment;
mod frame;

pub use control::{
    decode_control, decode_envelope, encode_control, encode_envelope, ChannelInfo, ControlEnvelope,
    ControlMessage, Counters, ErrorCode, LinkInfo, NodeInfo, PortType, Snapshot, StreamInfo,
};
pub use fragment::{
    fragment, Fragment, Fragmenter, Reassembly, ReassemblyConfig, ReassemblyStats, ReassemblyTable,
    FRAGMENT_HEADER_LEN, FRAGMENT_MAGIC, MAX_DATAGRAM,
};
pub use frame::{SampleFormat, SignalFrame, FRAME_HEADER_LEN, FRAME_MAGIC, FRAME_VERSION};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("payload is {actual} bytes, header implies {expected}")]
    PayloadMismatch { expected: usize, actual: usize },
    #[error("frame must carry at least one sample and one channel")]
    EmptyFrame,
    #[error("sample count {samples} is not a multiple of {channels} channels")]
    ChannelMismatch { samples: usize, channels: usize },
    #[error("buffer truncated: need {needed} bytes, got {got}")]
    Truncated { needed: usize, got: usize },
    #[error("bad magic number")]
    BadMagic,
    #[error("unsupported frame version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown sample format code {0}")]
    UnknownFormat(u8),
    #[error("mtu {0} cannot carry a fragment")]
    InvalidMtu(usize),
    #[error("{len} bytes need more than 65535 fragments at mtu {mtu}")]
    TooManyFragments { len: usize, mtu: usize },
    #[error("invalid fragment: {0}")]
    InvalidFragment(&'static str),
    #[error("control message: {0}")]
    Control(#[from] serde_json::Error),
}
