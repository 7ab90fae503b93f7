//! Virtual radio endpoint: hardware clock, TX and RX streams with radio
//! timing semantics, and the client side of the engine protocol.

pub mod clock;
mod config;
pub mod endpoint;
pub mod format;
pub mod rx;
pub mod sink;
pub mod timed_buffer;
pub mod tx;

pub use clock::{host_now_ns, ns_to_samples, samples_to_ns, VirtualClock};
pub use config::{Direction, EndpointConfig, StreamConfig, MAX_SAMPLE_RATE};
pub use endpoint::{ControlClient, Endpoint};
pub use format::{format_convert, Ci16, CpuSample};
pub use rx::{RxIngest, RxStats, RxStatus, RxStream};
pub use sink::{enlarge_buffers, CaptureSink, ChannelSink, FrameSink, UdpFrameSink, SOCKET_BUFFER};
pub use timed_buffer::{InsertOutcome, TimedBuffer};
pub use tx::{Schedule, TxOutcome, TxStats, TxStream};

use crate::wire::{ErrorCode, SampleFormat, WireError};

#[derive(Debug, thiserror::Error)]
pub enum VradioError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("stream is closed")]
    Closed,
    #[error("stream uses {expected:?} samples, got {got:?}")]
    FormatMismatch {
        expected: SampleFormat,
        got: SampleFormat,
    },
    #[error("buffer of {len} samples is not a whole number of {channels}-channel samples")]
    BadLength { len: usize, channels: usize },
    #[error("cannot receive at {requested} ns, stream already read up to {cursor} ns")]
    Rewind { requested: i64, cursor: i64 },
    #[error("send failed: {0}")]
    Send(std::io::Error),
    #[error("engine error ({code:?}): {text}")]
    Engine { code: ErrorCode, text: String },
    #[error("protocol: {0}")]
    Protocol(String),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
