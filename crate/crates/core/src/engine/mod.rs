//! The channel engine: node registry, channel grouping by center frequency,
//! and the per-link processing pipeline.

mod config;
mod coordinator;
mod link;
mod pipeline;
mod service;
mod view;

pub use config::{EngineConfig, NodeProfile, NoisePlacement};
pub use coordinator::{channel_key, ChannelKey, Coordinator, GlobalCounters, Node, NodePorts};
pub use link::{compute_link, LinkParams};
pub use pipeline::{ChannelPipeline, IngestItem, KernelTimes, OutFrame, ProcessOutcome};
pub use service::Engine;
pub use view::{
    ChannelParams, ChannelView, CounterMap, LinkCounters, LinkKey, LinkOverride, NodeMobility,
    NodeView, RxEntry, TxEntry,
};

use thiserror::Error;

use crate::wire::{ErrorCode, WireError};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("configuration: {0}")]
    Config(String),
    /// A control request that the engine refuses; becomes an `error` reply.
    #[error("{code:?}: {text}")]
    Request { code: ErrorCode, text: String },
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
