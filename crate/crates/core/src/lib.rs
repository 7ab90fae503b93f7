//! Real-time I/Q-level channel and radio emulation.
//!
//! Virtual radio endpoints ([`vradio`]) stream timestamped baseband frames
//! ([`wire`]) over UDP to a channel engine ([`engine`]), which applies
//! per-link propagation effects ([`propagation`]) driven by node geometry
//! ([`mobility`]) and forwards the result to every receiver tuned to the same
//! center frequency. Receivers superpose what arrives in a time-keyed buffer
//! and hand samples to the application with radio timing semantics.
//!
//! [`bench`] reproduces the endpoint and engine latency benchmarks and
//! [`demo`] holds the scripted two-node scenario.
//!
//! See `examples/` for one runnable program per capability.

pub mod bench;
pub mod demo;
pub mod engine;
pub mod mobility;
pub mod propagation;
pub mod vradio;
pub mod wire;

/// Complex float32 baseband sample, the in-memory (CPU) representation.
pub type Cf32 = num_complex::Complex32;

/// Installs the global logger, reading the filter from `IQTWIN_LOG`.
///
/// `default` is used when the variable is unset. Calling it twice is harmless.
pub fn init_logging(default: &str) {
    let env = env_logger::Env::new().filter_or("IQTWIN_LOG", default);
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp_micros()
        .try_init();
}
