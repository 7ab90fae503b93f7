//! Standalone channel engine.
//!
//! ```text
//! cargo run --release --example engine_server -- --config engine.json --log-level info
//! ```
//!
//! Without `--config` the engine listens on 127.0.0.1:5600 with default
//! models. Stop it with Ctrl-C.

use std::path::PathBuf;

use clap::Parser;
use iqtwin::engine::{Engine, EngineConfig};

#[derive(Parser)]
struct Args {
    /// Engine configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "info")]
    log_level: String,
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args = Args::parse();
    iqtwin::init_logging(&args.log_level);
    let config = match &args.config {
        Some(p) => EngineConfig::load(p)?,
        None => EngineConfig::default(),
    };
    let engine = Engine::start(config)?;
    println!("control plane on {}", engine.control_addr());
    engine.wait();
    Ok(())
}
