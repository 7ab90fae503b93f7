//! Fixed base station and a node driving away from it, FDD at 3410/3320 MHz
//! with the two-ray model. Prints received power once per second and writes
//! it to a CSV file.
//!
//!     cargo run --release --example two_node_demo -- --duration 60 --out power.csv

use std::time::Duration;

use clap::Parser;
use iqtwin::demo::{run_demo, write_csv, DemoConfig};

#[derive(Parser)]
struct Args {
    /// Seconds.
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    #[arg(long, default_value = "power.csv")]
    out: String,
    #[arg(long)]
    noise: bool,
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    iqtwin::init_logging("warn");
    let args = Args::parse();
    let cfg = DemoConfig {
        duration: Duration::from_secs_f64(args.duration),
        noise: args.noise,
        ..Default::default()
    };
    println!(
        "{:>6} {:>9} {:>10} {:>10} {:>10} {:>10}",
        "t_s", "dist_m", "dl_dbm", "dl_model", "ul_dbm", "ul_model"
    );
    let result = run_demo(&cfg, |s| {
        println!(
            "{:>6.1} {:>9.1} {:>10.2} {:>10.2} {:>10.2} {:>10.2}",
            s.t_s,
            s.distance_m,
            s.downlink_dbm,
            s.downlink_model_dbm,
            s.uplink_dbm,
            s.uplink_model_dbm
        );
    })?;
    write_csv(&result.samples, std::fs::File::create(&args.out)?)?;
    println!(
        "drops: {} (engine {:?})",
        result.total_drops(),
        result.counters
    );
    println!("wrote {}", args.out);
    Ok(())
}
