//! Free-space and two-ray ground reflection loss against distance.
//!
//! ```text
//! cargo run --example path_loss -- --freq 3.41e9 --tx-height 6 --rx-height 1.5
//! ```

use clap::Parser;
use iqtwin::propagation::{free_space_loss, PathLossModel};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 3.41e9)]
    freq: f64,
    #[arg(long, default_value_t = 6.0)]
    tx_height: f64,
    #[arg(long, default_value_t = 1.5)]
    rx_height: f64,
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = Args::parse();
    let two_ray = PathLossModel::two_ray();
    // the breakpoint past which two-ray falls off as 40 log d
    let crossover = 4.0 * std::f64::consts::PI * a.tx_height * a.rx_height * a.freq
        / iqtwin::propagation::SPEED_OF_LIGHT;
    println!(
        "f = {:.3} GHz, heights {} m / {} m, crossover {:.0} m",
        a.freq / 1e9,
        a.tx_height,
        a.rx_height,
        crossover
    );
    println!("{:>8} {:>10} {:>10}", "d (m)", "FSPL dB", "2-ray dB");
    for d in [
        1.0, 10.0, 50.0, 100.0, 250.0, 500.0, 1000.0, 2000.0, 5000.0, 10_000.0,
    ] {
        let fs = free_space_loss(d, a.freq)?;
        let tr = two_ray.loss_db(d, a.freq, (a.tx_height, a.rx_height))?;
        println!("{d:>8.0} {fs:>10.2} {tr:>10.2}");
    }
    Ok(())
}
