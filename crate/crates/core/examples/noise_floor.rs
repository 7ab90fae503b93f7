//! Receiver thermal noise: k T B NF for a few bandwidths, and the power a
//! noise source actually delivers.

use iqtwin::propagation::{power_to_db, thermal_noise_power, NoiseSource};
use iqtwin::Cf32;

fn main() {
    let nf = 7.0;
    println!(
        "{:>10} {:>12} {:>14}",
        "B (MHz)", "floor dBm", "measured dBm"
    );
    for b in [1.92e6, 11.52e6, 23.04e6, 46.08e6] {
        // full scale 0 dBm: one unit of sample power is 1 mW
        let p = thermal_noise_power(b, nf, 0.0);
        let mut src = NoiseSource::new(p, 42);
        let mut x = vec![Cf32::default(); 200_000];
        src.fill(&mut x);
        let got = x.iter().map(|s| s.norm_sqr() as f64).sum::<f64>() / x.len() as f64;
        println!(
            "{:>10.2} {:>12.2} {:>14.2}",
            b / 1e6,
            power_to_db(p),
            power_to_db(got)
        );
    }
}
