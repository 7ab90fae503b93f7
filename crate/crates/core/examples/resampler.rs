//! Rational resampling between the sample rates of two radios.
//!
//! A tone at 30.72 MS/s is converted to 23.04 MS/s and 1.92 MS/s. The tone
//! keeps its frequency and amplitude; the filter delay is reported so the
//! caller can correct timestamps.

use iqtwin::propagation::{power_to_db, Resampler};
use iqtwin::Cf32;

fn tone(fs: f64, f: f64, n: usize) -> Vec<Cf32> {
    (0..n)
        .map(|i| Cf32::from_polar(1.0, (2.0 * std::f64::consts::PI * f * i as f64 / fs) as f32))
        .collect()
}

/// Frequency estimate from the mean phase step.
fn freq_of(x: &[Cf32], fs: f64) -> f64 {
    let acc: num_complex::Complex64 = x
        .windows(2)
        .map(|w| {
            let p = w[1] * w[0].conj();
            num_complex::Complex64::new(p.re as f64, p.im as f64)
        })
        .sum();
    acc.arg() * fs / (2.0 * std::f64::consts::PI)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fs_in = 30.72e6;
    let f = 250e3;
    let x = tone(fs_in, f, 30_720);
    for fs_out in [23.04e6, 1.92e6, 30.72e6] {
        let mut r = Resampler::new(fs_in, fs_out)?;
        // stream in uneven chunks; the state carries across calls
        let mut y = Vec::new();
        for chunk in x.chunks(4099) {
            y.extend(r.process(chunk));
        }
        let settle = (y.len() / 10).max(1);
        let body = &y[settle..y.len() - settle];
        let p = body.iter().map(|s| s.norm_sqr() as f64).sum::<f64>() / body.len() as f64;
        let (up, down) = r.ratio();
        println!(
            "{:>6.2} -> {:>6.2} MS/s  L/M = {up}/{down}  out {} samples  tone {:.1} Hz  power {:+.3} dB  delay {:.2} us",
            fs_in / 1e6,
            fs_out / 1e6,
            y.len(),
            freq_of(body, fs_out),
            power_to_db(p),
            r.group_delay_s() * 1e6
        );
    }
    Ok(())
}
