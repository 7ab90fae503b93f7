//! Signal frames on the wire: encode, fragment to datagrams, shuffle, lose
//! one fragment of one frame, reassemble.

use std::time::Instant;

use iqtwin::wire::{
    Fragmenter, Reassembly, ReassemblyConfig, ReassemblyTable, SampleFormat, SignalFrame,
};
use iqtwin::Cf32;
use rand::seq::SliceRandom;
use rand::SeedableRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<Cf32> = (0..1920)
        .map(|i| Cf32::from_polar(0.8, i as f32 * 0.1))
        .collect();

    for fmt in [SampleFormat::Cf32, SampleFormat::Ci16] {
        let mut f = SignalFrame::from_samples(fmt, 1, &samples)?;
        f.stream_id = 7;
        f.emulated_tx_time = 1_000_000;
        let bytes = f.encode()?;
        let back = SignalFrame::decode(&bytes)?;
        let err = samples
            .iter()
            .zip(back.samples())
            .map(|(a, b)| (a - b).norm())
            .fold(0f32, f32::max);
        println!(
            "{fmt:?}: {} bytes, header {:02x?}, max error {err:.1e}",
            bytes.len(),
            &bytes[..8]
        );
    }

    let mut frag = Fragmenter::new(1500)?;
    let mut datagrams = Vec::new();
    for k in 0..4 {
        let mut f = SignalFrame::from_samples(SampleFormat::Cf32, 1, &samples)?;
        f.emulated_tx_time = k * 1_000_000;
        datagrams.extend(frag.datagrams(&f)?);
    }
    let sent = datagrams.len();
    datagrams.shuffle(&mut rng);
    // lose one fragment: the frame it belongs to is dropped whole
    datagrams.pop();

    let mut table = ReassemblyTable::new(ReassemblyConfig::default());
    let mut frames = Vec::new();
    for d in &datagrams {
        if let Reassembly::Complete(f) = table.push_datagram(d, Instant::now()) {
            frames.push(f.emulated_tx_time);
        }
    }
    table.expire(Instant::now() + std::time::Duration::from_secs(10));
    frames.sort();
    println!(
        "{sent} datagrams sent, {} delivered; frames rebuilt at {frames:?}",
        datagrams.len()
    );
    println!("{:?}", table.stats());
    Ok(())
}
