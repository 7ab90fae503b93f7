//! Superposition in the receive buffer.
//!
//! Two sources write overlapping frames at arbitrary sample positions. The
//! drained window is their sum, empty stretches read as zero, and a frame
//! that ends before the read cursor is rejected as late.

use iqtwin::vradio::{InsertOutcome, TimedBuffer};
use iqtwin::Cf32;

fn main() {
    let mut buf = TimedBuffer::new(1, 10_000);

    let one = |n| vec![Cf32::new(1.0, 0.0); n];
    let j = |n| vec![Cf32::new(0.0, 0.5); n];
    buf.insert(100, 1, one(8));
    buf.insert(104, 2, j(8));
    buf.insert(96, 2, j(2));

    let mut out = vec![Cf32::default(); 20];
    buf.drain(95, &mut out).expect("cursor starts unset");
    for (i, s) in out.iter().enumerate() {
        println!("{:>4}  {:+.2} {:+.2}j", 95 + i, s.re, s.im);
    }

    let late = buf.insert(90, 1, one(4));
    assert_eq!(late, InsertOutcome::Late);
    println!("frame ending at 94 after draining to 115: {late:?}");

    // rewinding the read position is refused
    let mut w = vec![Cf32::default(); 4];
    println!("drain at 100 again: {:?}", buf.drain(100, &mut w));
    println!("{:?}", buf.stats());
}
