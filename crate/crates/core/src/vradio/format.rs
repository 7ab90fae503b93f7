//! CPU <-> over-the-wire sample conversion.

use num_complex::Complex;

use crate::wire::SampleFormat;
use crate::Cf32;

pub type Ci16 = Complex<i16>;

const FULL_SCALE: f32 = 32767.0;

fn quantize(x: f32) -> i16 {
    if x.is_nan() {
        return 0;
    }
    // f32::round is half-away-from-zero
    (x.clamp(-1.0, 1.0) * FULL_SCALE).round() as i16
}

pub fn cf32_to_sc16(s: Cf32) -> Ci16 {
    Ci16::new(quantize(s.re), quantize(s.im))
}

pub fn sc16_to_cf32(s: Ci16) -> Cf32 {
    Cf32::new(s.re as f32 / FULL_SCALE, s.im as f32 / FULL_SCALE)
}

/// Sample types an application may hand to or take from a stream.
pub trait CpuSample: Copy + Send + 'static {
    const FORMAT: SampleFormat;
    fn to_cf32(self) -> Cf32;
    fn from_cf32(s: Cf32) -> Self;
}

impl CpuSample for Cf32 {
    const FORMAT: SampleFormat = SampleFormat::Cf32;
    fn to_cf32(self) -> Cf32 {
        self
    }
    fn from_cf32(s: Cf32) -> Self {
        s
    }
}

impl CpuSample for Ci16 {
    const FORMAT: SampleFormat = SampleFormat::Ci16;
    fn to_cf32(self) -> Cf32 {
        sc16_to_cf32(self)
    }
    fn from_cf32(s: Cf32) -> Self {
        cf32_to_sc16(s)
    }
}

/// Converts a buffer between sample types, e.g. `format_convert::<Cf32, Ci16>`.
pub fn format_convert<A: CpuSample, B: CpuSample>(samples: &[A]) -> Vec<B> {
    samples.iter().map(|s| B::from_cf32(s.to_cf32())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn full_scale_and_zero() {
        assert_eq!(cf32_to_sc16(Cf32::new(1.0, 0.0)), Ci16::new(32767, 0));
        assert_eq!(cf32_to_sc16(Cf32::new(0.0, 0.0)), Ci16::new(0, 0));
        assert_eq!(cf32_to_sc16(Cf32::new(-1.0, 0.5)), Ci16::new(-32767, 16384));
    }

    #[test]
    fn out_of_range_clamps() {
        assert_eq!(cf32_to_sc16(Cf32::new(3.0, -7.0)), Ci16::new(32767, -32767));
        assert_eq!(cf32_to_sc16(Cf32::new(f32::NAN, 0.0)), Ci16::new(0, 0));
    }

    #[test]
    fn rounds_half_away_from_zero() {
        let half = 0.5 / FULL_SCALE;
        assert_eq!(quantize(half), 1);
        assert_eq!(quantize(-half), -1);
    }

    #[test]
    fn round_trip_error_is_within_one_lsb() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let x: Vec<Cf32> = (0..1024)
            .map(|_| Cf32::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)))
            .collect();
        let q: Vec<Ci16> = format_convert(&x);
        let back: Vec<Cf32> = format_convert(&q);
        let bound = 1.0 / FULL_SCALE;
        for (a, b) in x.iter().zip(&back) {
            assert!((a.re - b.re).abs() <= bound && (a.im - b.im).abs() <= bound);
        }
    }
}
