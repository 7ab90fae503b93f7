use std::f64::consts::PI;

use num_complex::Complex32;

use super::PropagationError;

pub const MAX_FACTOR: u64 = 1024;
const TAPS_PER_PHASE: usize = 64;
const KAISER_BETA: f64 = 8.0;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Reduces `rate_out / rate_in` to `(P, Q)`. Rates are compared at milli-Hz
/// resolution.
pub fn rational_ratio(rate_in: f64, rate_out: f64) -> Result<(u64, u64), PropagationError> {
    let err = PropagationError::UnsupportedRatio {
        rate_in,
        rate_out,
        max: MAX_FACTOR,
    };
    let milli = |r: f64| {
        let m = (r * 1e3).round();
        (r > 0.0 && m >= 1.0 && m < 9e15 && (r * 1e3 - m).abs() < 1e-3).then_some(m as u64)
    };
    let (Some(a), Some(b)) = (milli(rate_in), milli(rate_out)) else {
        return Err(err);
    };
    let g = gcd(a, b);
    let (p, q) = (b / g, a / g);
    if p > MAX_FACTOR || q > MAX_FACTOR {
        return Err(err);
    }
    Ok((p, q))
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let y = x * x / 4.0;
    for k in 1..64 {
        term *= y / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc low-pass of `len` taps; `fc` in cycles/sample.
fn design_lowpass(len: usize, fc: f64, gain: f64) -> Vec<f64> {
    let mid = (len - 1) as f64 / 2.0;
    let i0b = bessel_i0(KAISER_BETA);
    (0..len)
        .map(|k| {
            let t = k as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * t).sin() / (PI * t)
            };
            let r = t / mid;
            let w = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0b;
            gain * sinc * w
        })
        .collect()
}

/// Streaming polyphase rational resampler (upsample by P, filter, decimate
/// by Q). A 1/1 ratio is a pass-through.
#[derive(Debug, Clone)]
pub struct Resampler {
    p: usize,
    q: usize,
    /// `phases[phi][k] = h[phi + k P]`
    phases: Vec<Vec<f32>>,
    /// Input history; `buf[0]` is absolute input index `buf_start`.
    buf: Vec<Complex32>,
    buf_start: i64,
    /// Absolute input index of the newest sample feeding the next output.
    next_in: i64,
    phase: usize,
    group_delay_s: f64,
}

impl Resampler {
    pub fn new(rate_in: f64, rate_out: f64) -> Result<Self, PropagationError> {
        let (p, q) = rational_ratio(rate_in, rate_out)?;
        let (p, q) = (p as usize, q as usize);
        if p == 1 && q == 1 {
            return Ok(Resampler {
                p,
                q,
                phases: Vec::new(),
                buf: Vec::new(),
                buf_start: 0,
                next_in: 0,
                phase: 0,
                group_delay_s: 0.0,
            });
        }
        // decimating filters get proportionally longer branches so the
        // transition band stays the same relative to the output rate
        let k = TAPS_PER_PHASE * q.div_ceil(p);
        let len = k * p;
        let fc = 0.5 / p.max(q) as f64;
        let h = design_lowpass(len, fc, p as f64);
        let phases = (0..p)
            .map(|phi| (0..k).map(|j| h[phi + j * p] as f32).collect())
            .collect();
        let history = k - 1;
        Ok(Resampler {
            p,
            q,
            phases,
            buf: vec![Complex32::new(0.0, 0.0); history],
            buf_start: -(history as i64),
            next_in: 0,
            phase: 0,
            group_delay_s: (len - 1) as f64 / 2.0 / (p as f64 * rate_in),
        })
    }

    pub fn ratio(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub fn is_passthrough(&self) -> bool {
        self.p == 1 && self.q == 1
    }

    /// Filter delay in seconds; output sample times should be shifted earlier
    /// by this amount.
    pub fn group_delay_s(&self) -> f64 {
        self.group_delay_s
    }

    /// Resamples one block, appending the produced samples to `out`.
    pub fn process_into(&mut self, x: &[Complex32], out: &mut Vec<Complex32>) {
        if self.is_passthrough() {
            out.extend_from_slice(x);
            return;
        }
        self.buf.extend_from_slice(x);
        let end = self.buf_start + self.buf.len() as i64;
        let k = self.phases[0].len();
        while self.next_in < end {
            let taps = &self.phases[self.phase];
            // newest sample at `next_in`, oldest at `next_in - (K-1)`
            let newest = (self.next_in - self.buf_start) as usize;
            let mut acc = Complex32::new(0.0, 0.0);
            for (q, h) in taps.iter().enumerate().take(k) {
                acc += self.buf[newest - q] * *h;
            }
            out.push(acc);
            self.phase += self.q;
            self.next_in += (self.phase / self.p) as i64;
            self.phase %= self.p;
        }
        // keep only what the next output can still reach
        let keep_from = self.next_in - (k as i64 - 1);
        let drop = (keep_from - self.buf_start).clamp(0, self.buf.len() as i64) as usize;
        self.buf.drain(..drop);
        self.buf_start += drop as i64;
    }

    pub fn process(&mut self, x: &[Complex32]) -> Vec<Complex32> {
        let mut out = Vec::with_capacity(x.len() * self.p / self.q + 1);
        self.process_into(x, &mut out);
        out
    }
}
