use std::f64::consts::TAU;

use num_complex::{Complex32, Complex64};

use super::units::SPEED_OF_LIGHT;

/// Doppler shift in Hz for a radial velocity (positive = receding) at carrier
/// `f`.
pub fn doppler_offset(radial_velocity: f64, f: f64) -> f64 {
    -(radial_velocity / SPEED_OF_LIGHT) * f
}

/// Discrete-time frequency offset in rad/sample.
pub fn omega_for(delta_f: f64, sample_rate: f64) -> f64 {
    TAU * delta_f / sample_rate
}

/// Multiplies `x[n]` by `exp(j(phase + omega n))` in place and returns the
/// phase for the sample after the block, wrapped to `[0, 2pi)`.
pub fn rotate(x: &mut [Complex32], phase: f64, omega: f64) -> f64 {
    if omega == 0.0 && phase == 0.0 {
        return 0.0;
    }
    // exact phasor at each block start, short f32 table inside the block
    const BLOCK: usize = 256;
    let c32 = |z: Complex64| Complex32::new(z.re as f32, z.im as f32);
    let table: Vec<Complex32> = (0..BLOCK.min(x.len()))
        .map(|k| c32(Complex64::from_polar(1.0, omega * k as f64)))
        .collect();
    for (b, chunk) in x.chunks_mut(BLOCK).enumerate() {
        let base = c32(Complex64::from_polar(
            1.0,
            phase + omega * (b * BLOCK) as f64,
        ));
        for (s, t) in chunk.iter_mut().zip(&table) {
            *s *= base * *t;
        }
    }
    (phase + omega * x.len() as f64).rem_euclid(TAU)
}

/// Frequency-offset state carried across frames.
#[derive(Debug, Clone, Default)]
pub struct Rotator {
    omega: f64,
    phase: f64,
}

impl Rotator {
    pub fn new(omega: f64) -> Self {
        Rotator { omega, phase: 0.0 }
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn set_omega(&mut self, omega: f64) {
        self.omega = omega;
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn set_phase(&mut self, phase: f64) {
        self.phase = phase.rem_euclid(TAU);
    }

    /// Skips `n` samples without output (a gap in the stream).
    pub fn advance(&mut self, n: i64) {
        self.phase = (self.phase + self.omega * n as f64).rem_euclid(TAU);
    }

    pub fn process(&mut self, x: &mut [Complex32]) {
        self.phase = rotate(x, self.phase, self.omega);
    }
}
