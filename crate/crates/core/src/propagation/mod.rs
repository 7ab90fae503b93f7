//! Channel models and the DSP kernels of the per-link pipeline.

pub mod antenna;
pub mod cir;
pub mod noise;
pub mod pathloss;
pub mod resample;
pub mod rotator;
pub mod units;

pub use antenna::AntennaPattern;
pub use cir::{load_taps_csv, Cir};
pub use noise::{thermal_noise_power, NoiseSource};
pub use pathloss::{free_space_loss, two_ray_loss, PathLossModel};
pub use resample::Resampler;
pub use rotator::{doppler_offset, omega_for, Rotator};
pub use units::{amp_to_db, db_to_amp, db_to_power, power_to_db, SPEED_OF_LIGHT};

#[derive(Debug, thiserror::Error)]
pub enum PropagationError {
    #[error("distance must be positive, got {0} m")]
    BadDistance(f64),
    #[error("frequency must be positive, got {0} Hz")]
    BadFrequency(f64),
    #[error("antenna heights must be positive, got {0} m and {1} m")]
    BadHeights(f64, f64),
    #[error("path loss table needs at least one point with positive distance")]
    EmptyTable,
    #[error("cir needs at least one tap")]
    NoTaps,
    #[error("rate ratio {rate_in}/{rate_out} does not reduce to P/Q with P, Q <= {max}")]
    UnsupportedRatio {
        rate_in: f64,
        rate_out: f64,
        max: u64,
    },
    #[error("antenna pattern: {0}")]
    Pattern(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
