pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Amplitude factor for a gain of `db` decibels.
pub fn db_to_amp(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

pub fn amp_to_db(a: f64) -> f64 {
    20.0 * a.log10()
}

pub fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn power_to_db(p: f64) -> f64 {
    10.0 * p.log10()
}
