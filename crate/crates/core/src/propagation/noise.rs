use num_complex::Complex32;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const BOLTZMANN: f64 = 1.380_649e-23;
const DEFAULT_POOL: usize = 1 << 18;

/// Thermal noise power `k T B * NF` at 290 K, expressed relative to a
/// full-scale sample power of `full_scale_dbm`.
pub fn thermal_noise_power(bandwidth_hz: f64, noise_figure_db: f64, full_scale_dbm: f64) -> f64 {
    let dbm = 10.0 * (BOLTZMANN * 290.0 * bandwidth_hz * 1e3).log10() + noise_figure_db;
    10f64.powf((dbm - full_scale_dbm) / 10.0)
}

/// Complex Gaussian noise served from a pre-generated pool.
///
/// The pool is normalized to zero mean and a per-component variance of
/// exactly 1/2. Each request reads a contiguous run starting at a random
/// offset.
pub struct NoiseSource {
    power: f64,
    scale: f32,
    pool: Vec<Complex32>,
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(power: f64, seed: u64) -> Self {
        Self::with_pool_size(power, seed, DEFAULT_POOL)
    }

    pub fn with_pool_size(power: f64, seed: u64, pool_size: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = pool_size.max(2);
        let mut re: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut im: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        normalize(&mut re);
        normalize(&mut im);
        let pool = re
            .iter()
            .zip(&im)
            .map(|(a, b)| Complex32::new(*a as f32, *b as f32))
            .collect();
        let mut src = NoiseSource {
            power: 0.0,
            scale: 0.0,
            pool,
            rng,
        };
        src.set_power(power);
        src
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn set_power(&mut self, power: f64) {
        self.power = power.max(0.0);
        self.scale = self.power.sqrt() as f32;
    }

    /// Adds noise to every sample of `x`.
    pub fn add_to(&mut self, x: &mut [Complex32]) {
        if self.power == 0.0 {
            return;
        }
        self.each(x, |d, w| *d += w);
    }

    /// Overwrites `x` with noise.
    pub fn fill(&mut self, x: &mut [Complex32]) {
        if self.power == 0.0 {
            x.iter_mut().for_each(|s| *s = Complex32::new(0.0, 0.0));
            return;
        }
        self.each(x, |d, w| *d = w);
    }

    pub fn samples(&mut self, n: usize) -> Vec<Complex32> {
        let mut v = vec![Complex32::new(0.0, 0.0); n];
        self.fill(&mut v);
        v
    }

    /// Walks `x` in runs read from random pool offsets. Each run is also
    /// mapped through a random symmetry of the complex plane (quarter turn,
    /// optional conjugate), which keeps the statistics exact.
    fn each(&mut self, x: &mut [Complex32], op: impl Fn(&mut Complex32, Complex32)) {
        let len = self.pool.len();
        let mut rest = x;
        let mut start = self.rng.random_range(0..len);
        while !rest.is_empty() {
            let take = rest.len().min(len - start);
            let (head, tail) = rest.split_at_mut(take);
            let src = &self.pool[start..start + take];
            let sym: u8 = self.rng.random_range(0..8);
            let s = self.scale;
            let r = match sym & 3 {
                0 => Complex32::new(s, 0.0),
                1 => Complex32::new(0.0, s),
                2 => Complex32::new(-s, 0.0),
                _ => Complex32::new(0.0, -s),
            };
            if sym & 4 == 0 {
                head.iter_mut().zip(src).for_each(|(d, w)| op(d, w * r));
            } else {
                head.iter_mut()
                    .zip(src)
                    .for_each(|(d, w)| op(d, w.conj() * r));
            }
            rest = tail;
            start = 0;
        }
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter_mut().for_each(|x| *x -= mean);
    let var = v.iter().map(|x| x * x).sum::<f64>() / n;
    let k = (0.5 / var).sqrt();
    v.iter_mut().for_each(|x| *x *= k);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_power_gives_exact_zeros() {
        let mut src = NoiseSource::with_pool_size(0.0, 1, 1024);
        assert!(src
            .samples(500)
            .iter()
            .all(|s| *s == Complex32::new(0.0, 0.0)));
        let mut x = vec![Complex32::new(0.5, 0.5); 10];
        src.add_to(&mut x);
        assert!(x.iter().all(|s| *s == Complex32::new(0.5, 0.5)));
    }

    #[test]
    fn variance_of_a_million_samples() {
        let mut src = NoiseSource::new(1.0, 42);
        let x = src.samples(1_000_000);
        let n = x.len() as f64;
        let mean_re = x.iter().map(|s| s.re as f64).sum::<f64>() / n;
        let var = x.iter().map(|s| (s.norm_sqr()) as f64).sum::<f64>() / n;
        let var_re = x.iter().map(|s| (s.re as f64).powi(2)).sum::<f64>() / n;
        assert!((0.99..=1.01).contains(&var), "{var}");
        assert!((var_re - 0.5).abs() < 0.01, "{var_re}");
        assert!(mean_re.abs() < 0.01);
    }

    #[test]
    fn power_scales_variance() {
        let mut src = NoiseSource::with_pool_size(4.0, 7, 1 << 14);
        let x = src.samples(1 << 14);
        let var = x.iter().map(|s| s.norm_sqr() as f64).sum::<f64>() / x.len() as f64;
        assert!((var - 4.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn seeded_sources_repeat() {
        let a = NoiseSource::with_pool_size(1.0, 5, 4096).samples(10_000);
        let b = NoiseSource::with_pool_size(1.0, 5, 4096).samples(10_000);
        assert_eq!(a, b);
        let c = NoiseSource::with_pool_size(1.0, 6, 4096).samples(10_000);
        assert_ne!(a, c);
    }

    #[test]
    fn thermal_floor_reference() {
        // -174 dBm/Hz at 290 K
        let p = thermal_noise_power(1.0, 0.0, 0.0);
        assert!((10.0 * p.log10() + 173.98).abs() < 0.01);
        let p = thermal_noise_power(1e6, 7.0, -30.0);
        assert!((10.0 * p.log10() - (-173.98 + 60.0 + 7.0 + 30.0)).abs() < 0.01);
    }
}
