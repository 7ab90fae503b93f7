use std::path::Path;

use num_complex::Complex32;

use super::PropagationError;

/// Streaming FIR over complex taps. The last `L - 1` inputs are carried across
/// calls so consecutive frames convolve as one signal.
#[derive(Debug, Clone)]
pub struct Cir {
    taps: Vec<Complex32>,
    history: Vec<Complex32>,
}

impl Cir {
    pub fn new(taps: Vec<Complex32>) -> Result<Self, PropagationError> {
        if taps.is_empty() {
            return Err(PropagationError::NoTaps);
        }
        let history = vec![Complex32::new(0.0, 0.0); taps.len() - 1];
        Ok(Cir { taps, history })
    }

    pub fn identity() -> Self {
        Cir {
            taps: vec![Complex32::new(1.0, 0.0)],
            history: Vec::new(),
        }
    }

    pub fn taps(&self) -> &[Complex32] {
        &self.taps
    }

    pub fn is_identity(&self) -> bool {
        self.taps.len() == 1 && self.taps[0] == Complex32::new(1.0, 0.0)
    }

    /// Replaces the taps, keeping as much history as the new length needs.
    pub fn set_taps(&mut self, taps: Vec<Complex32>) -> Result<(), PropagationError> {
        if taps.is_empty() {
            return Err(PropagationError::NoTaps);
        }
        let want = taps.len() - 1;
        let have = self.history.len();
        if want <= have {
            self.history.drain(..have - want);
        } else {
            let mut h = vec![Complex32::new(0.0, 0.0); want - have];
            h.extend_from_slice(&self.history);
            self.history = h;
        }
        self.taps = taps;
        Ok(())
    }

    pub fn reset(&mut self) {
        self.history
            .iter_mut()
            .for_each(|h| *h = Complex32::new(0.0, 0.0));
    }

    /// `y[n] = sum_l h[l] x[n - l]` in place.
    pub fn process(&mut self, x: &mut [Complex32]) {
        let l = self.taps.len();
        if l == 1 {
            let h = self.taps[0];
            if h != Complex32::new(1.0, 0.0) {
                x.iter_mut().for_each(|s| *s *= h);
            }
            return;
        }
        let m = l - 1;
        let mut ext = Vec::with_capacity(m + x.len());
        ext.extend_from_slice(&self.history);
        ext.extend_from_slice(x);
        for (n, out) in x.iter_mut().enumerate() {
            // ext[n + m] is x[n]
            let mut acc = Complex32::new(0.0, 0.0);
            for (k, h) in self.taps.iter().enumerate() {
                acc += *h * ext[n + m - k];
            }
            *out = acc;
        }
        self.history.copy_from_slice(&ext[ext.len() - m..]);
    }
}

/// Reads `tap_index,re,im` rows (header optional). Missing indices are zero.
pub fn load_taps_csv(path: impl AsRef<Path>) -> Result<Vec<Complex32>, PropagationError> {
    parse_taps_csv(&std::fs::read_to_string(path)?)
}

pub fn parse_taps_csv(text: &str) -> Result<Vec<Complex32>, PropagationError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut taps: Vec<Complex32> = Vec::new();
    let mut seen_data = false;
    for rec in rdr.records() {
        let rec = rec?;
        let fields: Vec<&str> = rec.iter().collect();
        let parsed = match fields.as_slice() {
            [i, re, im] => i
                .parse::<usize>()
                .ok()
                .zip(re.parse::<f32>().ok())
                .zip(im.parse::<f32>().ok()),
            _ => None,
        };
        let Some(((i, re), im)) = parsed else {
            if !seen_data {
                continue;
            }
            return Err(PropagationError::Pattern(format!(
                "bad tap row {:?}",
                fields
            )));
        };
        seen_data = true;
        if i >= taps.len() {
            taps.resize(i + 1, Complex32::new(0.0, 0.0));
        }
        taps[i] = Complex32::new(re, im);
    }
    if taps.is_empty() {
        return Err(PropagationError::NoTaps);
    }
    Ok(taps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn c(re: f32, im: f32) -> Complex32 {
        Complex32::new(re, im)
    }

    fn random(n: usize, seed: u64) -> Vec<Complex32> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn direct(x: &[Complex32], h: &[Complex32]) -> Vec<Complex32> {
        (0..x.len())
            .map(|n| {
                let mut acc = num_complex::Complex64::new(0.0, 0.0);
                for (l, hl) in h.iter().enumerate() {
                    if n >= l {
                        let p = *hl * x[n - l];
                        acc += num_complex::Complex64::new(p.re as f64, p.im as f64);
                    }
                }
                c(acc.re as f32, acc.im as f32)
            })
            .collect()
    }

    #[test]
    fn single_unit_tap_is_identity() {
        let mut x = random(64, 1);
        let y0 = x.clone();
        Cir::identity().process(&mut x);
        assert_eq!(x, y0);
    }

    #[test]
    fn unit_delay_carries_tail() {
        let (a, b, cc) = (c(1.0, 0.0), c(2.0, 1.0), c(3.0, -1.0));
        let mut cir = Cir::new(vec![c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let mut x = vec![a, b, cc];
        cir.process(&mut x);
        assert_eq!(x, vec![c(0.0, 0.0), a, b]);
        let mut next = vec![c(9.0, 9.0)];
        cir.process(&mut next);
        assert_eq!(next, vec![cc]);
    }

    #[test]
    fn matches_direct_convolution() {
        let x = random(1024, 2);
        let h = random(4, 3);
        let mut y = x.clone();
        Cir::new(h.clone()).unwrap().process(&mut y);
        let want = direct(&x, &h);
        let err = y
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f32, f32::max);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn streaming_equals_batch() {
        let x = random(2048, 4);
        let h = random(4, 5);
        let mut batch = x.clone();
        Cir::new(h.clone()).unwrap().process(&mut batch);
        let mut cir = Cir::new(h).unwrap();
        let (mut a, mut b) = (x[..1024].to_vec(), x[1024..].to_vec());
        cir.process(&mut a);
        cir.process(&mut b);
        a.extend(b);
        for (p, q) in a.iter().zip(&batch) {
            assert!((p - q).norm() <= 1e-6 * (1.0 + q.norm()));
        }
    }

    #[test]
    fn parses_tap_files() {
        let taps = parse_taps_csv("tap_index,re,im\n0,1.0,0\n2,0.5,-0.5\n").unwrap();
        assert_eq!(taps, vec![c(1.0, 0.0), c(0.0, 0.0), c(0.5, -0.5)]);
        assert!(parse_taps_csv("tap_index,re,im\n").is_err());
    }

    proptest! {
        #[test]
        fn convolution_is_linear(seed in any::<u64>(), alpha in -4.0f32..4.0) {
            let x = random(256, seed);
            let h = random(3, seed ^ 1);
            let mut y = x.clone();
            Cir::new(h.clone()).unwrap().process(&mut y);
            let mut ys: Vec<_> = x.iter().map(|s| s * alpha).collect();
            Cir::new(h).unwrap().process(&mut ys);
            for (a, b) in ys.iter().zip(&y) {
                let want = b * alpha;
                prop_assert!((a - want).norm() <= 1e-6 * (1.0 + want.norm()) * 4.0);
            }
        }
    }
}
