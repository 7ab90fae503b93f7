//! Numerical kernels against direct evaluations.

use std::f64::consts::{PI, TAU};

use iqtwin::propagation::{
    doppler_offset, free_space_loss, two_ray_loss, Cir, NoiseSource, Resampler, Rotator,
    SPEED_OF_LIGHT,
};
use iqtwin::Cf32;
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{all, ensure, prop, Check};

fn c64(x: Cf32) -> Complex64 {
    Complex64::new(x.re as f64, x.im as f64)
}

fn random_signal(seed: u64, n: usize) -> Vec<Cf32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Cf32::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn split_points(seed: u64, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut cuts: Vec<usize> = (0..rng.random_range(1..8))
        .map(|_| rng.random_range(0..=n))
        .collect();
    cuts.push(0);
    cuts.push(n);
    cuts.sort();
    cuts
}

fn close(a: &[Cf32], b: &[Cf32], tol: f32) -> Result<(), TestCaseError> {
    prop_assert_eq!(a.len(), b.len());
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        prop_assert!(
            (x - y).norm() <= tol * (1.0 + y.norm()),
            "sample {}: {} vs {}",
            i,
            x,
            y
        );
    }
    Ok(())
}

/// Any chunking of the input gives the same output as one call, for the
/// convolution, the rotator and the resampler.
pub fn streaming_equals_batch((seed, n, ratio): (u64, usize, usize)) -> Result<(), TestCaseError> {
    let x = random_signal(seed, n);
    let cuts = split_points(seed, n);
    let taps = random_signal(seed + 1, 1 + (seed % 6) as usize);

    let mut a = x.clone();
    Cir::new(taps.clone()).unwrap().process(&mut a);
    let mut cir = Cir::new(taps).unwrap();
    let mut b = x.clone();
    for w in cuts.windows(2) {
        cir.process(&mut b[w[0]..w[1]]);
    }
    close(&b, &a, 1e-6)?;

    let omega = (seed % 200) as f64 * 1e-3 - 0.1;
    let mut a = x.clone();
    Rotator::new(omega).process(&mut a);
    let mut rot = Rotator::new(omega);
    let mut b = x.clone();
    for w in cuts.windows(2) {
        rot.process(&mut b[w[0]..w[1]]);
    }
    close(&b, &a, 1e-6)?;

    let rates = [
        (1.92e6, 3.84e6),
        (30.72e6, 23.04e6),
        (11.52e6, 1.92e6),
        (1e6, 1.5e6),
    ];
    let (fi, fo) = rates[ratio];
    let a = Resampler::new(fi, fo).unwrap().process(&x);
    let mut rs = Resampler::new(fi, fo).unwrap();
    let mut b = Vec::new();
    for w in cuts.windows(2) {
        b.extend(rs.process(&x[w[0]..w[1]]));
    }
    close(&b, &a, 1e-6)
}

/// The tap-delay line equals the textbook convolution sum.
pub fn cir_matches_direct_convolution(
    (seed, n, l): (u64, usize, usize),
) -> Result<(), TestCaseError> {
    let x = random_signal(seed, n);
    let h = random_signal(seed + 7, l);
    let mut y = x.clone();
    Cir::new(h.clone()).unwrap().process(&mut y);
    for (i, got) in y.iter().enumerate() {
        let mut want = Complex64::new(0.0, 0.0);
        for (k, hk) in h.iter().enumerate() {
            if i >= k {
                want += c64(*hk) * c64(x[i - k]);
            }
        }
        prop_assert!(
            (c64(*got) - want).norm() < 1e-5,
            "sample {}: {} vs {}",
            i,
            got,
            want
        );
    }
    Ok(())
}

fn tone(f: f64, fs: f64, n: usize) -> Vec<Cf32> {
    (0..n)
        .map(|i| {
            let p = TAU * f * i as f64 / fs;
            Cf32::new(p.cos() as f32, p.sin() as f32)
        })
        .collect()
}

/// Amplitude at frequency `f` by direct correlation.
fn level(x: &[Cf32], f: f64, fs: f64) -> f64 {
    let acc: Complex64 = x
        .iter()
        .enumerate()
        .map(|(i, s)| c64(*s) * Complex64::from_polar(1.0, -TAU * f * i as f64 / fs))
        .sum();
    acc.norm() / x.len() as f64
}

/// Passband tones keep their level within 0.1 dB; images of an
/// interpolation sit more than 60 dB down.
pub fn resampler_tones() -> Check {
    let mut worst_ripple = 0f64;
    let mut worst_image = f64::INFINITY;
    for (fi, fo) in [
        (11.52e6f64, 23.04e6),
        (1.92e6, 7.68e6),
        (23.04e6, 11.52e6),
        (30.72e6, 1.92e6),
        (30.72e6, 23.04e6),
    ] {
        let low = fi.min(fo);
        let fs_dft = 1e3f64;
        for frac in [-0.3f64, -0.1, 0.02, 0.2, 0.3] {
            // on the 1 kHz analysis grid
            let f = (frac * low / fs_dft).round() * fs_dft;
            let mut r = Resampler::new(fi, fo).unwrap();
            let y = r.process(&tone(f, fi, 3 * (fi / fs_dft) as usize));
            let y = &y[y.len() - (fo / fs_dft) as usize..];
            let a = level(y, f, fo);
            let ripple = (20.0 * a.log10()).abs();
            worst_ripple = worst_ripple.max(ripple);
            if ripple >= 0.1 {
                return Err(format!("{fi}->{fo}: {f} Hz off by {ripple:.3} dB"));
            }
            if fo > fi {
                for k in 1..(fo / fi).round() as i64 {
                    let image = f + k as f64 * fi;
                    let image = image - fo * (image / fo).round();
                    let rej = 20.0 * (a / level(y, image, fo)).log10();
                    worst_image = worst_image.min(rej);
                    if rej <= 60.0 {
                        return Err(format!(
                            "{fi}->{fo}: image of {f} Hz at {image} Hz only {rej:.1} dB down"
                        ));
                    }
                }
            }
        }
    }
    Ok(format!(
        "ripple <= {worst_ripple:.3} dB, image rejection >= {worst_image:.1} dB"
    ))
}

fn friis_db(d: f64, f: f64) -> f64 {
    20.0 * (4.0 * PI * d * f / SPEED_OF_LIGHT).log10()
}

pub fn two_ray_without_reflection_is_friis() -> Check {
    let mut worst = 0f64;
    for (d, f, ht, hr) in [
        (10.0f64, 915e6, 2.0, 1.5),
        (300.0, 3.41e9, 25.0, 1.5),
        (5000.0, 2.45e9, 30.0, 10.0),
        (1.0, 6e9, 0.5, 0.5),
    ] {
        let direct = d.hypot(ht - hr);
        let got = two_ray_loss(d, f, ht, hr, 0.0).map_err(|e| e.to_string())?;
        let e = (got - friis_db(direct, f)).abs();
        worst = worst.max(e);
        ensure(e < 1e-9, || {
            format!("d={d}: {got} vs {}", friis_db(direct, f))
        })?;
    }
    Ok(format!("max deviation {worst:.1e} dB"))
}

pub fn fspl_at_100m() -> Check {
    let got = free_space_loss(100.0, 3.41e9).map_err(|e| e.to_string())?;
    let want = friis_db(100.0, 3.41e9);
    ensure(
        (got - want).abs() < 1e-9 && (got - 83.10).abs() <= 0.01,
        || format!("{got} dB (oracle {want})"),
    )?;
    Ok(format!("{got:.3} dB (oracle {want:.3})"))
}

pub fn doppler_at_5mps() -> Check {
    let fc = 3.41e9;
    let want = 5.0 * fc / SPEED_OF_LIGHT;
    // closing at 5 m/s (negative radial velocity)
    let got = doppler_offset(-5.0, fc);
    ensure((got - want).abs() <= 0.01, || {
        format!("{got} Hz vs {want} Hz")
    })?;
    let mut rot = Rotator::new(iqtwin::propagation::omega_for(got, 1e5));
    let mut x = vec![Cf32::new(1.0, 0.0); 100_000];
    rot.process(&mut x);
    let measured = (1..x.len())
        .map(|i| (x[i] * x[i - 1].conj()).arg() as f64)
        .sum::<f64>()
        / (x.len() - 1) as f64
        * 1e5
        / TAU;
    ensure((measured - want).abs() <= 0.01, || {
        format!("rotated tone at {measured} Hz")
    })?;
    Ok(format!(
        "{got:.4} Hz (oracle v f / c = {want:.4}), applied tone {measured:.4} Hz"
    ))
}

pub fn noise_variance() -> Check {
    for (seed, p) in [(1u64, 1.0), (2, 1e-3), (99, 2.5e-9)] {
        let mut src = NoiseSource::new(p, seed);
        let mut x = vec![Cf32::new(0.0, 0.0); 1_000_000];
        src.fill(&mut x);
        let mean: Complex64 = x.iter().map(|s| c64(*s)).sum::<Complex64>() / x.len() as f64;
        let var = x.iter().map(|s| (c64(*s) - mean).norm_sqr()).sum::<f64>() / x.len() as f64;
        ensure((var / p - 1.0).abs() < 0.01, || {
            format!("power {p}: variance {var}")
        })?;
        let (vi, vq) = x.iter().fold((0f64, 0f64), |(a, b), s| {
            (a + (s.re as f64).powi(2), b + (s.im as f64).powi(2))
        });
        let ratio = vi / vq;
        ensure((ratio - 1.0).abs() < 0.02, || {
            format!("I/Q power ratio {ratio}")
        })?;
    }
    Ok("n = 1e6, within 1%".into())
}

pub fn streaming_strategy() -> impl Strategy<Value = (u64, usize, usize)> {
    (any::<u64>(), 1usize..5000, 0usize..4)
}

pub fn convolution_strategy() -> impl Strategy<Value = (u64, usize, usize)> {
    (any::<u64>(), 1usize..2048, 1usize..=16)
}

pub fn check_dsp() -> Check {
    all(vec![
        (
            "streaming == batch",
            Box::new(|| {
                prop(64, streaming_strategy(), streaming_equals_batch).map(|_| String::new())
            }),
        ),
        (
            "CIR vs convolution",
            Box::new(|| {
                prop(64, convolution_strategy(), cir_matches_direct_convolution)
                    .map(|_| String::new())
            }),
        ),
        ("resampler", Box::new(resampler_tones)),
        (
            "two-ray with no reflection",
            Box::new(two_ray_without_reflection_is_friis),
        ),
        ("FSPL 100 m", Box::new(fspl_at_100m)),
        ("Doppler 5 m/s", Box::new(doppler_at_5mps)),
        ("noise", Box::new(noise_variance)),
    ])
}
