//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use learned_sensing::optics::{ComplexField, MicroscopeConfig, PhysicalParams, Plane, PupilSupport, RealGrid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Centered unitary DFT by direct summation: O(n⁴).
pub fn direct_dft2(n: usize, data: &[Complex64], sign: f64) -> Vec<Complex64> {
    let c = (n / 2) as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for kr in 0..n {
        for kc in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..n {
                for col in 0..n {
                    let phase =
                        sign * 2.0 * PI * ((kr as f64 - c) * (r as f64 - c) + (kc as f64 - c) * (col as f64 - c))
                            / n as f64;
                    acc += data[r * n + col] * Complex64::from_polar(1.0, phase);
                }
            }
            out[kr * n + kc] = acc / n as f64;
        }
    }
    out
}

/// Noise-free sensor image `Σ_i w_i · blockmean |F⁻¹[Ô(k + s_i) P(k)]|²`.
pub fn direct_capture(
    object: &ComplexField,
    params: &PhysicalParams,
    leds: &[learned_sensing::optics::Led],
    sensor_n: usize,
) -> Vec<f64> {
    let n = object.n();
    let spectrum = direct_dft2(n, object.data(), -1.0);
    let b = n / sensor_n;
    let mut image = vec![0.0; sensor_n * sensor_n];
    for (led, &w) in leds.iter().zip(&params.led_weights) {
        if w == 0.0 {
            continue;
        }
        let [sx, sy] = led.shift_px;
        let mut shifted = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                let sr = (r as i32 + sy).rem_euclid(n as i32) as usize;
                let sc = (c as i32 + sx).rem_euclid(n as i32) as usize;
                shifted[r * n + c] = spectrum[sr * n + sc] * params.pupil.get(r, c);
            }
        }
        let field = direct_dft2(n, &shifted, 1.0);
        for r in 0..n {
            for c in 0..n {
                image[(r / b) * sensor_n + c / b] += w * field[r * n + c].norm_sqr() / (b * b) as f64;
            }
        }
    }
    image
}

pub fn random_object(n: usize, rng: &mut impl Rng) -> ComplexField {
    let data =
        (0..n * n).map(|_| Complex64::from_polar(rng.random_range(0.0..1.0), rng.random_range(-PI..PI))).collect();
    ComplexField::new(n, data, Plane::Object).unwrap()
}

/// Weights in `[-1, 1]`, pupil uniform in `[0, 1]` on the configured disk.
pub fn random_params(config: &MicroscopeConfig, n_leds: usize, rng: &mut impl Rng) -> PhysicalParams {
    let mut p = PhysicalParams::clear(
        (0..n_leds).map(|_| rng.random_range(-1.0..1.0)).collect(),
        PupilSupport::from_config(config),
    );
    for v in p.pupil.data_mut().iter_mut().filter(|v| **v > 0.0) {
        *v = rng.random_range(0.0..1.0);
    }
    p
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `max |a − b| / max |b|`.
pub fn rel_max_diff(a: &[f64], b: &[f64]) -> f64 {
    let d = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    d / max_abs(b).max(1e-300)
}

pub fn grid(v: Vec<f64>) -> RealGrid {
    let n = (v.len() as f64).sqrt() as usize;
    RealGrid::new(n, v).unwrap()
}
