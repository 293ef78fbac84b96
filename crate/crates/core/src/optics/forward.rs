use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::fft::{fft2c_in_place, Band, Direction};
use super::geometry::{build_led_array, MicroscopeConfig};
use super::grid::{ComplexField, Plane, RealGrid};
use super::params::PhysicalParams;
use super::propagate::{block_mean, Propagator, TraceRequest};
use crate::error::{Error, Result};

/// `|ifft2(circshift(spectrum, -shift) ⊙ pupil)|²` on the full grid.
///
/// `shift_px` is `(x, y)`: the pupil at frequency `k` sees the spectrum value
/// at `k + shift`.
pub fn coherent_intensity(spectrum: &ComplexField, pupil: &RealGrid, shift_px: [i32; 2]) -> Result<RealGrid> {
    let n = spectrum.n();
    if spectrum.plane() != Plane::Fourier {
        return Err(Error::Validation("coherent_intensity expects a Fourier-plane spectrum".into()));
    }
    if pupil.n() != n {
        return Err(Error::Shape(format!("pupil {}x{0} vs spectrum {n}x{n}", pupil.n())));
    }
    let ni = n as i32;
    let [sx, sy] = shift_px;
    let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
    for r in 0..n {
        let src_r = (r as i32 + sy).rem_euclid(ni) as usize;
        for c in 0..n {
            let p = pupil.get(r, c);
            if p != 0.0 {
                let src_c = (c as i32 + sx).rem_euclid(ni) as usize;
                buf[r * n + c] = spectrum.get(src_r, src_c) * p;
            }
        }
    }
    fft2c_in_place(n, &mut buf, Direction::Inverse, Band::Full);
    RealGrid::new(n, buf.iter().map(|z| z.norm_sqr()).collect())
}

/// Mean over each `(grid_n / sensor_n)²` block.
pub fn downsample_to_sensor(field: &RealGrid, sensor_n: usize) -> Result<RealGrid> {
    let n = field.n();
    if sensor_n == 0 || n % sensor_n != 0 {
        return Err(Error::Shape(format!("sensor size {sensor_n} does not divide {n}")));
    }
    Ok(block_mean(n, field.data(), sensor_n))
}

/// Adds i.i.d. Gaussian noise with standard deviation `sigma_frac · max|image|`.
///
/// Nothing is drawn from `rng` when that deviation is zero.
pub fn add_detector_noise<R: Rng + ?Sized>(image: &RealGrid, sigma_frac: f64, rng: &mut R) -> Result<RealGrid> {
    if !(sigma_frac >= 0.0) || !sigma_frac.is_finite() {
        return Err(Error::Validation(format!("noise fraction must be >= 0, got {sigma_frac}")));
    }
    let peak = image.data().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let sigma = sigma_frac * peak;
    if sigma == 0.0 {
        return Ok(image.clone());
    }
    let data = image
        .data()
        .iter()
        .map(|&v| {
            let z: f64 = rng.sample(StandardNormal);
            v + sigma * z
        })
        .collect();
    RealGrid::new(image.n(), data)
}

/// Simulated sensor image of `object` under the weighted LED pattern and
/// pupil in `params`.
pub fn forward_capture<R: Rng + ?Sized>(
    object: &ComplexField,
    params: &PhysicalParams,
    config: &MicroscopeConfig,
    noise_sigma_frac: f64,
    rng: &mut R,
) -> Result<RealGrid> {
    if object.plane() != Plane::Object {
        return Err(Error::Validation("forward_capture expects an object-plane field".into()));
    }
    if object.n() != config.grid_n {
        return Err(Error::Shape(format!("object {}x{0} vs grid {}", object.n(), config.grid_n)));
    }
    params.validate()?;
    let leds = build_led_array(config)?;
    let prop = Propagator::new(&params.pupil_support, &leds, config.sensor_n, config.capture_mode)?;
    let window = prop.prepare(object)?;
    let cap = prop.capture(&window, params, TraceRequest::default(), noise_sigma_frac, rng)?;
    Ok(cap.image)
}
