//! Analytic gradients of a loss with respect to the physical layer, and the
//! central-difference checker used to certify them.
//!
//! The captured image is linear in the LED weights, so `∂L/∂w_i` is the inner
//! product of the (sensor-adjoint) upstream gradient with LED `i`'s coherent
//! intensity. The pupil gradient chains through `|·|²` and the inverse FFT:
//!
//! ```text
//! ∂L/∂P(k) = Σ_i w_i · 2 Re{ conj(Ô(k + s_i)) · F[ Ū ⊙ g_i ](k) }
//! ```
//!
//! where `Ū` is the upstream gradient spread back over the object grid and
//! `g_i` the coherent field of LED `i`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::optics::{
    CaptureMode, ComplexField, Led, PhysicalParams, Plane, Propagator, PupilSupport, RealGrid, SpectrumWindow,
    TraceRequest,
};

pub use crate::optics::PhysicalGradients;

mod certify;
pub use certify::{
    certify, CheckGroup, CheckRow, GradCheckOptions, GradCheckReport, GradInstance, CSV_HEADER, END_TO_END_TOLERANCE,
    PHYSICAL_TOLERANCE,
};

fn spectrum_window(spectrum: &ComplexField, prop: &Propagator) -> Result<SpectrumWindow> {
    if spectrum.plane() != Plane::Fourier {
        return Err(Error::Validation("expected a Fourier-plane object spectrum".into()));
    }
    Ok(SpectrumWindow::from_spectrum(spectrum, prop.window_half()))
}

/// `∂L/∂w_i` given `upstream = ∂L/∂I′` on the sensor grid. Independent of the
/// current weights.
pub fn grad_wrt_weights(
    object_spectrum: &ComplexField,
    pupil: &RealGrid,
    leds: &[Led],
    upstream: &RealGrid,
) -> Result<Vec<f64>> {
    if leds.is_empty() {
        return Err(Error::Validation("no LEDs".into()));
    }
    let n = object_spectrum.n();
    if pupil.n() != n {
        return Err(Error::Shape(format!("pupil {}x{0} vs spectrum {n}x{n}", pupil.n())));
    }
    let support = PupilSupport::from_mask(n, pupil.data().iter().map(|&p| p != 0.0).collect())?;
    let params = PhysicalParams { led_weights: vec![0.0; leds.len()], pupil: pupil.clone(), pupil_support: support };
    let prop = Propagator::new(&params.pupil_support, leds, upstream.n(), CaptureMode::Split)?;
    let window = spectrum_window(object_spectrum, &prop)?;
    let cap =
        prop.capture(&window, &params, TraceRequest { all_leds: true }, 0.0, &mut ChaCha8Rng::seed_from_u64(0))?;
    Ok(prop.backward(&window, &params, &cap.trace, upstream, true, false)?.d_weights)
}

/// `∂L/∂P(k)` over the full frequency grid, zero outside the pupil support.
pub fn grad_wrt_pupil(
    object_spectrum: &ComplexField,
    params: &PhysicalParams,
    leds: &[Led],
    upstream: &RealGrid,
) -> Result<RealGrid> {
    if object_spectrum.n() != params.grid_n() {
        return Err(Error::Shape(format!("spectrum {}x{0} vs pupil {}x{1}", object_spectrum.n(), params.grid_n())));
    }
    let prop = Propagator::new(&params.pupil_support, leds, upstream.n(), CaptureMode::Split)?;
    let window = spectrum_window(object_spectrum, &prop)?;
    let cap = prop.capture(&window, params, TraceRequest::default(), 0.0, &mut ChaCha8Rng::seed_from_u64(0))?;
    Ok(prop.backward(&window, params, &cap.trace, upstream, false, true)?.d_pupil)
}

/// Central difference `(f(x + ε e_i) − f(x − ε e_i)) / 2ε`.
pub fn central_difference<F>(f: &mut F, x: &[f64], i: usize, eps: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    probe[i] = x[i] + eps;
    let plus = f(&probe);
    probe[i] = x[i] - eps;
    let minus = f(&probe);
    if !plus.is_finite() || !minus.is_finite() {
        return Err(Error::NonFinite(format!("objective at coordinate {i}")));
    }
    Ok((plus - minus) / (2.0 * eps))
}

/// Max over all coordinates of `|fd − analytic| / max(|analytic|, 1e-12)`.
pub fn finite_difference_check<F>(f: F, x: &[f64], analytic: &[f64], eps: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let coords: Vec<usize> = (0..x.len()).collect();
    finite_difference_check_at(f, x, analytic, eps, &coords)
}

/// Like [`finite_difference_check`] but only over `coords`.
pub fn finite_difference_check_at<F>(mut f: F, x: &[f64], analytic: &[f64], eps: f64, coords: &[usize]) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(eps > 0.0) {
        return Err(Error::Validation(format!("eps must be positive, got {eps}")));
    }
    if analytic.len() != x.len() {
        return Err(Error::Shape(format!("{} gradient entries for {} parameters", analytic.len(), x.len())));
    }
    let mut worst = 0.0_f64;
    for &i in coords {
        let fd = central_difference(&mut f, x, i, eps)?;
        let err = relative_error(fd, analytic[i]);
        worst = worst.max(err);
    }
    Ok(worst)
}

pub fn relative_error(numeric: f64, analytic: f64) -> f64 {
    (numeric - analytic).abs() / analytic.abs().max(1e-12)
}
