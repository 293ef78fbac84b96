//! Band-limited image formation engine shared by the forward model, the
//! physical-layer gradients and the trainer.
//!
//! The pupil confines every coherent field to `|k| ≤ r` frequency pixels, so
//! each single-LED intensity is band-limited to `|q| ≤ 2r`. When a grid of
//! `m ≥ 4r + 1` pixels is smaller than the object grid, fields and intensities
//! are computed exactly on that coarser grid and the sensor block-mean is
//! applied in the Fourier domain (box transfer function plus aliasing fold).
//! Otherwise everything runs on the full grid with a spatial block mean.

use num_complex::{Complex32, Complex64};
use rand::Rng;

use super::fft::{fft2c_in_place, Band, Direction};
use super::geometry::{CaptureMode, Led};
use super::grid::{ComplexField, Plane, RealGrid};
use super::params::{PhysicalParams, PupilSupport};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone)]
enum WindowData {
    Wide(Vec<Complex64>),
    Compact(Vec<Complex32>),
}

/// The part of a centered object spectrum the pupil can reach under any LED.
#[derive(Debug, Clone)]
pub struct SpectrumWindow {
    n: usize,
    half: usize,
    size: usize,
    wraps: bool,
    data: WindowData,
}

impl SpectrumWindow {
    /// Crops `spectrum` to offsets `[-half, half]` around DC. If that box
    /// would not fit, the whole spectrum is kept and indexed periodically.
    pub fn from_spectrum(spectrum: &ComplexField, half: usize) -> Self {
        let n = spectrum.n();
        let c = n / 2;
        if 2 * half + 1 >= n {
            return Self { n, half: c, size: n, wraps: true, data: WindowData::Wide(spectrum.data().to_vec()) };
        }
        let size = 2 * half + 1;
        let mut data = Vec::with_capacity(size * size);
        for r in 0..size {
            let row = c - half + r;
            let start = row * n + c - half;
            data.extend_from_slice(&spectrum.data()[start..start + size]);
        }
        Self { n, half, size, wraps: false, data: WindowData::Wide(data) }
    }

    /// Stores the window in single precision.
    pub fn compact(self) -> Self {
        let data = match self.data {
            WindowData::Wide(v) => {
                WindowData::Compact(v.iter().map(|z| Complex32::new(z.re as f32, z.im as f32)).collect())
            }
            c @ WindowData::Compact(_) => c,
        };
        Self { data, ..self }
    }

    pub fn grid_n(&self) -> usize {
        self.n
    }

    pub fn scale_by(&mut self, s: f64) {
        match &mut self.data {
            WindowData::Wide(v) => v.iter_mut().for_each(|z| *z *= s),
            WindowData::Compact(v) => v.iter_mut().for_each(|z| *z *= s as f32),
        }
    }

    /// Spectrum value at offset `(dy, dx)` from DC.
    #[inline]
    pub fn get(&self, dy: i32, dx: i32) -> Complex64 {
        let idx = if self.wraps {
            let n = self.n as i32;
            let c = n / 2;
            ((c + dy).rem_euclid(n) * n + (c + dx).rem_euclid(n)) as usize
        } else {
            let h = self.half as i32;
            debug_assert!(dy.abs() <= h && dx.abs() <= h);
            ((h + dy) as usize) * self.size + (h + dx) as usize
        };
        match &self.data {
            WindowData::Wide(v) => v[idx],
            WindowData::Compact(v) => Complex64::new(v[idx].re as f64, v[idx].im as f64),
        }
    }
}

/// Box-integration transfer function and aliasing fold for the coarse grid.
#[derive(Debug, Clone)]
struct SensorTransfer {
    h: Vec<Complex64>,
    fold: Vec<usize>,
}

impl SensorTransfer {
    fn new(n: usize, work_n: usize, sensor_n: usize) -> Self {
        let b = n / sensor_n;
        let hm = (work_n / 2) as i64;
        let hs = (sensor_n / 2) as i64;
        let h1: Vec<Complex64> = (0..work_n as i64)
            .map(|qi| {
                let q = (qi - hm) as f64;
                let sum: Complex64 = (0..b)
                    .map(|a| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * q * a as f64 / n as f64))
                    .sum();
                sum / b as f64
            })
            .collect();
        let fold1: Vec<usize> =
            (0..work_n as i64).map(|qi| ((qi - hm) + hs).rem_euclid(sensor_n as i64) as usize).collect();
        let mut h = Vec::with_capacity(work_n * work_n);
        let mut fold = Vec::with_capacity(work_n * work_n);
        for qy in 0..work_n {
            for qx in 0..work_n {
                h.push(h1[qy] * h1[qx]);
                fold.push(fold1[qy] * sensor_n + fold1[qx]);
            }
        }
        Self { h, fold }
    }
}

/// Per-capture state kept for the backward pass.
#[derive(Debug, Clone)]
pub struct CaptureTrace {
    /// Coherent field of each LED on the working grid, when computed.
    fields: Vec<Option<Vec<Complex64>>>,
}

/// Result of one simulated acquisition.
#[derive(Debug, Clone)]
pub struct Capture {
    /// What the classifier sees: positive capture minus negative capture,
    /// noise included.
    pub image: RealGrid,
    /// Noise-free positive-weight capture (or the signed sum in
    /// [`CaptureMode::Signed`]).
    pub positive: RealGrid,
    /// Noise-free negative-weight capture; zero in [`CaptureMode::Signed`].
    pub negative: RealGrid,
    pub trace: CaptureTrace,
}

/// Which quantities a capture must retain for the backward pass.
#[derive(Debug, Clone, Copy, Default)]
pub struct TraceRequest {
    /// Evaluate every LED, even those with zero weight (needed for weight
    /// gradients).
    pub all_leds: bool,
}

/// Gradients of a scalar loss with respect to the physical layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalGradients {
    pub d_weights: Vec<f64>,
    /// Over the full frequency grid; exactly zero outside the pupil support.
    pub d_pupil: RealGrid,
}

/// Precomputed image-formation plan for one geometry and LED layout.
#[derive(Debug, Clone)]
pub struct Propagator {
    n: usize,
    sensor_n: usize,
    work_n: usize,
    offsets: Vec<[i32; 2]>,
    work_idx: Vec<usize>,
    full_idx: Vec<usize>,
    rows: std::ops::Range<usize>,
    shifts: Vec<[i32; 2]>,
    window_half: usize,
    transfer: Option<SensorTransfer>,
    mode: CaptureMode,
}

impl Propagator {
    /// Chooses the smallest exact working grid for `support`.
    pub fn new(support: &PupilSupport, leds: &[Led], sensor_n: usize, mode: CaptureMode) -> Result<Self> {
        let n = support.n();
        let reach = support.offsets().iter().map(|o| o[0].abs().max(o[1].abs()) as usize).max().unwrap_or(0);
        let mut work_n = (4 * reach + 1).next_power_of_two().max(2);
        if work_n >= n || sensor_n < 2 {
            work_n = n;
        }
        Self::with_work_grid(support, leds, sensor_n, mode, work_n)
    }

    /// Always works on the full object grid with a spatial block mean.
    pub fn direct(support: &PupilSupport, leds: &[Led], sensor_n: usize, mode: CaptureMode) -> Result<Self> {
        Self::with_work_grid(support, leds, sensor_n, mode, support.n())
    }

    fn with_work_grid(
        support: &PupilSupport,
        leds: &[Led],
        sensor_n: usize,
        mode: CaptureMode,
        work_n: usize,
    ) -> Result<Self> {
        let n = support.n();
        if sensor_n == 0 || n % sensor_n != 0 {
            return Err(Error::Shape(format!("sensor size {sensor_n} does not divide grid size {n}")));
        }
        let offsets = support.offsets();
        let reach = offsets.iter().map(|o| o[0].abs().max(o[1].abs())).max().unwrap_or(0);
        let cw = (work_n / 2) as i32;
        let cn = (n / 2) as i32;
        let work_idx = offsets.iter().map(|&[dy, dx]| ((cw + dy) * work_n as i32 + cw + dx) as usize).collect();
        let full_idx = offsets.iter().map(|&[dy, dx]| ((cn + dy) * n as i32 + cn + dx) as usize).collect();
        let rows = if offsets.is_empty() { 0..0 } else { (cw - reach) as usize..(cw + reach + 1) as usize };
        let shifts: Vec<[i32; 2]> = leds.iter().map(|l| l.shift_px).collect();
        let max_shift = shifts.iter().map(|s| s[0].abs().max(s[1].abs())).max().unwrap_or(0);
        let transfer = (work_n < n).then(|| SensorTransfer::new(n, work_n, sensor_n));
        Ok(Self {
            n,
            sensor_n,
            work_n,
            offsets,
            work_idx,
            full_idx,
            rows,
            shifts,
            window_half: (reach + max_shift) as usize,
            transfer,
            mode,
        })
    }

    pub fn grid_n(&self) -> usize {
        self.n
    }

    pub fn sensor_n(&self) -> usize {
        self.sensor_n
    }

    pub fn work_n(&self) -> usize {
        self.work_n
    }

    pub fn n_leds(&self) -> usize {
        self.shifts.len()
    }

    pub fn mode(&self) -> CaptureMode {
        self.mode
    }

    /// Half-width of the spectrum window a sample must provide.
    pub fn window_half(&self) -> usize {
        self.window_half
    }

    /// Object-plane field to the spectrum window this plan consumes.
    pub fn prepare(&self, object: &ComplexField) -> Result<SpectrumWindow> {
        if object.n() != self.n {
            return Err(Error::Shape(format!("object is {}x{0}, plan expects {}", object.n(), self.n)));
        }
        let spectrum = match object.plane() {
            Plane::Object => super::fft::fft2(object)?,
            Plane::Fourier => object.clone(),
        };
        Ok(SpectrumWindow::from_spectrum(&spectrum, self.window_half))
    }

    fn check(&self, window: &SpectrumWindow, params: &PhysicalParams) -> Result<()> {
        if window.grid_n() != self.n || params.grid_n() != self.n {
            return Err(Error::Shape(format!(
                "spectrum {} / pupil {} do not match plan grid {}",
                window.grid_n(),
                params.grid_n(),
                self.n
            )));
        }
        if params.led_weights.len() != self.shifts.len() {
            return Err(Error::Shape(format!(
                "{} LED weights for {} LEDs",
                params.led_weights.len(),
                self.shifts.len()
            )));
        }
        Ok(())
    }

    /// Coherent field of LED `i` on the working grid.
    fn coherent_field(&self, window: &SpectrumWindow, pupil: &RealGrid, i: usize) -> Vec<Complex64> {
        let m = self.work_n;
        let [sx, sy] = self.shifts[i];
        let mut buf = vec![ZERO; m * m];
        let p = pupil.data();
        for ((&[dy, dx], &wi), &fi) in self.offsets.iter().zip(&self.work_idx).zip(&self.full_idx) {
            let t = p[fi];
            if t != 0.0 {
                buf[wi] = window.get(dy + sy, dx + sx) * t;
            }
        }
        fft2c_in_place(m, &mut buf, Direction::Inverse, Band::Input(self.rows.clone()));
        if m != self.n {
            let s = m as f64 / self.n as f64;
            buf.iter_mut().for_each(|z| *z *= s);
        }
        buf
    }

    /// Working-grid intensity to sensor image.
    fn project(&self, intensity: &[f64]) -> RealGrid {
        match &self.transfer {
            None => block_mean(self.n, intensity, self.sensor_n),
            Some(t) => {
                let m = self.work_n;
                let s = self.sensor_n;
                let mut buf: Vec<Complex64> = intensity.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                fft2c_in_place(m, &mut buf, Direction::Forward, Band::Full);
                let mut acc = vec![ZERO; s * s];
                let inv_m = 1.0 / m as f64;
                for ((z, h), &f) in buf.iter().zip(&t.h).zip(&t.fold) {
                    acc[f] += z * h * inv_m;
                }
                fft2c_in_place(s, &mut acc, Direction::Inverse, Band::Full);
                let data = acc.iter().map(|z| z.re * s as f64).collect();
                RealGrid::new(s, data).expect("sensor size")
            }
        }
    }

    /// Adjoint of [`Self::project`]: sensor-space gradient to working grid.
    fn project_adjoint(&self, upstream: &RealGrid) -> Vec<f64> {
        match &self.transfer {
            None => block_mean_adjoint(upstream, self.n),
            Some(t) => {
                let m = self.work_n;
                let s = self.sensor_n;
                let mut acc: Vec<Complex64> = upstream.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
                fft2c_in_place(s, &mut acc, Direction::Forward, Band::Full);
                let mut buf: Vec<Complex64> = t.fold.iter().zip(&t.h).map(|(&f, h)| acc[f] * h.conj()).collect();
                fft2c_in_place(m, &mut buf, Direction::Inverse, Band::Full);
                let scale = s as f64 / m as f64;
                buf.iter().map(|z| z.re * scale).collect()
            }
        }
    }

    /// Noise-free sensor image of LED `i` alone at unit weight.
    pub fn single_led_image(&self, window: &SpectrumWindow, pupil: &RealGrid, i: usize) -> RealGrid {
        let field = self.coherent_field(window, pupil, i);
        let intensity: Vec<f64> = field.iter().map(|z| z.norm_sqr()).collect();
        self.project(&intensity)
    }

    /// Simulates one acquisition.
    pub fn capture<R: Rng + ?Sized>(
        &self,
        window: &SpectrumWindow,
        params: &PhysicalParams,
        request: TraceRequest,
        noise_sigma_frac: f64,
        rng: &mut R,
    ) -> Result<Capture> {
        self.check(window, params)?;
        let m = self.work_n;
        let mut pos = vec![0.0; m * m];
        let mut neg = vec![0.0; m * m];
        let mut fields = vec![None; self.shifts.len()];
        for (i, &w) in params.led_weights.iter().enumerate() {
            if w == 0.0 && !request.all_leds {
                continue;
            }
            let field = self.coherent_field(window, &params.pupil, i);
            if w != 0.0 {
                let (acc, scale) = match self.mode {
                    CaptureMode::Split if w < 0.0 => (&mut neg, -w),
                    _ => (&mut pos, w),
                };
                for (a, z) in acc.iter_mut().zip(&field) {
                    *a += scale * z.norm_sqr();
                }
            }
            fields[i] = Some(field);
        }
        let positive = self.project(&pos);
        let negative = match self.mode {
            CaptureMode::Split => self.project(&neg),
            CaptureMode::Signed => RealGrid::zeros(self.sensor_n),
        };
        let noisy_pos = super::forward::add_detector_noise(&positive, noise_sigma_frac, rng)?;
        let noisy_neg = super::forward::add_detector_noise(&negative, noise_sigma_frac, rng)?;
        let data = noisy_pos.data().iter().zip(noisy_neg.data()).map(|(a, b)| a - b).collect();
        Ok(Capture { image: RealGrid::new(self.sensor_n, data)?, positive, negative, trace: CaptureTrace { fields } })
    }

    /// Backpropagates `upstream = ∂L/∂image` into the physical layer. Noise
    /// is treated as a constant.
    pub fn backward(
        &self,
        window: &SpectrumWindow,
        params: &PhysicalParams,
        trace: &CaptureTrace,
        upstream: &RealGrid,
        want_weights: bool,
        want_pupil: bool,
    ) -> Result<PhysicalGradients> {
        self.check(window, params)?;
        if upstream.n() != self.sensor_n {
            return Err(Error::Shape(format!(
                "upstream gradient is {}x{0}, sensor is {}",
                upstream.n(),
                self.sensor_n
            )));
        }
        let m = self.work_n;
        let adj = self.project_adjoint(upstream);
        let mut d_weights = vec![0.0; self.shifts.len()];
        let mut d_pupil = RealGrid::zeros(self.n);
        for (i, &w) in params.led_weights.iter().enumerate() {
            let Some(field) = trace.fields[i].as_ref() else {
                if want_weights {
                    return Err(Error::Validation(format!(
                        "LED {i} was not traced; capture with all_leds for weight gradients"
                    )));
                }
                continue;
            };
            if want_weights {
                d_weights[i] = adj.iter().zip(field).map(|(a, z)| a * z.norm_sqr()).sum();
            }
            if want_pupil && w != 0.0 {
                let mut buf: Vec<Complex64> = adj.iter().zip(field).map(|(&a, z)| z * (2.0 * w * a)).collect();
                fft2c_in_place(m, &mut buf, Direction::Forward, Band::Output(self.rows.clone()));
                let s = m as f64 / self.n as f64;
                let [sx, sy] = self.shifts[i];
                let dp = d_pupil.data_mut();
                for ((&[dy, dx], &wi), &fi) in self.offsets.iter().zip(&self.work_idx).zip(&self.full_idx) {
                    let spec = window.get(dy + sy, dx + sx);
                    dp[fi] += (spec.conj() * buf[wi]).re * s;
                }
            }
        }
        Ok(PhysicalGradients { d_weights, d_pupil })
    }
}

pub(crate) fn block_mean(n: usize, data: &[f64], sensor_n: usize) -> RealGrid {
    let b = n / sensor_n;
    let mut out = vec![0.0; sensor_n * sensor_n];
    for r in 0..n {
        let orow = &mut out[(r / b) * sensor_n..(r / b + 1) * sensor_n];
        let row = &data[r * n..(r + 1) * n];
        for (c, chunk) in row.chunks_exact(b).enumerate() {
            orow[c] += chunk.iter().sum::<f64>();
        }
    }
    let inv = 1.0 / (b * b) as f64;
    out.iter_mut().for_each(|v| *v *= inv);
    RealGrid::new(sensor_n, out).expect("sensor size")
}

pub(crate) fn block_mean_adjoint(upstream: &RealGrid, n: usize) -> Vec<f64> {
    let s = upstream.n();
    let b = n / s;
    let inv = 1.0 / (b * b) as f64;
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            out[r * n + c] = upstream.get(r / b, c / b) * inv;
        }
    }
    out
}
