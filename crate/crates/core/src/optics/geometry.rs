use serde::{Deserialize, Serialize};

use super::grid::check_pow2;
use crate::error::{Error, Result};

/// One concentric ring of LEDs beneath the sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedRing {
    pub polar_angle_deg: f64,
    pub count: usize,
    #[serde(default)]
    pub azimuth_offset_deg: f64,
}

impl LedRing {
    pub fn new(polar_angle_deg: f64, count: usize) -> Self {
        Self { polar_angle_deg, count, azimuth_offset_deg: 0.0 }
    }
}

/// How the signed weighted intensity sum is realised on the detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaptureMode {
    /// Positive and negative weights captured separately, each noised, then
    /// subtracted.
    #[default]
    Split,
    /// A single capture of the signed sum (ablation).
    Signed,
}

/// Microscope and sampling geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroscopeConfig {
    /// Illumination wavelength in meters.
    pub wavelength: f64,
    pub na: f64,
    /// Pixels per side of the simulated object field.
    pub grid_n: usize,
    /// Object-plane sampling in meters per pixel.
    pub dx: f64,
    pub sensor_n: usize,
    pub led_rings: Vec<LedRing>,
    #[serde(default)]
    pub capture_mode: CaptureMode,
}

/// Pupil radius used by [`MicroscopeConfig::desk_scale`], in frequency pixels.
pub const DESK_PUPIL_RADIUS_PX: f64 = 12.5;

impl MicroscopeConfig {
    /// 0.2 NA, 522 nm, three rings at 0°, 16.37° and 34.30° (1 + 12 + 12 LEDs),
    /// 256-pixel object grid imaged onto a 64-pixel sensor.
    pub fn desk_scale() -> Self {
        let wavelength = 522e-9;
        let na = 0.2;
        let grid_n = 256;
        Self {
            wavelength,
            na,
            grid_n,
            dx: DESK_PUPIL_RADIUS_PX * wavelength / (na * grid_n as f64),
            sensor_n: 64,
            led_rings: vec![LedRing::new(0.0, 1), LedRing::new(16.37, 12), LedRing::new(34.30, 12)],
            capture_mode: CaptureMode::Split,
        }
    }

    /// The full-size variant: 2048 grid with a 49-pixel pupil diameter.
    pub fn full_scale() -> Self {
        let mut cfg = Self::desk_scale();
        cfg.grid_n = 2048;
        cfg.dx = 24.5 * cfg.wavelength / (cfg.na * cfg.grid_n as f64);
        cfg
    }

    /// The desk layout scaled down fourfold: 64-pixel grid, 16-pixel sensor.
    /// Fast enough for smoke tests of the training loop.
    pub fn mini() -> Self {
        let mut cfg = Self::desk_scale();
        cfg.grid_n = 64;
        cfg.sensor_n = 16;
        cfg.dx = DESK_PUPIL_RADIUS_PX / 4.0 * cfg.wavelength / (cfg.na * cfg.grid_n as f64);
        cfg
    }

    /// Small instance used for gradient certification: 16-pixel grid, 8-pixel
    /// sensor and five LEDs (one axial, two bright-field, two dark-field).
    pub fn micro() -> Self {
        let wavelength = 522e-9;
        let na = 0.2;
        let grid_n = 16;
        Self {
            wavelength,
            na,
            grid_n,
            dx: 3.5 * wavelength / (na * grid_n as f64),
            sensor_n: 8,
            led_rings: vec![
                LedRing::new(0.0, 1),
                LedRing { polar_angle_deg: 8.0, count: 2, azimuth_offset_deg: 30.0 },
                LedRing { polar_angle_deg: 20.0, count: 2, azimuth_offset_deg: 75.0 },
            ],
            capture_mode: CaptureMode::Split,
        }
    }

    /// Pupil radius in frequency pixels, `na · grid_n · dx / wavelength`.
    pub fn pupil_radius_px(&self) -> f64 {
        self.na * self.grid_n as f64 * self.dx / self.wavelength
    }

    pub fn block_size(&self) -> usize {
        self.grid_n / self.sensor_n
    }

    pub fn validate(&self) -> Result<()> {
        check_pow2(self.grid_n)?;
        for (name, v) in [("wavelength", self.wavelength), ("na", self.na), ("dx", self.dx)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        let r = self.pupil_radius_px();
        if !(1.0..(self.grid_n as f64 / 2.0)).contains(&r) {
            return Err(Error::InvalidGeometry(format!("pupil radius {r:.3} px must lie in [1, {})", self.grid_n / 2)));
        }
        if self.sensor_n == 0 || self.grid_n % self.sensor_n != 0 {
            return Err(Error::Shape(format!("sensor size {} must divide grid size {}", self.sensor_n, self.grid_n)));
        }
        if self.led_rings.is_empty() {
            return Err(Error::InvalidGeometry("no LED rings".into()));
        }
        for ring in &self.led_rings {
            if !(0.0..90.0).contains(&ring.polar_angle_deg) {
                return Err(Error::InvalidGeometry(format!(
                    "ring polar angle {}° outside [0, 90)",
                    ring.polar_angle_deg
                )));
            }
            if ring.count == 0 {
                return Err(Error::InvalidGeometry("ring with zero LEDs".into()));
            }
            if ring.polar_angle_deg == 0.0 && ring.count != 1 {
                return Err(Error::InvalidGeometry("an axial ring must hold exactly one LED".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    BrightField,
    DarkField,
}

impl FieldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::BrightField => "bright",
            FieldKind::DarkField => "dark",
        }
    }
}

/// A single LED and the spectrum offset it produces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Led {
    pub index: usize,
    pub ring: usize,
    pub polar_deg: f64,
    pub azimuth_deg: f64,
    /// Spectrum offset `(x, y)` in frequency pixels; the pupil samples the
    /// object spectrum displaced by this amount.
    pub shift_px: [i32; 2],
    pub field_kind: FieldKind,
}

/// Lays out the LED array ring by ring, ascending azimuth within a ring.
pub fn build_led_array(config: &MicroscopeConfig) -> Result<Vec<Led>> {
    config.validate()?;
    let scale = config.grid_n as f64 * config.dx / config.wavelength;
    let mut leds = Vec::new();
    for (ring_idx, ring) in config.led_rings.iter().enumerate() {
        let theta = ring.polar_angle_deg.to_radians();
        let sin_theta = theta.sin();
        let field_kind = if sin_theta <= config.na { FieldKind::BrightField } else { FieldKind::DarkField };
        for j in 0..ring.count {
            let azimuth_deg = ring.azimuth_offset_deg + 360.0 * j as f64 / ring.count as f64;
            let phi = azimuth_deg.to_radians();
            let shift_px =
                [(scale * sin_theta * phi.cos()).round() as i32, (scale * sin_theta * phi.sin()).round() as i32];
            leds.push(Led {
                index: leds.len(),
                ring: ring_idx,
                polar_deg: ring.polar_angle_deg,
                azimuth_deg,
                shift_px,
                field_kind,
            });
        }
    }
    Ok(leds)
}

/// Index of the axial LED, if any.
pub fn center_led(leds: &[Led]) -> Option<usize> {
    leds.iter().position(|l| l.polar_deg == 0.0).or_else(|| {
        leds.iter().enumerate().min_by_key(|(_, l)| l.shift_px[0].pow(2) + l.shift_px[1].pow(2)).map(|(i, _)| i)
    })
}
