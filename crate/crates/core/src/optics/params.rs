use super::geometry::MicroscopeConfig;
use super::grid::RealGrid;
use crate::error::{Error, Result};

/// Boolean disk of frequency pixels within `radius` of DC.
#[derive(Debug, Clone, PartialEq)]
pub struct PupilSupport {
    n: usize,
    mask: Vec<bool>,
}

impl PupilSupport {
    pub fn disk(n: usize, radius: f64) -> Self {
        let c = (n / 2) as f64;
        let mut mask = vec![false; n * n];
        for r in 0..n {
            for col in 0..n {
                let dy = r as f64 - c;
                let dx = col as f64 - c;
                mask[r * n + col] = dy * dy + dx * dx <= radius * radius;
            }
        }
        Self { n, mask }
    }

    pub fn from_config(config: &MicroscopeConfig) -> Self {
        Self::disk(config.grid_n, config.pupil_radius_px())
    }

    pub fn from_mask(n: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != n * n {
            return Err(Error::Shape(format!("support mask length {} != {}", mask.len(), n * n)));
        }
        Ok(Self { n, mask })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Offsets `(dy, dx)` from DC of every supported pixel, row-major.
    pub fn offsets(&self) -> Vec<[i32; 2]> {
        let c = (self.n / 2) as i32;
        (0..self.n * self.n)
            .filter(|&i| self.mask[i])
            .map(|i| [(i / self.n) as i32 - c, (i % self.n) as i32 - c])
            .collect()
    }
}

/// Trainable physical layer: signed LED weights and an amplitude pupil.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    pub led_weights: Vec<f64>,
    pub pupil: RealGrid,
    pub pupil_support: PupilSupport,
}

impl PhysicalParams {
    /// Axial LED at full brightness, clear aperture.
    pub fn default_for(config: &MicroscopeConfig, n_leds: usize, center: usize) -> Self {
        let support = PupilSupport::from_config(config);
        let mut weights = vec![0.0; n_leds];
        weights[center] = 1.0;
        Self::clear(weights, support)
    }

    /// Clear aperture over `support` with the given weights.
    pub fn clear(led_weights: Vec<f64>, pupil_support: PupilSupport) -> Self {
        let n = pupil_support.n();
        let pupil = RealGrid::new(n, pupil_support.mask().iter().map(|&m| if m { 1.0 } else { 0.0 }).collect())
            .expect("mask has n*n entries");
        Self { led_weights, pupil, pupil_support }
    }

    pub fn grid_n(&self) -> usize {
        self.pupil.n()
    }

    /// Checks the box and support constraints.
    pub fn validate(&self) -> Result<()> {
        if self.pupil.n() != self.pupil_support.n() {
            return Err(Error::Shape("pupil and support sizes differ".into()));
        }
        if let Some(w) = self.led_weights.iter().find(|w| !(-1.0..=1.0).contains(*w)) {
            return Err(Error::Validation(format!("LED weight {w} outside [-1, 1]")));
        }
        for (i, &p) in self.pupil.data().iter().enumerate() {
            let ok = if self.pupil_support.contains(i) { (0.0..=1.0).contains(&p) } else { p == 0.0 };
            if !ok {
                return Err(Error::Validation(format!("pupil value {p} at index {i} violates its constraint")));
            }
        }
        Ok(())
    }

    /// Clamps weights to `[-1, 1]` and the pupil to `[0, 1]` on its support,
    /// zero elsewhere. Idempotent.
    pub fn project_constraints(&mut self) {
        for w in &mut self.led_weights {
            *w = w.clamp(-1.0, 1.0);
        }
        let support = &self.pupil_support;
        for (i, p) in self.pupil.data_mut().iter_mut().enumerate() {
            *p = if support.contains(i) { p.clamp(0.0, 1.0) } else { 0.0 };
        }
    }

    /// Mean pupil transmission over its support.
    pub fn transmission_fraction(&self) -> f64 {
        let count = self.pupil_support.count().max(1);
        self.pupil.sum() / count as f64
    }

    /// Mean `|w|` over all LEDs.
    pub fn emission_fraction(&self) -> f64 {
        if self.led_weights.is_empty() {
            return 0.0;
        }
        self.led_weights.iter().map(|w| w.abs()).sum::<f64>() / self.led_weights.len() as f64
    }
}
