use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{build_led_array, center_led, MicroscopeConfig, PhysicalParams};

/// Which physical parameter groups are optimized alongside the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    /// Digital layers only.
    DO,
    /// Pupil transmission.
    PO,
    /// LED weights.
    IO,
    /// Pupil and LED weights.
    PIO,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::DO, Regime::PO, Regime::IO, Regime::PIO];

    pub fn train_pupil(self) -> bool {
        matches!(self, Regime::PO | Regime::PIO)
    }

    pub fn train_illumination(self) -> bool {
        matches!(self, Regime::IO | Regime::PIO)
    }

    pub fn trains_physical(self) -> bool {
        self.train_pupil() || self.train_illumination()
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::DO => "DO",
            Regime::PO => "PO",
            Regime::IO => "IO",
            Regime::PIO => "PIO",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown regime '{s}'; valid names are DO, PO, IO, PIO")))
    }
}

/// Optimization settings of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparams {
    pub digital_lr: f64,
    /// Zero disables physical updates even for trainable groups.
    pub physical_lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub noise_sigma_frac: f64,
    pub seed: u64,
    /// Add detector noise when evaluating.
    pub eval_noise: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            digital_lr: 1e-3,
            physical_lr: 5e-2,
            batch_size: 16,
            epochs: 30,
            noise_sigma_frac: 0.01,
            seed: 0,
            eval_noise: true,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.digital_lr > 0.0) || !self.digital_lr.is_finite() {
            return Err(Error::Validation(format!("digital_lr must be > 0, got {}", self.digital_lr)));
        }
        if !(self.physical_lr >= 0.0) || !self.physical_lr.is_finite() {
            return Err(Error::Validation(format!("physical_lr must be >= 0, got {}", self.physical_lr)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Validation("batch_size and epochs must be >= 1".into()));
        }
        if !(self.noise_sigma_frac >= 0.0) || !self.noise_sigma_frac.is_finite() {
            return Err(Error::Validation(format!("noise_sigma_frac must be >= 0, got {}", self.noise_sigma_frac)));
        }
        Ok(())
    }
}

/// Amplitude of the symmetry-breaking jitter on trainable groups.
pub const INIT_JITTER: f64 = 0.01;

/// Axial LED on, clear pupil; trainable groups get `±INIT_JITTER` uniform
/// jitter and are projected back into their boxes.
pub fn init_physical<R: Rng + ?Sized>(
    regime: Regime,
    config: &MicroscopeConfig,
    rng: &mut R,
) -> Result<PhysicalParams> {
    config.validate()?;
    let leds = build_led_array(config)?;
    let center =
        center_led(&leds).ok_or_else(|| Error::InvalidGeometry("LED layout has no axial LED to start from".into()))?;
    let mut p = PhysicalParams::default_for(config, leds.len(), center);
    if regime.train_illumination() {
        for w in &mut p.led_weights {
            *w += rng.random_range(-INIT_JITTER..INIT_JITTER);
        }
    }
    if regime.train_pupil() {
        let support = p.pupil_support.clone();
        for (i, v) in p.pupil.data_mut().iter_mut().enumerate() {
            if support.contains(i) {
                *v += rng.random_range(-INIT_JITTER..INIT_JITTER);
            }
        }
    }
    p.project_constraints();
    Ok(p)
}

/// Feasible copy of `params`: weights in `[-1, 1]`, pupil in `[0, 1]` on its
/// support and zero outside.
pub fn project_constraints(params: &PhysicalParams) -> PhysicalParams {
    let mut p = params.clone();
    p.project_constraints();
    p
}
