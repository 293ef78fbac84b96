use rand::Rng;

use crate::data::{split_dataset, ObjectSource, Split, SplitIndices};
use crate::error::{Error, Result};
use crate::optics::{
    build_led_array, Capture, Led, MicroscopeConfig, PhysicalParams, Propagator, PupilSupport, SpectrumWindow,
    TraceRequest,
};

/// Spectra of every sample, cut to the window the imaging plan reads, plus
/// labels and split assignment. Built once and shared across runs.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub config: MicroscopeConfig,
    pub leds: Vec<Led>,
    pub propagator: Propagator,
    pub windows: Vec<SpectrumWindow>,
    pub labels: Vec<usize>,
    pub ids: Vec<String>,
    pub splits: SplitIndices,
}

impl PreparedDataset {
    pub fn new(
        source: &dyn ObjectSource,
        config: &MicroscopeConfig,
        ratios: [f64; 3],
        split_seed: u64,
    ) -> Result<Self> {
        let splits = split_dataset(source, ratios, split_seed)?;
        Self::with_splits(source, config, splits)
    }

    pub fn with_splits(source: &dyn ObjectSource, config: &MicroscopeConfig, splits: SplitIndices) -> Result<Self> {
        config.validate()?;
        if source.grid_n() != config.grid_n {
            return Err(Error::Shape(format!(
                "dataset grid {} differs from microscope grid {}",
                source.grid_n(),
                config.grid_n
            )));
        }
        for s in Split::ALL {
            if splits.get(s).is_empty() {
                return Err(Error::Validation(format!("{} split is empty", s.name())));
            }
        }
        let leds = build_led_array(config)?;
        let propagator =
            Propagator::new(&PupilSupport::from_config(config), &leds, config.sensor_n, config.capture_mode)?;
        let mut windows = Vec::with_capacity(source.len());
        for i in 0..source.len() {
            windows.push(propagator.prepare(&source.object(i)?)?.compact());
        }
        Ok(Self {
            config: config.clone(),
            leds,
            propagator,
            windows,
            labels: (0..source.len()).map(|i| source.label(i)).collect(),
            ids: (0..source.len()).map(|i| source.sample_id(i).to_string()).collect(),
            splits,
        })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Sensor image of sample `i`.
    pub fn capture<R: Rng + ?Sized>(
        &self,
        i: usize,
        params: &PhysicalParams,
        request: TraceRequest,
        noise_sigma_frac: f64,
        rng: &mut R,
    ) -> Result<Capture> {
        self.propagator.capture(&self.windows[i], params, request, noise_sigma_frac, rng)
    }
}
