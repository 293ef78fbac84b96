use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{sha256_hex, SyntheticParams};
use crate::error::{Error, Result};
use crate::optics::MicroscopeConfig;
use crate::train::{Hyperparams, Regime};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// Where `gen-data` writes and the other commands read the dataset.
    pub dir: PathBuf,
    pub synthetic: SyntheticParams,
    /// Train, validation and test fractions.
    pub split: [f64; 3],
    pub split_seed: u64,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("lsn-data"),
            synthetic: SyntheticParams::desk_scale(0),
            split: [0.7, 0.15, 0.15],
            split_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub regimes: Vec<Regime>,
    /// Seeds `train.seed .. train.seed + n_seeds`.
    pub n_seeds: usize,
    pub workers: usize,
    pub out_dir: PathBuf,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { regimes: Regime::ALL.to_vec(), n_seeds: 5, workers: 1, out_dir: PathBuf::from("lsn-runs") }
    }
}

/// Everything an experiment depends on. Unknown keys are rejected at every
/// level; omitted sections take the desk-scale defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "MicroscopeConfig::desk_scale")]
    pub microscope: MicroscopeConfig,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub train: Hyperparams,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            microscope: MicroscopeConfig::desk_scale(),
            data: DataSection::default(),
            train: Hyperparams::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`; relative dataset and output paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        let mut cfg = Self::from_toml(&fs::read_to_string(path)?)?;
        if let Some(base) = path.parent() {
            if cfg.data.dir.is_relative() {
                cfg.data.dir = base.join(&cfg.data.dir);
            }
            if cfg.sweep.out_dir.is_relative() {
                cfg.sweep.out_dir = base.join(&cfg.sweep.out_dir);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let config_err = |e: Error| Error::Config(e.to_string());
        self.microscope.validate().map_err(config_err)?;
        self.data.synthetic.validate().map_err(config_err)?;
        self.train.validate().map_err(config_err)?;
        if self.data.synthetic.grid_n != self.microscope.grid_n {
            return Err(Error::Config(format!(
                "data.synthetic.grid_n {} differs from microscope.grid_n {}",
                self.data.synthetic.grid_n, self.microscope.grid_n
            )));
        }
        let sum: f64 = self.data.split.iter().sum();
        if self.data.split.iter().any(|f| !(*f >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "data.split must be non-negative and sum to 1, got {:?}",
                self.data.split
            )));
        }
        if self.sweep.regimes.is_empty() {
            return Err(Error::Config("sweep.regimes is empty".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical serialization, excluding paths so that a
    /// relocated experiment keeps its identity.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.data.dir = PathBuf::new();
        canon.sweep.out_dir = PathBuf::new();
        sha256_hex(serde_json::to_string(&canon).expect("config serializes").as_bytes())
    }

    /// Provenance embedded in every artifact.
    pub fn meta(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("config_hash".to_string(), self.hash()),
            ("tool_version".to_string(), TOOL_VERSION.to_string()),
        ])
    }
}
