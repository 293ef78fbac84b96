//! Simulation and end-to-end training of an LED-array microscope whose
//! illumination pattern and pupil transmission are optimized jointly with a
//! small CNN classifier.
//!
//! - [`optics`]: Fourier-optics image formation and pattern export.
//! - [`grad`]: analytic physical-layer gradients and their certification.
//! - [`nn`]: the digital classifier, Adam and checkpoints.
//! - [`data`]: synthetic shapes, splits and the dataset format.
//! - [`train`]: the DO/PO/IO/PIO regimes, metrics and sweeps.
//! - [`cli`]: the `lsn` command line.

pub mod cli;
pub mod data;
pub mod error;
pub mod grad;
pub mod nn;
pub mod optics;
pub mod train;

pub use error::{Error, Result};
