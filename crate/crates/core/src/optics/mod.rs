//! Fourier-optics forward model of an LED-array microscope.
//!
//! Each LED illuminates the thin sample with a tilted plane wave, displacing
//! the object spectrum relative to the pupil. The detector records the
//! weighted incoherent sum of the per-LED coherent intensities, integrated
//! over sensor pixels and corrupted by Gaussian read noise.

pub mod export;
pub mod fft;
mod forward;
mod geometry;
mod grid;
mod params;
mod propagate;

pub use fft::{fft2, ifft2};
pub use forward::{add_detector_noise, coherent_intensity, downsample_to_sensor, forward_capture};
pub use geometry::{
    build_led_array, center_led, CaptureMode, FieldKind, Led, LedRing, MicroscopeConfig, DESK_PUPIL_RADIUS_PX,
};
pub use grid::{ComplexField, Plane, RealGrid};
pub use params::{PhysicalParams, PupilSupport};
pub use propagate::{Capture, CaptureTrace, PhysicalGradients, Propagator, SpectrumWindow, TraceRequest};
