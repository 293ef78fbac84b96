//! Finite-difference certification of the physical-layer gradients on small
//! random instances, including the full chain through the classifier.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{finite_difference_check_at, grad_wrt_pupil, grad_wrt_weights};
use crate::error::Result;
use crate::nn::DigitalModel;
use crate::optics::{
    build_led_array, fft2, forward_capture, ComplexField, Led, MicroscopeConfig, PhysicalParams, Plane, PupilSupport,
    RealGrid,
};

pub const PHYSICAL_TOLERANCE: f64 = 1e-4;
pub const END_TO_END_TOLERANCE: f64 = 1e-3;
pub const CSV_HEADER: &str = "group,instance,max_rel_error,tolerance,worst_coord,pass";

/// A random micro-scale problem: object, physical parameters and a fixed
/// upstream gradient on the sensor.
#[derive(Debug, Clone)]
pub struct GradInstance {
    pub config: MicroscopeConfig,
    pub leds: Vec<Led>,
    pub object: ComplexField,
    pub spectrum: ComplexField,
    pub params: PhysicalParams,
    pub upstream: RealGrid,
}

impl GradInstance {
    /// Random object, weights in `[-1, 1]`, pupil in `[0.05, 0.95]` on its support.
    pub fn random(config: &MicroscopeConfig, seed: u64) -> Result<Self> {
        let leds = build_led_array(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = config.grid_n;
        let object = ComplexField::new(
            n,
            (0..n * n)
                .map(|_| Complex64::from_polar(rng.random_range(0.0..1.0), rng.random_range(-3.0..3.0)))
                .collect(),
            Plane::Object,
        )?;
        let spectrum = fft2(&object)?;
        let mut params = PhysicalParams::clear(
            (0..leds.len()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            PupilSupport::from_config(config),
        );
        for v in params.pupil.data_mut().iter_mut().filter(|v| **v > 0.0) {
            *v = rng.random_range(0.05..0.95);
        }
        let upstream = RealGrid::from_fn(config.sensor_n, |_, _| rng.random_range(-1.0..1.0));
        Ok(Self { config: config.clone(), leds, object, spectrum, params, upstream })
    }

    /// Noise-free sensor image under `params`.
    pub fn image(&self, params: &PhysicalParams) -> Result<RealGrid> {
        forward_capture(&self.object, params, &self.config, 0.0, &mut ChaCha8Rng::seed_from_u64(0))
    }

    /// `⟨I′, upstream⟩`, whose gradient is the upstream-weighted one.
    pub fn linear_objective(&self, params: &PhysicalParams) -> f64 {
        self.image(params).map(|img| img.dot(&self.upstream)).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckGroup {
    Weights,
    Pupil,
    EndToEnd,
}

impl CheckGroup {
    pub fn name(self) -> &'static str {
        match self {
            CheckGroup::Weights => "weights",
            CheckGroup::Pupil => "pupil",
            CheckGroup::EndToEnd => "end_to_end",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub group: CheckGroup,
    pub instance: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
    /// Parameter index with the largest error.
    pub worst_coord: usize,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct GradCheckReport {
    pub rows: Vec<CheckRow>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(CheckRow::passed)
    }

    /// Row with the largest error-to-tolerance ratio.
    pub fn worst(&self) -> Option<&CheckRow> {
        self.rows.iter().max_by(|a, b| (a.max_rel_error / a.tolerance).total_cmp(&(b.max_rel_error / b.tolerance)))
    }

    /// Largest error within one group.
    pub fn group_max(&self, group: CheckGroup) -> Option<f64> {
        self.rows.iter().filter(|r| r.group == group).map(|r| r.max_rel_error).reduce(f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{:.3e},{:.0e},{},{}",
                r.group.name(),
                r.instance,
                r.max_rel_error,
                r.tolerance,
                r.worst_coord,
                r.passed()
            );
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub config: MicroscopeConfig,
    pub instances: usize,
    pub seed: u64,
    /// Pupil pixels probed per instance.
    pub pupil_coords: usize,
    pub eps: f64,
    /// Step for the end-to-end check. Smaller than `eps` so that the
    /// difference rarely straddles a ReLU or max-pool switch.
    pub end_to_end_eps: f64,
    /// Multiplies every analytic gradient before comparison; 1 for a real
    /// check, anything else injects a fault the suite must catch.
    pub fault_scale: f64,
    pub end_to_end: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            config: MicroscopeConfig::micro(),
            instances: 20,
            seed: 0,
            pupil_coords: 10,
            eps: 1e-4,
            end_to_end_eps: 1e-6,
            fault_scale: 1.0,
            end_to_end: true,
        }
    }
}

fn worst_of<F>(mut f: F, x: &[f64], analytic: &[f64], eps: f64, coords: &[usize]) -> Result<(f64, usize)>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut worst = (0.0, coords.first().copied().unwrap_or(0));
    for &i in coords {
        let err = finite_difference_check_at(&mut f, x, analytic, eps, &[i])?;
        if err > worst.0 {
            worst = (err, i);
        }
    }
    Ok(worst)
}

/// Runs the weight, pupil and (optionally) end-to-end checks on
/// `opts.instances` random instances.
pub fn certify(opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let mut report = GradCheckReport::default();
    let scale = |g: &[f64]| g.iter().map(|v| v * opts.fault_scale).collect::<Vec<f64>>();
    for k in 0..opts.instances {
        let seed = opts.seed.wrapping_add(k as u64);
        let inst = GradInstance::random(&opts.config, seed)?;

        let gw = scale(&grad_wrt_weights(&inst.spectrum, &inst.params.pupil, &inst.leds, &inst.upstream)?);
        let coords: Vec<usize> = (0..gw.len()).collect();
        let (err, at) = worst_of(
            |w| {
                let mut p = inst.params.clone();
                p.led_weights.copy_from_slice(w);
                inst.linear_objective(&p)
            },
            &inst.params.led_weights,
            &gw,
            opts.eps,
            &coords,
        )?;
        report.rows.push(CheckRow {
            group: CheckGroup::Weights,
            instance: k,
            max_rel_error: err,
            tolerance: PHYSICAL_TOLERANCE,
            worst_coord: at,
        });

        let gp = scale(grad_wrt_pupil(&inst.spectrum, &inst.params, &inst.leds, &inst.upstream)?.data());
        let support: Vec<usize> = (0..gp.len()).filter(|&i| inst.params.pupil_support.contains(i)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
        let coords: Vec<usize> =
            (0..opts.pupil_coords.min(support.len())).map(|_| support[rng.random_range(0..support.len())]).collect();
        let (err, at) = worst_of(
            |p| {
                let mut q = inst.params.clone();
                q.pupil.data_mut().copy_from_slice(p);
                inst.linear_objective(&q)
            },
            inst.params.pupil.data(),
            &gp,
            opts.eps,
            &coords,
        )?;
        // outside the support the gradient must be exactly zero
        let (err, at) = match (0..gp.len()).find(|&i| !inst.params.pupil_support.contains(i) && gp[i] != 0.0) {
            Some(i) => (f64::INFINITY, i),
            None => (err, at),
        };
        report.rows.push(CheckRow {
            group: CheckGroup::Pupil,
            instance: k,
            max_rel_error: err,
            tolerance: PHYSICAL_TOLERANCE,
            worst_coord: at,
        });

        if opts.end_to_end {
            let (err, at) = end_to_end(&inst, seed, opts)?;
            report.rows.push(CheckRow {
                group: CheckGroup::EndToEnd,
                instance: k,
                max_rel_error: err,
                tolerance: END_TO_END_TOLERANCE,
                worst_coord: at,
            });
        }
    }
    Ok(report)
}

/// Cross-entropy of a randomly initialized classifier behind the physical
/// layer, differentiated per LED weight through the whole chain.
fn end_to_end(inst: &GradInstance, seed: u64, opts: &GradCheckOptions) -> Result<(f64, usize)> {
    let mut model = DigitalModel::init(inst.config.sensor_n, seed)?;
    let label = (seed % 2) as usize;
    let (_, upstream) = model.backward(&inst.image(&inst.params)?, label)?;
    let g = grad_wrt_weights(&inst.spectrum, &inst.params.pupil, &inst.leds, &upstream)?;
    let g: Vec<f64> = g.iter().map(|v| v * opts.fault_scale).collect();
    let loss = |w: &[f64]| {
        let mut p = inst.params.clone();
        p.led_weights.copy_from_slice(w);
        let probs = inst.image(&p).and_then(|img| model.forward(&img));
        probs.map(|q| -q[label].ln()).unwrap_or(f64::NAN)
    };
    let coords: Vec<usize> = (0..g.len()).collect();
    worst_of(loss, &inst.params.led_weights, &g, opts.end_to_end_eps, &coords)
}
