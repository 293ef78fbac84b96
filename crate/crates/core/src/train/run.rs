use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use super::prepare::PreparedDataset;
use super::regime::{init_physical, Hyperparams, Regime};
use crate::data::{stream_rng, Split};
use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamConfig, AdamState, DigitalModel, ModelAdam};
use crate::optics::{add_detector_noise, CaptureMode, PhysicalParams, RealGrid, TraceRequest};

/// Called during training; every method has a no-op default.
pub trait TrainObserver {
    /// Once, with the physical layer before any update.
    fn on_start(&mut self, _initial: &PhysicalParams) {}
    /// After each optimizer step and projection.
    fn on_step(&mut self, _info: &StepInfo<'_>) {}
    fn on_epoch(&mut self, _info: &EpochInfo) {}
}

impl TrainObserver for () {}

pub struct StepInfo<'a> {
    pub step: usize,
    pub epoch: usize,
    /// Mean loss over the batch.
    pub loss: f64,
    pub params: &'a PhysicalParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochInfo {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub train: Metrics,
    pub val: Metrics,
    pub test: Metrics,
}

/// Outcome of one (regime, seed) run, restored to its best-validation epoch.
#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub regime: Regime,
    pub hyper: Hyperparams,
    pub model: DigitalModel,
    pub params: PhysicalParams,
    pub initial_params: PhysicalParams,
    /// Zero-based epoch whose checkpoint was restored.
    pub best_epoch: usize,
    pub metrics: SplitMetrics,
    pub history: Vec<EpochInfo>,
    pub eval_noise_seed: u64,
}

/// Seed of the fixed evaluation-noise realization for a run seed.
pub fn eval_noise_seed(seed: u64) -> u64 {
    seed ^ 0xE7A1_5EED_0000_0000
}

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2 << 56;
const STREAM_NOISE: u64 = 3 << 56;

/// Largest per-LED image cache built for illumination-only training.
const BASIS_BUDGET_BYTES: usize = 3 << 30;

/// Noise-free images reused across epochs.
enum CaptureCache {
    /// Whole captures, while the physical layer is fixed.
    Fixed(Vec<Option<(RealGrid, RealGrid)>>),
    /// Single-LED sensor images under a fixed pupil. Captures and weight
    /// gradients are then linear combinations of them.
    Basis { n_leds: usize, slots: Vec<Option<Vec<f32>>> },
}

impl CaptureCache {
    fn for_run(data: &PreparedDataset, physical_on: bool, train_p: bool) -> Option<Self> {
        if !physical_on {
            return Some(Self::Fixed(vec![None; data.len()]));
        }
        let n_leds = data.leds.len();
        let bytes = data.len() * n_leds * data.config.sensor_n.pow(2) * std::mem::size_of::<f32>();
        (!train_p && bytes <= BASIS_BUDGET_BYTES).then(|| Self::Basis { n_leds, slots: vec![None; data.len()] })
    }

    fn basis(&mut self, data: &PreparedDataset, i: usize, params: &PhysicalParams) -> Option<&[f32]> {
        let Self::Basis { n_leds, slots } = self else { return None };
        let basis = slots[i].get_or_insert_with(|| {
            (0..*n_leds)
                .flat_map(|l| data.propagator.single_led_image(&data.windows[i], &params.pupil, l).data().to_vec())
                .map(|v| v as f32)
                .collect()
        });
        Some(basis)
    }

    fn noise_free(
        &mut self,
        data: &PreparedDataset,
        i: usize,
        params: &PhysicalParams,
        rng: &mut impl rand::Rng,
    ) -> Result<(RealGrid, RealGrid)> {
        let n = data.config.sensor_n;
        let mode = data.propagator.mode();
        if let Some(basis) = self.basis(data, i, params) {
            let mut pos = vec![0.0; n * n];
            let mut neg = vec![0.0; n * n];
            for (&w, b) in params.led_weights.iter().zip(basis.chunks_exact(n * n)) {
                let (acc, scale) = match mode {
                    CaptureMode::Split if w < 0.0 => (&mut neg, -w),
                    _ => (&mut pos, w),
                };
                if scale != 0.0 {
                    acc.iter_mut().zip(b).for_each(|(a, &v)| *a += scale * v as f64);
                }
            }
            return Ok((RealGrid::new(n, pos)?, RealGrid::new(n, neg)?));
        }
        let Self::Fixed(slots) = self else { unreachable!("basis handled above") };
        if slots[i].is_none() {
            let cap = data.capture(i, params, TraceRequest::default(), 0.0, rng)?;
            slots[i] = Some((cap.positive, cap.negative));
        }
        Ok(slots[i].clone().expect("filled above"))
    }

    fn image(
        &mut self,
        data: &PreparedDataset,
        i: usize,
        params: &PhysicalParams,
        noise: f64,
        rng: &mut impl rand::Rng,
    ) -> Result<RealGrid> {
        let (pos, neg) = self.noise_free(data, i, params, rng)?;
        let a = add_detector_noise(&pos, noise, rng)?;
        let b = add_detector_noise(&neg, noise, rng)?;
        RealGrid::new(a.n(), a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect())
    }

    /// Gradient of `<upstream, image>` with respect to the LED weights, noise
    /// held constant. Basis caches only.
    fn weight_grad(
        &mut self,
        data: &PreparedDataset,
        i: usize,
        params: &PhysicalParams,
        upstream: &RealGrid,
    ) -> Vec<f64> {
        let n2 = upstream.data().len();
        let basis = self.basis(data, i, params).expect("weight gradients need a basis cache");
        basis.chunks_exact(n2).map(|b| b.iter().zip(upstream.data()).map(|(&v, g)| v as f64 * g).sum()).collect()
    }
}

fn predict_split(
    model: &DigitalModel,
    params: &PhysicalParams,
    data: &PreparedDataset,
    split: Split,
    noise: f64,
    noise_seed: u64,
    mut cache: Option<&mut CaptureCache>,
) -> Result<Metrics> {
    let idx = data.splits.get(split);
    if idx.is_empty() {
        return Err(Error::Validation(format!("{} split is empty", split.name())));
    }
    let mut pairs = Vec::with_capacity(idx.len());
    for &i in idx {
        let mut rng = stream_rng(noise_seed, i as u64);
        let image = match cache.as_deref_mut() {
            Some(c) => c.image(data, i, params, noise, &mut rng)?,
            None => data.capture(i, params, TraceRequest::default(), noise, &mut rng)?.image,
        };
        pairs.push((data.labels[i], model.predict(&image)?));
    }
    Ok(Metrics::from_predictions(pairs))
}

/// Accuracy, sensitivity and specificity of `model` behind `params` on one
/// split. Noise, when on, comes from a fixed per-sample realization of
/// `noise_seed`.
pub fn evaluate(
    model: &DigitalModel,
    params: &PhysicalParams,
    data: &PreparedDataset,
    split: Split,
    noise_sigma_frac: f64,
    noise_seed: u64,
) -> Result<Metrics> {
    predict_split(model, params, data, split, noise_sigma_frac, noise_seed, None)
}

pub fn train_regime(regime: Regime, data: &PreparedDataset, hyper: &Hyperparams) -> Result<TrainedRun> {
    train_regime_observed(regime, data, hyper, &mut ())
}

/// Trains classifier and (per `regime`) physical layer end to end, then
/// restores the epoch with the best validation accuracy (earliest on ties).
pub fn train_regime_observed(
    regime: Regime,
    data: &PreparedDataset,
    hyper: &Hyperparams,
    observer: &mut dyn TrainObserver,
) -> Result<TrainedRun> {
    hyper.validate()?;
    for s in Split::ALL {
        if data.splits.get(s).is_empty() {
            return Err(Error::Validation(format!("{} split is empty", s.name())));
        }
    }
    let config = &data.config;
    let mut params = init_physical(regime, config, &mut stream_rng(hyper.seed, STREAM_INIT))?;
    let initial_params = params.clone();
    observer.on_start(&initial_params);
    let mut model = DigitalModel::init(config.sensor_n, hyper.seed)?;
    let mut digital_opt = ModelAdam::new(&model, AdamConfig::new(hyper.digital_lr)?)?;

    let physical_on = regime.trains_physical() && hyper.physical_lr > 0.0;
    let (train_w, train_p) = (physical_on && regime.train_illumination(), physical_on && regime.train_pupil());
    let phys_cfg = if physical_on { Some(AdamConfig::new(hyper.physical_lr)?) } else { None };
    let mut w_state = AdamState::new(params.led_weights.len());
    let mut p_state = AdamState::new(params.pupil.data().len());
    let support = params.pupil_support.clone();

    let noise = hyper.noise_sigma_frac;
    let eval_noise = if hyper.eval_noise { noise } else { 0.0 };
    let eval_seed = eval_noise_seed(hyper.seed);
    // one cache serves training and evaluation: entries are noise-free
    let mut cache = CaptureCache::for_run(data, physical_on, train_p);

    let mut order: Vec<usize> = data.splits.train.clone();
    let mut best: Option<(f64, usize, DigitalModel, PhysicalParams)> = None;
    let mut history = Vec::with_capacity(hyper.epochs);
    let mut step = 0usize;
    let request = TraceRequest { all_leds: train_w };

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut stream_rng(hyper.seed, STREAM_SHUFFLE | epoch as u64));
        let mut epoch_loss = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            model.zero_grad();
            let mut d_w = vec![0.0; params.led_weights.len()];
            let mut d_p = vec![0.0; params.pupil.data().len()];
            let mut batch_loss = 0.0;
            for &i in batch {
                let mut rng = stream_rng(hyper.seed, STREAM_NOISE | (epoch as u64) << 32 | i as u64);
                let diverged = |detail: String| Error::Diverged { step, detail };
                if let Some(cache) = cache.as_mut() {
                    let image = cache.image(data, i, &params, noise, &mut rng)?;
                    let (loss, g) = model.backward_with(&image, data.labels[i], train_w).map_err(|e| {
                        diverged(format!("{e}; digital_lr {}, physical_lr {}", hyper.digital_lr, hyper.physical_lr))
                    })?;
                    if let Some(g) = g {
                        for (a, b) in d_w.iter_mut().zip(cache.weight_grad(data, i, &params, &g)) {
                            *a += b;
                        }
                    }
                    batch_loss += loss;
                    continue;
                }
                let cap = data.capture(i, &params, request, noise, &mut rng)?;
                let (loss, g) = model.backward_with(&cap.image, data.labels[i], true).map_err(|e| {
                    diverged(format!("{e}; digital_lr {}, physical_lr {}", hyper.digital_lr, hyper.physical_lr))
                })?;
                let g = g.expect("input gradient requested");
                let pg = data.propagator.backward(&data.windows[i], &params, &cap.trace, &g, train_w, train_p)?;
                for (a, b) in d_w.iter_mut().zip(&pg.d_weights) {
                    *a += b;
                }
                for (a, b) in d_p.iter_mut().zip(pg.d_pupil.data()) {
                    *a += b;
                }
                batch_loss += loss;
            }
            let inv = 1.0 / batch.len() as f64;
            batch_loss *= inv;
            model.scale_grads(inv);
            let dn = model.grad_norm_sq().sqrt();
            let pn = (d_w.iter().chain(&d_p).map(|v| v * v).sum::<f64>()).sqrt() * inv;
            if !batch_loss.is_finite() || !dn.is_finite() || !pn.is_finite() {
                return Err(Error::Diverged {
                    step,
                    detail: format!(
                        "loss {batch_loss}, digital grad norm {dn}, physical grad norm {pn}, digital_lr {}, physical_lr {}",
                        hyper.digital_lr, hyper.physical_lr
                    ),
                });
            }
            digital_opt.step(&mut model)?;
            if let Some(cfg) = &phys_cfg {
                if train_w {
                    d_w.iter_mut().for_each(|v| *v *= inv);
                    adam_step(&mut params.led_weights, &d_w, &mut w_state, cfg)?;
                    for w in &mut params.led_weights {
                        *w = w.clamp(-1.0, 1.0);
                    }
                }
                if train_p {
                    d_p.iter_mut().for_each(|v| *v *= inv);
                    adam_step(params.pupil.data_mut(), &d_p, &mut p_state, cfg)?;
                    for (k, v) in params.pupil.data_mut().iter_mut().enumerate() {
                        *v = if support.contains(k) { v.clamp(0.0, 1.0) } else { 0.0 };
                    }
                }
            }
            epoch_loss += batch_loss * batch.len() as f64;
            observer.on_step(&StepInfo { step, epoch, loss: batch_loss, params: &params });
            step += 1;
        }
        let val = predict_split(&model, &params, data, Split::Val, eval_noise, eval_seed, cache.as_mut())?;
        let info = EpochInfo { epoch, train_loss: epoch_loss / order.len() as f64, val_accuracy: val.accuracy };
        observer.on_epoch(&info);
        history.push(info);
        if best.as_ref().is_none_or(|b| val.accuracy > b.0) {
            best = Some((val.accuracy, epoch, model.clone(), params.clone()));
        }
    }
    let (_, best_epoch, model, params) = best.expect("at least one epoch");
    let mut eval = |s| predict_split(&model, &params, data, s, eval_noise, eval_seed, cache.as_mut());
    let metrics = SplitMetrics { train: eval(Split::Train)?, val: eval(Split::Val)?, test: eval(Split::Test)? };
    Ok(TrainedRun {
        regime,
        hyper: hyper.clone(),
        model,
        params,
        initial_params,
        best_epoch,
        metrics,
        history,
        eval_noise_seed: eval_seed,
    })
}
