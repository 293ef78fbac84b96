use super::model::DigitalModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64) -> Result<Self> {
        let cfg = Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Validation(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::Validation("Adam betas must lie in [0, 1) and eps > 0".into()));
        }
        Ok(())
    }
}

/// Moment estimates for one parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { t: 0, m: vec![0.0; len], v: vec![0.0; len] }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    cfg.validate()?;
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "Adam sizes differ: params {}, grads {}, state {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let c1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let c2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        *p -= cfg.lr * (*m / c1) / ((*v / c2).sqrt() + cfg.eps);
    }
    Ok(())
}

/// Adam over every tensor of a [`DigitalModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelAdam {
    pub config: AdamConfig,
    states: Vec<AdamState>,
}

impl ModelAdam {
    pub fn new(model: &DigitalModel, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, states: model.params().iter().map(|t| AdamState::new(t.len())).collect() })
    }

    pub fn step(&mut self, model: &mut DigitalModel) -> Result<()> {
        for (t, st) in model.params_mut().iter_mut().zip(&mut self.states) {
            let (data, grad) = t.data_and_grad_mut();
            let grad = grad.ok_or_else(|| Error::Validation("parameter without gradient buffer".into()))?;
            adam_step(data, grad, st, &self.config)?;
        }
        Ok(())
    }
}
