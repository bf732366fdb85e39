use indexmap::IndexMap;

use crate::params::ParamRegistry;
use crate::tensor::Element;
use crate::train::TrainError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Step-halving learning rate: `lr0 * 0.5^floor(t / halve_every)`.
pub fn lr_schedule(lr0: f64, halve_every: u64, t: u64) -> f64 {
    lr0 * 0.5f64.powi((t / halve_every.max(1)).min(i32::MAX as u64) as i32)
}

/// Adam moment buffers, keyed by parameter name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizerState {
    pub t: u64,
    moments: IndexMap<String, Moments>,
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl OptimizerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn first_moment(&self, name: &str) -> Option<&[f64]> {
        self.moments.get(name).map(|m| m.m.as_slice())
    }

    pub fn second_moment(&self, name: &str) -> Option<&[f64]> {
        self.moments.get(name).map(|m| m.v.as_slice())
    }
}

/// One bias-corrected Adam update of every trainable parameter.
///
/// Gradients are read but not cleared. Frozen parameters are skipped.
pub fn adam_step<T: Element>(
    params: &mut ParamRegistry<T>,
    state: &mut OptimizerState,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<(), TrainError> {
    if let Some(p) = params.iter().find(|p| p.trainable && p.value.grad().is_none()) {
        return Err(TrainError::MissingGradient(p.name.clone()));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for p in params.iter_mut().filter(|p| p.trainable) {
        let n = p.value.len();
        let mom = state
            .moments
            .entry(p.name.clone())
            .or_insert_with(|| Moments { m: vec![0.0; n], v: vec![0.0; n] });
        let grad: Vec<f64> = p.value.grad().expect("checked above").iter().map(|&g| Element::to_f64(g)).collect();
        for (i, w) in p.value.data_mut().iter_mut().enumerate() {
            let g = grad[i];
            mom.m[i] = cfg.beta1 * mom.m[i] + (1.0 - cfg.beta1) * g;
            mom.v[i] = cfg.beta2 * mom.v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = mom.m[i] / c1;
            let v_hat = mom.v[i] / c2;
            let step = lr * m_hat / (v_hat.sqrt() + cfg.eps);
            *w = T::from_f64(w.to_f64() - step);
        }
    }
    Ok(())
}
