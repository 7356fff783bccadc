//! Optimizer configs and update rules (plain SGD and AdaDelta).

use crate::error::{Error, Result};
use crate::models::{Layer, NetworkModel, ParamGrads};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimKind {
    Sgd {
        lr: f64,
    },
    /// AdaDelta with rho/eps accumulators; `lr` starts at 1.0 and is
    /// multiplied by `per_epoch_lr_factor` after each epoch.
    AdaDelta {
        lr: f64,
        rho: f64,
        eps: f64,
        per_epoch_lr_factor: f64,
    },
}

impl OptimKind {
    pub fn adadelta_default() -> Self {
        OptimKind::AdaDelta {
            lr: 1.0,
            rho: 0.9,
            eps: 1e-6,
            per_epoch_lr_factor: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimKind::adadelta_default(),
            epochs: 10,
            batch_size: 32,
            rng_seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let lr = match self.kind {
            OptimKind::Sgd { lr } => lr,
            OptimKind::AdaDelta {
                lr,
                per_epoch_lr_factor,
                ..
            } => {
                if !(per_epoch_lr_factor > 0.0 && per_epoch_lr_factor <= 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "per-epoch lr factor {per_epoch_lr_factor} outside (0,1]"
                    )));
                }
                lr
            }
        };
        if lr <= 0.0 {
            return Err(Error::InvalidConfig(format!("lr {lr} <= 0")));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch size must be >= 1".into()));
        }
        Ok(())
    }
}

struct Slot {
    eg2_w: Vec<f64>,
    edx2_w: Vec<f64>,
    eg2_b: Vec<f64>,
    edx2_b: Vec<f64>,
}

/// Per-layer optimizer state; lives for one training run.
pub(crate) struct OptState {
    kind: OptimKind,
    lr: f64,
    slots: Vec<Option<Slot>>,
}

impl OptState {
    pub fn new(kind: OptimKind, model: &NetworkModel) -> Self {
        let lr = match kind {
            OptimKind::Sgd { lr } => lr,
            OptimKind::AdaDelta { lr, .. } => lr,
        };
        let slots = model
            .layers()
            .iter()
            .map(|l| {
                l.params().map(|(w, b)| Slot {
                    eg2_w: vec![0.0; w.len()],
                    edx2_w: vec![0.0; w.len()],
                    eg2_b: vec![0.0; b.len()],
                    edx2_b: vec![0.0; b.len()],
                })
            })
            .collect();
        Self { kind, lr, slots }
    }

    pub fn end_epoch(&mut self) {
        if let OptimKind::AdaDelta {
            per_epoch_lr_factor,
            ..
        } = self.kind
        {
            self.lr *= per_epoch_lr_factor;
        }
    }

    pub fn apply(&mut self, model: &mut NetworkModel, grads: &[Option<ParamGrads>]) {
        let lr = self.lr;
        match self.kind {
            OptimKind::Sgd { .. } => {
                for (layer, g) in model.layers_mut().iter_mut().zip(grads) {
                    let (Some((w, b)), Some((gw, gb))) = (layer.params_mut(), g.as_ref()) else {
                        continue;
                    };
                    for (p, g) in w.iter_mut().zip(gw) {
                        *p -= lr * g;
                    }
                    for (p, g) in b.iter_mut().zip(gb) {
                        *p -= lr * g;
                    }
                }
            }
            OptimKind::AdaDelta { rho, eps, .. } => {
                for ((layer, g), slot) in model
                    .layers_mut()
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.slots)
                {
                    let (Some((w, b)), Some((gw, gb)), Some(slot)) =
                        (layer.params_mut(), g.as_ref(), slot.as_mut())
                    else {
                        continue;
                    };
                    adadelta_update(w, gw, &mut slot.eg2_w, &mut slot.edx2_w, rho, eps, lr);
                    adadelta_update(b, gb, &mut slot.eg2_b, &mut slot.edx2_b, rho, eps, lr);
                }
            }
        }
    }
}

fn adadelta_update(
    params: &mut [f64],
    grads: &[f64],
    eg2: &mut [f64],
    edx2: &mut [f64],
    rho: f64,
    eps: f64,
    lr: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        eg2[i] = rho * eg2[i] + (1.0 - rho) * g * g;
        let dx = -((edx2[i] + eps).sqrt() / (eg2[i] + eps).sqrt()) * g;
        edx2[i] = rho * edx2[i] + (1.0 - rho) * dx * dx;
        params[i] += lr * dx;
    }
}

/// Frozen-layer bookkeeping: clears gradients below `first_trainable` so an
/// update pass cannot touch them.
pub(crate) fn mask_frozen(grads: &mut [Option<ParamGrads>], first_trainable: usize) {
    for g in grads.iter_mut().take(first_trainable) {
        *g = None;
    }
}

pub(crate) fn _layer_has_params(layer: &Layer) -> bool {
    layer.params().is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adadelta_moves_against_gradient() {
        let mut p = vec![1.0];
        let mut eg2 = vec![0.0];
        let mut edx2 = vec![0.0];
        adadelta_update(&mut p, &[2.0], &mut eg2, &mut edx2, 0.9, 1e-6, 1.0);
        assert!(p[0] < 1.0);
        // first step magnitude ~ sqrt(eps)/sqrt((1-rho)g^2) * g
        let expect = -((1e-6f64).sqrt() / (0.1f64 * 4.0 + 1e-6).sqrt()) * 2.0;
        assert!((p[0] - (1.0 + expect)).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let mut cfg = OptimizerConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.epochs = 0;
        assert!(cfg.validate().is_err());
        let bad = OptimizerConfig {
            kind: OptimKind::Sgd { lr: 0.0 },
            ..OptimizerConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
