//! Central-difference validation of the manual backprop.

use crate::error::Result;
use crate::models::train::softmax_cross_entropy;
use crate::models::{Aux, Layer, Mode, NetworkModel};
use crate::numerics::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    /// max |g_bp - g_fd| / max(|g_bp|, |g_fd|, 1e-8) over all parameters.
    pub max_rel_error: f64,
    /// Distance of the nearest ReLU input to zero / maxpool margin to a tie.
    /// The check is only meaningful when this clears the kink tolerance.
    pub kink_distance: f64,
    pub params_checked: usize,
}

fn kink_distance(model: &NetworkModel, cache: &crate::models::ForwardCache) -> f64 {
    let mut dist = f64::INFINITY;
    for (i, layer) in model.layers().iter().enumerate() {
        match layer {
            Layer::Relu => {
                for &v in cache.layer_inputs[i].data() {
                    dist = dist.min(v.abs());
                }
            }
            Layer::MaxPool2x2 => {
                let (c, h, w) = model.shapes()[i];
                let x = &cache.layer_inputs[i];
                for r in 0..x.n_rows() {
                    let xi = x.row(r);
                    for ch in 0..c {
                        for oy in 0..h / 2 {
                            for ox in 0..w / 2 {
                                let base = ch * h * w + 2 * oy * w + 2 * ox;
                                let mut vals = [
                                    xi[base],
                                    xi[base + 1],
                                    xi[base + w],
                                    xi[base + w + 1],
                                ];
                                vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
                                // windows whose maximum is a clamped zero are
                                // locally constant, not near a kink; the relu
                                // scan covers the clamp boundaries themselves
                                if vals[0] > 0.0 {
                                    dist = dist.min(vals[0] - vals[1]);
                                }
                            }
                        }
                    }
                }
            }
            _ => {}
        }
    }
    dist
}

/// Compares backprop gradients against central differences of the loss in
/// eval mode (dropout off). `epsilon` is the finite-difference step.
pub fn gradient_check(
    model: &NetworkModel,
    x: &Tensor,
    targets: &[usize],
    epsilon: f64,
) -> Result<GradCheckReport> {
    let mut work = model.clone();
    let (logits, cache) = work.forward(x, None, Mode::Eval, None)?;
    let kink = kink_distance(&work, &cache);
    let (_, dlogits) = softmax_cross_entropy(&logits, targets);
    let grads = work.backward(&cache, &dlogits, 0);
    let g_bp = work.flatten_grads(&grads);
    debug_assert!(cache.aux.iter().all(|a| matches!(a, Aux::None | Aux::Argmax(_))));

    let loss_of = |m: &NetworkModel| -> Result<f64> {
        let l = m.logits_eval(x, None)?;
        Ok(softmax_cross_entropy(&l, targets).0)
    };

    let mut max_rel = 0.0f64;
    let count = work.param_count();
    for (idx, &bp) in g_bp.iter().enumerate().take(count) {
        let original = work.with_param_mut(idx, |p| *p);
        work.with_param_mut(idx, |p| *p = original + epsilon);
        let plus = loss_of(&work)?;
        work.with_param_mut(idx, |p| *p = original - epsilon);
        let minus = loss_of(&work)?;
        work.with_param_mut(idx, |p| *p = original);
        let fd = (plus - minus) / (2.0 * epsilon);
        let rel = (bp - fd).abs() / bp.abs().max(fd.abs()).max(1e-8);
        max_rel = max_rel.max(rel);
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        kink_distance: kink,
        params_checked: count,
    })
}

/// Small layer-type-complete conv architecture for gradient validation:
/// same layer sequence as the desk classifier on a 10x10 canvas.
pub fn gradcheck_conv_model(seed: u64) -> NetworkModel {
    NetworkModel::conv_classifier_custom((1, 10, 10), 4, 8, 16, 4, seed).expect("static arch")
}

pub fn gradcheck_dense_model(seed: u64) -> NetworkModel {
    NetworkModel::mlp(12, &[16, 8], 4, seed).expect("static arch")
}
