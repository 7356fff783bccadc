//! Training, fine-tuning with correction hooks, evaluation, and feature
//! extraction.
//!
//! All stochasticity comes from the optimizer seed: the shuffle order and
//! the dropout masks are drawn from one stream in a fixed order, so a run
//! is bit-reproducible. The fine-tune subset mask draws from a separate
//! derived stream, which keeps `subset_fraction = 0` runs identical to
//! plain training on the same seeds.

use crate::clarc::{ClarcHook, ClarcMode};
use crate::concepts::HookPoint;
use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::models::optim::{mask_frozen, OptState};
use crate::models::{Mode, NetworkModel, OptimizerConfig};
use crate::numerics::{Rng, Tensor};
use serde::{Deserialize, Serialize};

const SUBSET_MASK_STREAM: u64 = 0x5bae;
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSeries {
    pub name: String,
    pub accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean cross-entropy per epoch over the training forward passes.
    pub train_loss: Vec<f64>,
    /// Accuracy of the training forward passes (dropout active).
    pub train_accuracy: Vec<f64>,
    pub evals: Vec<EvalSeries>,
}

/// Stable softmax cross-entropy: mean loss and d(loss)/d(logits).
pub fn softmax_cross_entropy(logits: &Tensor, targets: &[usize]) -> (f64, Tensor) {
    let n = logits.n_rows();
    debug_assert_eq!(n, targets.len());
    let k = logits.row_len();
    let mut dlogits = logits.clone();
    let mut loss = 0.0;
    for (row, &y) in dlogits.data_mut().chunks_exact_mut(k).zip(targets) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        let p = row[y] / sum;
        // NaN must propagate to the divergence check; an exact-zero
        // probability only underflowed and keeps a finite huge loss
        loss -= if p.is_nan() {
            f64::NAN
        } else {
            p.max(f64::MIN_POSITIVE).ln()
        };
        for v in row.iter_mut() {
            *v /= sum;
        }
        row[y] -= 1.0;
        for v in row.iter_mut() {
            *v /= n as f64;
        }
    }
    (loss / n as f64, dlogits)
}

pub fn gather_batch(ds: &LabeledDataset, idxs: &[usize]) -> (Tensor, Vec<usize>) {
    let d = ds.dim();
    let mut data = Vec::with_capacity(idxs.len() * d);
    let mut targets = Vec::with_capacity(idxs.len());
    for &i in idxs {
        data.extend_from_slice(ds.sample(i));
        targets.push(ds.class_index(i));
    }
    (
        Tensor::new(vec![idxs.len(), d], data).expect("batch shape"),
        targets,
    )
}

fn argmax_lowest_tie(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of argmax-correct predictions; ties break toward the lower
/// class index.
pub fn evaluate(model: &NetworkModel, ds: &LabeledDataset, hook: Option<&ClarcHook>) -> Result<f64> {
    if ds.n() == 0 {
        return Ok(0.0);
    }
    if ds.n_classes() > model.k() {
        return Err(Error::ShapeMismatch(format!(
            "dataset has {} classes, model outputs {}",
            ds.n_classes(),
            model.k()
        )));
    }
    let idxs: Vec<usize> = (0..ds.n()).collect();
    let mut correct = 0usize;
    for chunk in idxs.chunks(EVAL_CHUNK) {
        let (x, targets) = gather_batch(ds, chunk);
        let logits = model.logits_eval(&x, hook)?;
        for (r, &y) in targets.iter().enumerate() {
            if argmax_lowest_tie(logits.row(r)) == y {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / ds.n() as f64)
}

/// Eval-mode flattened activations at `point` for every sample.
pub fn extract_features(
    model: &NetworkModel,
    ds: &LabeledDataset,
    point: HookPoint,
) -> Result<Tensor> {
    let dim = model.hook_dim(point)?;
    let idxs: Vec<usize> = (0..ds.n()).collect();
    let mut data = Vec::with_capacity(ds.n() * dim);
    for chunk in idxs.chunks(EVAL_CHUNK) {
        let (x, _) = gather_batch(ds, chunk);
        let feats = model.forward_to(point, &x)?;
        data.extend_from_slice(feats.data());
    }
    Tensor::new(vec![ds.n(), dim], data)
}

struct LoopSpec<'a> {
    hook: Option<&'a ClarcHook>,
    subset_fraction: f64,
    first_trainable: usize,
}

fn run_training(
    model: &mut NetworkModel,
    ds: &LabeledDataset,
    opt: &OptimizerConfig,
    evals: &[(&str, &LabeledDataset)],
    spec: LoopSpec<'_>,
) -> Result<TrainHistory> {
    opt.validate()?;
    if ds.n() == 0 {
        return Err(Error::EmptyInput);
    }
    let mut rng = Rng::from_seed(opt.rng_seed);
    let mut mask_rng = Rng::from_seed(opt.rng_seed).derive(SUBSET_MASK_STREAM);
    let mut state = OptState::new(opt.kind, model);
    let mut history = TrainHistory {
        train_loss: Vec::with_capacity(opt.epochs),
        train_accuracy: Vec::with_capacity(opt.epochs),
        evals: evals
            .iter()
            .map(|(name, _)| EvalSeries {
                name: (*name).to_string(),
                accuracy: Vec::with_capacity(opt.epochs),
            })
            .collect(),
    };
    let mut order: Vec<usize> = (0..ds.n()).collect();
    for epoch in 0..opt.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (batch_no, chunk) in order.chunks(opt.batch_size).enumerate() {
            let (x, targets) = gather_batch(ds, chunk);
            let routed: Option<Vec<bool>> = spec.hook.map(|_| {
                chunk
                    .iter()
                    .map(|_| mask_rng.uniform() < spec.subset_fraction)
                    .collect()
            });
            let (logits, cache) = model.forward_routed(
                &x,
                spec.hook,
                routed.as_deref(),
                Mode::Train,
                Some(&mut rng),
            )?;
            let (loss, dlogits) = softmax_cross_entropy(&logits, &targets);
            if !loss.is_finite() {
                return Err(Error::Divergence(format!(
                    "loss {loss} at epoch {epoch}, batch {batch_no}"
                )));
            }
            for (r, &y) in targets.iter().enumerate() {
                if argmax_lowest_tie(logits.row(r)) == y {
                    correct += 1;
                }
            }
            loss_sum += loss * chunk.len() as f64;
            let mut grads = model.backward(&cache, &dlogits, spec.first_trainable);
            mask_frozen(&mut grads, spec.first_trainable);
            state.apply(model, &grads);
        }
        state.end_epoch();
        history.train_loss.push(loss_sum / ds.n() as f64);
        history.train_accuracy.push(correct as f64 / ds.n() as f64);
        for (series, (_, eval_ds)) in history.evals.iter_mut().zip(evals) {
            series.accuracy.push(evaluate(model, eval_ds, None)?);
        }
    }
    Ok(history)
}

/// Minimizes softmax cross-entropy by mini-batch backprop.
pub fn train(
    model: &mut NetworkModel,
    ds: &LabeledDataset,
    opt: &OptimizerConfig,
    evals: &[(&str, &LabeledDataset)],
) -> Result<TrainHistory> {
    run_training(
        model,
        ds,
        opt,
        evals,
        LoopSpec {
            hook: None,
            subset_fraction: 0.0,
            first_trainable: 0,
        },
    )
}

/// Fine-tunes the layers strictly after the hook point; per step, a random
/// `subset_fraction` of each batch is routed through the augmentive hook.
pub fn finetune_subsequent(
    model: &mut NetworkModel,
    ds: &LabeledDataset,
    hook: &ClarcHook,
    subset_fraction: f64,
    opt: &OptimizerConfig,
    evals: &[(&str, &LabeledDataset)],
) -> Result<TrainHistory> {
    if hook.mode != ClarcMode::Augmentive {
        return Err(Error::HookMismatch(
            "subsequent fine-tuning wants an augmentive hook".into(),
        ));
    }
    if !(0.0..=1.0).contains(&subset_fraction) {
        return Err(Error::InvalidConfig(format!(
            "subset fraction {subset_fraction} outside [0,1]"
        )));
    }
    let first_trainable = (model.hook_layer_end(hook.point())? + 1) as usize;
    run_training(
        model,
        ds,
        opt,
        evals,
        LoopSpec {
            hook: Some(hook),
            subset_fraction,
            first_trainable,
        },
    )
}
