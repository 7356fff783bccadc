//! From-scratch trainable classifiers with manual backprop, correction
//! hooks, feature extraction, and a finite-difference gradient checker.

mod checkpoint;
mod gradcheck;
mod layers;
mod optim;
mod train;

pub use checkpoint::{load_model, save_model};
pub use gradcheck::{gradcheck_conv_model, gradcheck_dense_model, gradient_check, GradCheckReport};
pub use layers::{Aux, Layer, ParamGrads, Shape3};
pub use optim::{OptimKind, OptimizerConfig};
pub use train::{
    evaluate, extract_features, finetune_subsequent, gather_batch, softmax_cross_entropy, train,
    EvalSeries, TrainHistory,
};

use crate::clarc::ClarcHook;
use crate::concepts::HookPoint;
use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};
use layers::shape_len;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Layer description without parameters, used by the builders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    Dense(usize),
    Relu,
    Conv2d(usize),
    MaxPool2x2,
    Dropout(f64),
    Flatten,
}

/// An ordered feed-forward network over (C,H,W)-shaped inputs ending in
/// K logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    layers: Vec<Layer>,
    /// Activation shapes; `shapes[i]` feeds layer `i`, `shapes[len]` is the
    /// logit shape.
    shapes: Vec<Shape3>,
    input_shape: Shape3,
    seed: u64,
}

pub struct ForwardCache {
    /// Input to each layer (post-hook when a hook precedes the layer).
    pub layer_inputs: Vec<Tensor>,
    pub aux: Vec<Aux>,
}

impl NetworkModel {
    pub fn build(input_shape: Shape3, specs: &[LayerSpec], seed: u64) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidConfig("network needs at least one layer".into()));
        }
        let mut layers = Vec::with_capacity(specs.len());
        let mut shapes = vec![input_shape];
        for spec in specs {
            let in_shape = *shapes.last().unwrap();
            let layer = match spec {
                LayerSpec::Dense(out) => Layer::Dense {
                    w: vec![0.0; shape_len(in_shape) * out],
                    b: vec![0.0; *out],
                    in_dim: shape_len(in_shape),
                    out_dim: *out,
                },
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::Conv2d(out_ch) => Layer::Conv2d {
                    w: vec![0.0; out_ch * in_shape.0 * 9],
                    b: vec![0.0; *out_ch],
                    in_ch: in_shape.0,
                    out_ch: *out_ch,
                },
                LayerSpec::MaxPool2x2 => Layer::MaxPool2x2,
                LayerSpec::Dropout(p) => {
                    if !(0.0..1.0).contains(p) {
                        return Err(Error::InvalidConfig(format!("dropout p {p} outside [0,1)")));
                    }
                    Layer::Dropout { p: *p }
                }
                LayerSpec::Flatten => Layer::Flatten,
            };
            shapes.push(layer.out_shape(in_shape)?);
            layers.push(layer);
        }
        let mut model = Self {
            layers,
            shapes,
            input_shape,
            seed,
        };
        let mut rng = Rng::from_seed(seed);
        for layer in &mut model.layers {
            layer.init_params(&mut rng);
        }
        Ok(model)
    }

    /// Two ReLU-activated conv layers, max-pooling, dropout after the pool
    /// and after the first fully-connected layer.
    pub fn conv_classifier(input_shape: Shape3, k: usize, seed: u64) -> Result<Self> {
        Self::conv_classifier_custom(input_shape, 8, 16, 64, k, seed)
    }

    pub fn conv_classifier_custom(
        input_shape: Shape3,
        c1: usize,
        c2: usize,
        hidden: usize,
        k: usize,
        seed: u64,
    ) -> Result<Self> {
        Self::build(
            input_shape,
            &[
                LayerSpec::Conv2d(c1),
                LayerSpec::Relu,
                LayerSpec::Conv2d(c2),
                LayerSpec::Relu,
                LayerSpec::MaxPool2x2,
                LayerSpec::Dropout(0.25),
                LayerSpec::Flatten,
                LayerSpec::Dense(hidden),
                LayerSpec::Relu,
                LayerSpec::Dropout(0.5),
                LayerSpec::Dense(k),
            ],
            seed,
        )
    }

    pub fn mlp(input_dim: usize, hidden: &[usize], k: usize, seed: u64) -> Result<Self> {
        let mut specs = Vec::new();
        for &h in hidden {
            specs.push(LayerSpec::Dense(h));
            specs.push(LayerSpec::Relu);
        }
        specs.push(LayerSpec::Dense(k));
        Self::build((1, 1, input_dim), &specs, seed)
    }

    pub fn linear(input_dim: usize, k: usize, seed: u64) -> Result<Self> {
        Self::mlp(input_dim, &[], k, seed)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn shapes(&self) -> &[Shape3] {
        &self.shapes
    }

    pub fn input_shape(&self) -> Shape3 {
        self.input_shape
    }

    pub fn input_dim(&self) -> usize {
        shape_len(self.input_shape)
    }

    pub fn k(&self) -> usize {
        shape_len(*self.shapes.last().unwrap())
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Index of the last layer at or before the hook point; -1 for input.
    pub fn hook_layer_end(&self, point: HookPoint) -> Result<isize> {
        match point {
            HookPoint::Input => Ok(-1),
            HookPoint::AfterLayer(k) => {
                if k >= self.layers.len() {
                    return Err(Error::HookMismatch(format!(
                        "after_layer({k}) beyond {} layers",
                        self.layers.len()
                    )));
                }
                Ok(k as isize)
            }
        }
    }

    /// Flattened activation width at a hook point.
    pub fn hook_dim(&self, point: HookPoint) -> Result<usize> {
        let end = self.hook_layer_end(point)?;
        Ok(shape_len(self.shapes[(end + 1) as usize]))
    }

    /// The hook point conventionally called "after the first convolutional
    /// layer": after that conv's ReLU (falls back to the first layer for
    /// architectures without conv/relu pairs).
    pub fn first_conv_hook(&self) -> HookPoint {
        for (i, layer) in self.layers.iter().enumerate() {
            if matches!(layer, Layer::Conv2d { .. }) {
                if matches!(self.layers.get(i + 1), Some(Layer::Relu)) {
                    return HookPoint::AfterLayer(i + 1);
                }
                return HookPoint::AfterLayer(i);
            }
        }
        HookPoint::AfterLayer(0)
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.row_len() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input rows of {} values, model wants {}",
                x.row_len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn apply_hook_rows(
        hook: &ClarcHook,
        x: &mut Tensor,
        routed: Option<&[bool]>,
    ) -> Result<()> {
        match routed {
            None => {
                for i in 0..x.n_rows() {
                    hook.apply_row(x.row_mut(i))?;
                }
            }
            Some(mask) => {
                for (i, routed) in mask.iter().enumerate() {
                    if *routed {
                        hook.apply_row(x.row_mut(i))?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Full forward pass. A hook, when present, rewrites the activations at
    /// its point (for all rows, or only `routed` rows) before subsequent
    /// layers. Train mode draws dropout masks from `rng`.
    pub fn forward(
        &self,
        x: &Tensor,
        hook: Option<&ClarcHook>,
        mode: Mode,
        rng: Option<&mut Rng>,
    ) -> Result<(Tensor, ForwardCache)> {
        self.forward_routed(x, hook, None, mode, rng)
    }

    pub(crate) fn forward_routed(
        &self,
        x: &Tensor,
        hook: Option<&ClarcHook>,
        routed: Option<&[bool]>,
        mode: Mode,
        mut rng: Option<&mut Rng>,
    ) -> Result<(Tensor, ForwardCache)> {
        self.check_input(x)?;
        let hook_end = match hook {
            Some(h) => {
                let end = self.hook_layer_end(h.point())?;
                let dim = self.hook_dim(h.point())?;
                if dim != h.concept.dim() {
                    return Err(Error::HookMismatch(format!(
                        "concept dim {} vs activation dim {dim} at {}",
                        h.concept.dim(),
                        h.point()
                    )));
                }
                Some(end)
            }
            None => None,
        };
        let train = mode == Mode::Train;
        let mut cur = x.clone();
        if let (Some(h), Some(-1)) = (hook, hook_end) {
            Self::apply_hook_rows(h, &mut cur, routed)?;
        }
        let mut cache = ForwardCache {
            layer_inputs: Vec::with_capacity(self.layers.len()),
            aux: Vec::with_capacity(self.layers.len()),
        };
        for (i, layer) in self.layers.iter().enumerate() {
            let (out, aux) = layer.forward(
                &cur,
                self.shapes[i],
                self.shapes[i + 1],
                train,
                rng.as_deref_mut(),
            );
            cache.layer_inputs.push(cur);
            cache.aux.push(aux);
            cur = out;
            if let (Some(h), Some(end)) = (hook, hook_end) {
                if end == i as isize {
                    Self::apply_hook_rows(h, &mut cur, routed)?;
                }
            }
        }
        Ok((cur, cache))
    }

    /// Eval-mode logits without keeping the cache.
    pub fn logits_eval(&self, x: &Tensor, hook: Option<&ClarcHook>) -> Result<Tensor> {
        Ok(self.forward(x, hook, Mode::Eval, None)?.0)
    }

    /// Eval-mode activations at a hook point (flattened, no hook applied).
    pub fn forward_to(&self, point: HookPoint, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let end = self.hook_layer_end(point)?;
        let mut cur = x.clone();
        for i in 0..(end + 1) as usize {
            let (out, _) = self
                .layers[i]
                .forward(&cur, self.shapes[i], self.shapes[i + 1], false, None);
            cur = out;
        }
        Ok(cur)
    }

    /// Eval-mode logits from activations injected at a hook point.
    pub fn forward_from(&self, point: HookPoint, features: &Tensor) -> Result<Tensor> {
        let end = self.hook_layer_end(point)?;
        let start = (end + 1) as usize;
        let want = shape_len(self.shapes[start]);
        if features.row_len() != want {
            return Err(Error::HookMismatch(format!(
                "features of {} values, {point} wants {want}",
                features.row_len()
            )));
        }
        let mut cur = features.clone();
        for i in start..self.layers.len() {
            let (out, _) = self
                .layers[i]
                .forward(&cur, self.shapes[i], self.shapes[i + 1], false, None);
            cur = out;
        }
        Ok(cur)
    }

    /// Backpropagates `dlogits`, producing parameter gradients for layers
    /// with index >= `first_trainable` and skipping everything below.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        dlogits: &Tensor,
        first_trainable: usize,
    ) -> Vec<Option<ParamGrads>> {
        let mut grads: Vec<Option<ParamGrads>> = (0..self.layers.len()).map(|_| None).collect();
        let mut dout = dlogits.clone();
        for i in (first_trainable..self.layers.len()).rev() {
            let want_dx = i > first_trainable;
            let want_grads = self.layers[i].params().is_some();
            let (dx, pg) = self.layers[i].backward(
                &dout,
                &cache.layer_inputs[i],
                self.shapes[i],
                self.shapes[i + 1],
                &cache.aux[i],
                want_dx,
                want_grads,
            );
            grads[i] = pg;
            if let Some(dx) = dx {
                dout = dx;
            } else if want_dx {
                unreachable!("layer must produce dx when requested");
            }
        }
        grads
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .filter_map(|l| l.params().map(|(w, b)| w.len() + b.len()))
            .sum()
    }

    /// Visits one parameter by flat index (layer order, weights then bias).
    pub fn with_param_mut<R>(&mut self, idx: usize, f: impl FnOnce(&mut f64) -> R) -> R {
        let mut offset = idx;
        for layer in &mut self.layers {
            if let Some((w, b)) = layer.params_mut() {
                if offset < w.len() {
                    return f(&mut w[offset]);
                }
                offset -= w.len();
                if offset < b.len() {
                    return f(&mut b[offset]);
                }
                offset -= b.len();
            }
        }
        panic!("parameter index {idx} out of range");
    }

    /// Gradients flattened in the same order as `with_param_mut` indexes.
    pub fn flatten_grads(&self, grads: &[Option<ParamGrads>]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (layer, g) in self.layers.iter().zip(grads) {
            if let Some((w, b)) = layer.params() {
                match g {
                    Some((gw, gb)) => {
                        out.extend_from_slice(gw);
                        out.extend_from_slice(gb);
                    }
                    None => {
                        out.extend(std::iter::repeat_n(0.0, w.len() + b.len()));
                    }
                }
            }
        }
        out
    }
}
