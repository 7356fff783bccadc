//! Layer kinds with batched forward and backward passes.
//!
//! Convolutions are 3x3, stride 1, no padding; max-pooling is 2x2 on even
//! spatial dims; dropout uses inverted scaling at train time so evaluation
//! needs no rescaling.

use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};
use serde::{Deserialize, Serialize};

pub type Shape3 = (usize, usize, usize);

pub fn shape_len(s: Shape3) -> usize {
    s.0 * s.1 * s.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    Dense {
        /// out_dim x in_dim, row-major.
        w: Vec<f64>,
        b: Vec<f64>,
        in_dim: usize,
        out_dim: usize,
    },
    Relu,
    Conv2d {
        /// out_ch x in_ch x 3 x 3, row-major.
        w: Vec<f64>,
        b: Vec<f64>,
        in_ch: usize,
        out_ch: usize,
    },
    MaxPool2x2,
    Dropout {
        p: f64,
    },
    Flatten,
}

/// Per-layer forward byproducts needed by the backward pass.
#[derive(Debug, Clone)]
pub enum Aux {
    None,
    /// Dropout multiplier per element: 0.0 or 1/(1-p).
    Mask(Vec<f64>),
    /// Flat within-sample input index of each pooled maximum.
    Argmax(Vec<u32>),
}

pub type ParamGrads = (Vec<f64>, Vec<f64>);

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Dense { .. } => "dense",
            Layer::Relu => "relu",
            Layer::Conv2d { .. } => "conv2d",
            Layer::MaxPool2x2 => "maxpool",
            Layer::Dropout { .. } => "dropout",
            Layer::Flatten => "flatten",
        }
    }

    pub fn out_shape(&self, in_shape: Shape3) -> Result<Shape3> {
        let (c, h, w) = in_shape;
        match self {
            Layer::Dense { in_dim, out_dim, .. } => {
                if shape_len(in_shape) != *in_dim {
                    return Err(Error::ShapeMismatch(format!(
                        "dense wants {in_dim} inputs, got {in_shape:?}"
                    )));
                }
                Ok((1, 1, *out_dim))
            }
            Layer::Relu | Layer::Dropout { .. } => Ok(in_shape),
            Layer::Conv2d { in_ch, out_ch, .. } => {
                if c != *in_ch {
                    return Err(Error::ShapeMismatch(format!(
                        "conv wants {in_ch} channels, got {c}"
                    )));
                }
                if h < 3 || w < 3 {
                    return Err(Error::ShapeMismatch(format!(
                        "conv needs >= 3x3 input, got {h}x{w}"
                    )));
                }
                Ok((*out_ch, h - 2, w - 2))
            }
            Layer::MaxPool2x2 => {
                if h % 2 != 0 || w % 2 != 0 {
                    return Err(Error::ShapeMismatch(format!(
                        "maxpool needs even dims, got {h}x{w}"
                    )));
                }
                Ok((c, h / 2, w / 2))
            }
            Layer::Flatten => Ok((1, 1, shape_len(in_shape))),
        }
    }

    pub fn params(&self) -> Option<(&[f64], &[f64])> {
        match self {
            Layer::Dense { w, b, .. } | Layer::Conv2d { w, b, .. } => Some((w, b)),
            _ => None,
        }
    }

    pub fn params_mut(&mut self) -> Option<(&mut Vec<f64>, &mut Vec<f64>)> {
        match self {
            Layer::Dense { w, b, .. } | Layer::Conv2d { w, b, .. } => Some((w, b)),
            _ => None,
        }
    }

    /// Scaled uniform fan-in init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for
    /// both weights and biases.
    pub fn init_params(&mut self, rng: &mut Rng) {
        let fan_in = match self {
            Layer::Dense { in_dim, .. } => *in_dim,
            Layer::Conv2d { in_ch, .. } => *in_ch * 9,
            _ => return,
        };
        let bound = 1.0 / (fan_in as f64).sqrt();
        if let Some((w, b)) = self.params_mut() {
            for v in w.iter_mut() {
                *v = rng.uniform_in(-bound, bound);
            }
            for v in b.iter_mut() {
                *v = rng.uniform_in(-bound, bound);
            }
        }
    }

    pub fn forward(
        &self,
        x: &Tensor,
        in_shape: Shape3,
        out_shape: Shape3,
        train: bool,
        rng: Option<&mut Rng>,
    ) -> (Tensor, Aux) {
        let n = x.n_rows();
        match self {
            Layer::Dense { w, b, in_dim, out_dim } => {
                let mut out = Tensor::zeros(vec![n, *out_dim]);
                for r in 0..n {
                    let xi = x.row(r);
                    let row = out.row_mut(r);
                    for o in 0..*out_dim {
                        let wrow = &w[o * in_dim..(o + 1) * in_dim];
                        let mut acc = b[o];
                        for (wv, xv) in wrow.iter().zip(xi) {
                            acc += wv * xv;
                        }
                        row[o] = acc;
                    }
                }
                (out, Aux::None)
            }
            Layer::Relu => {
                let mut out = x.clone();
                for v in out.data_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                (out, Aux::None)
            }
            Layer::Conv2d { w, b, in_ch, out_ch } => {
                let (_, h, wid) = in_shape;
                let (_, oh, ow) = out_shape;
                let mut out = Tensor::zeros(vec![n, out_ch * oh * ow]);
                for r in 0..n {
                    let xi = x.row(r);
                    let row = out.row_mut(r);
                    for oc in 0..*out_ch {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let mut acc = b[oc];
                                for ic in 0..*in_ch {
                                    let wbase = ((oc * in_ch + ic) * 3) * 3;
                                    let ibase = ic * h * wid;
                                    for ky in 0..3 {
                                        let irow = ibase + (oy + ky) * wid + ox;
                                        let wrow = wbase + ky * 3;
                                        acc += w[wrow] * xi[irow]
                                            + w[wrow + 1] * xi[irow + 1]
                                            + w[wrow + 2] * xi[irow + 2];
                                    }
                                }
                                row[(oc * oh + oy) * ow + ox] = acc;
                            }
                        }
                    }
                }
                (out, Aux::None)
            }
            Layer::MaxPool2x2 => {
                let (c, h, wid) = in_shape;
                let (_, oh, ow) = out_shape;
                let mut out = Tensor::zeros(vec![n, c * oh * ow]);
                let mut argmax = vec![0u32; n * c * oh * ow];
                for r in 0..n {
                    let xi = x.row(r);
                    let row = out.row_mut(r);
                    for ch in 0..c {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let base = ch * h * wid + 2 * oy * wid + 2 * ox;
                                let cand = [base, base + 1, base + wid, base + wid + 1];
                                let mut best = cand[0];
                                for &idx in &cand[1..] {
                                    if xi[idx] > xi[best] {
                                        best = idx;
                                    }
                                }
                                let o = (ch * oh + oy) * ow + ox;
                                row[o] = xi[best];
                                argmax[r * c * oh * ow + o] = best as u32;
                            }
                        }
                    }
                }
                (out, Aux::Argmax(argmax))
            }
            Layer::Dropout { p } => {
                if !train || *p == 0.0 {
                    return (x.clone(), Aux::None);
                }
                let rng = rng.expect("dropout in train mode needs an rng");
                let keep_scale = 1.0 / (1.0 - p);
                let mut mask = vec![0.0; x.len()];
                for m in &mut mask {
                    if rng.uniform() >= *p {
                        *m = keep_scale;
                    }
                }
                let mut out = x.clone();
                for (v, m) in out.data_mut().iter_mut().zip(&mask) {
                    *v *= m;
                }
                (out, Aux::Mask(mask))
            }
            Layer::Flatten => (x.clone(), Aux::None),
        }
    }

    /// Backward pass: given d(loss)/d(output) and the cached layer input,
    /// returns d(loss)/d(input) (when requested) and parameter gradients.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        dout: &Tensor,
        x: &Tensor,
        in_shape: Shape3,
        out_shape: Shape3,
        aux: &Aux,
        want_dx: bool,
        want_grads: bool,
    ) -> (Option<Tensor>, Option<ParamGrads>) {
        let n = dout.n_rows();
        match self {
            Layer::Dense { w, in_dim, out_dim, .. } => {
                let mut grads = if want_grads {
                    Some((vec![0.0; w.len()], vec![0.0; *out_dim]))
                } else {
                    None
                };
                if let Some((gw, gb)) = &mut grads {
                    for r in 0..n {
                        let xi = x.row(r);
                        let dr = dout.row(r);
                        for o in 0..*out_dim {
                            let d = dr[o];
                            gb[o] += d;
                            let grow = &mut gw[o * in_dim..(o + 1) * in_dim];
                            for (g, xv) in grow.iter_mut().zip(xi) {
                                *g += d * xv;
                            }
                        }
                    }
                }
                let dx = want_dx.then(|| {
                    let mut dx = Tensor::zeros(vec![n, *in_dim]);
                    for r in 0..n {
                        let dr = dout.row(r);
                        let dxr = dx.row_mut(r);
                        for o in 0..*out_dim {
                            let d = dr[o];
                            let wrow = &w[o * in_dim..(o + 1) * in_dim];
                            for (dv, wv) in dxr.iter_mut().zip(wrow) {
                                *dv += d * wv;
                            }
                        }
                    }
                    dx
                });
                (dx, grads)
            }
            Layer::Relu => {
                let dx = want_dx.then(|| {
                    let mut dx = dout.clone();
                    for (d, &xv) in dx.data_mut().iter_mut().zip(x.data()) {
                        if xv <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    dx
                });
                (dx, None)
            }
            Layer::Conv2d { w, in_ch, out_ch, .. } => {
                let (_, h, wid) = in_shape;
                let (_, oh, ow) = out_shape;
                let mut grads = if want_grads {
                    Some((vec![0.0; w.len()], vec![0.0; *out_ch]))
                } else {
                    None
                };
                if let Some((gw, gb)) = &mut grads {
                    for r in 0..n {
                        let xi = x.row(r);
                        let dr = dout.row(r);
                        for oc in 0..*out_ch {
                            for oy in 0..oh {
                                for ox in 0..ow {
                                    let d = dr[(oc * oh + oy) * ow + ox];
                                    if d == 0.0 {
                                        continue;
                                    }
                                    gb[oc] += d;
                                    for ic in 0..*in_ch {
                                        let wbase = ((oc * in_ch + ic) * 3) * 3;
                                        let ibase = ic * h * wid;
                                        for ky in 0..3 {
                                            let irow = ibase + (oy + ky) * wid + ox;
                                            let wrow = wbase + ky * 3;
                                            gw[wrow] += d * xi[irow];
                                            gw[wrow + 1] += d * xi[irow + 1];
                                            gw[wrow + 2] += d * xi[irow + 2];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                let dx = want_dx.then(|| {
                    let mut dx = Tensor::zeros(vec![n, in_ch * h * wid]);
                    for r in 0..n {
                        let dr = dout.row(r);
                        let dxr = dx.row_mut(r);
                        for oc in 0..*out_ch {
                            for oy in 0..oh {
                                for ox in 0..ow {
                                    let d = dr[(oc * oh + oy) * ow + ox];
                                    if d == 0.0 {
                                        continue;
                                    }
                                    for ic in 0..*in_ch {
                                        let wbase = ((oc * in_ch + ic) * 3) * 3;
                                        let ibase = ic * h * wid;
                                        for ky in 0..3 {
                                            let irow = ibase + (oy + ky) * wid + ox;
                                            let wrow = wbase + ky * 3;
                                            dxr[irow] += d * w[wrow];
                                            dxr[irow + 1] += d * w[wrow + 1];
                                            dxr[irow + 2] += d * w[wrow + 2];
                                        }
                                    }
                                }
                            }
                        }
                    }
                    dx
                });
                (dx, grads)
            }
            Layer::MaxPool2x2 => {
                let dx = want_dx.then(|| {
                    let Aux::Argmax(argmax) = aux else {
                        panic!("maxpool backward without argmax cache")
                    };
                    let (c, h, wid) = in_shape;
                    let per = out_shape.0 * out_shape.1 * out_shape.2;
                    let mut dx = Tensor::zeros(vec![n, c * h * wid]);
                    for r in 0..n {
                        let dr = dout.row(r);
                        let dxr = dx.row_mut(r);
                        for (o, &d) in dr.iter().enumerate() {
                            dxr[argmax[r * per + o] as usize] += d;
                        }
                    }
                    dx
                });
                (dx, None)
            }
            Layer::Dropout { .. } => {
                let dx = want_dx.then(|| match aux {
                    Aux::Mask(mask) => {
                        let mut dx = dout.clone();
                        for (d, m) in dx.data_mut().iter_mut().zip(mask) {
                            *d *= m;
                        }
                        dx
                    }
                    _ => dout.clone(), // eval mode: identity
                });
                (dx, None)
            }
            Layer::Flatten => (want_dx.then(|| dout.clone()), None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maxpool_picks_window_maximum() {
        let layer = Layer::MaxPool2x2;
        let x = Tensor::new(vec![1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (out, aux) = layer.forward(&x, (1, 2, 2), (1, 1, 1), false, None);
        assert_eq!(out.data(), &[4.0]);
        let Aux::Argmax(a) = aux else { panic!() };
        assert_eq!(a, vec![3]);
    }

    #[test]
    fn dense_identity_passes_input_through() {
        let mut w = vec![0.0; 9];
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        let layer = Layer::Dense {
            w,
            b: vec![0.0; 3],
            in_dim: 3,
            out_dim: 3,
        };
        let x = Tensor::from_rows(&[vec![0.5, -1.5, 2.0]]).unwrap();
        let (out, _) = layer.forward(&x, (1, 1, 3), (1, 1, 3), false, None);
        assert_eq!(out.row(0), x.row(0));
    }

    #[test]
    fn relu_clamps_and_gates_gradient() {
        let layer = Layer::Relu;
        let x = Tensor::from_rows(&[vec![-1.0, 2.0]]).unwrap();
        let (out, aux) = layer.forward(&x, (1, 1, 2), (1, 1, 2), false, None);
        assert_eq!(out.row(0), &[0.0, 2.0]);
        let dout = Tensor::from_rows(&[vec![5.0, 5.0]]).unwrap();
        let (dx, _) = layer.backward(&dout, &x, (1, 1, 2), (1, 1, 2), &aux, true, false);
        assert_eq!(dx.unwrap().row(0), &[0.0, 5.0]);
    }

    #[test]
    fn dropout_eval_is_identity() {
        let layer = Layer::Dropout { p: 0.5 };
        let x = Tensor::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let (out, _) = layer.forward(&x, (1, 1, 3), (1, 1, 3), false, None);
        assert_eq!(out, x);
    }

    #[test]
    fn dropout_train_mask_scales_kept_values() {
        let layer = Layer::Dropout { p: 0.5 };
        let x = Tensor::from_rows(&[vec![1.0; 1000]]).unwrap();
        let mut rng = Rng::from_seed(1);
        let (out, aux) = layer.forward(&x, (1, 1, 1000), (1, 1, 1000), true, Some(&mut rng));
        let Aux::Mask(mask) = aux else { panic!() };
        for (o, m) in out.data().iter().zip(&mask) {
            assert!(*o == 0.0 || (*o - 2.0).abs() < 1e-12);
            assert_eq!(*o, *m);
        }
        let kept = mask.iter().filter(|&&m| m > 0.0).count();
        assert!((300..700).contains(&kept)); // loose binomial bound
    }
}
