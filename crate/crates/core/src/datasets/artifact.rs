//! Parametric artifacts injected into samples.

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use serde::{Deserialize, Serialize};

/// Ten tint colors: hues equally spaced on the HSV wheel (36 degrees apart)
/// at full saturation and value, converted to RGB.
pub const TINT_COLORS: [[f64; 3]; 10] = [
    [1.0, 0.0, 0.0],
    [1.0, 0.6, 0.0],
    [0.8, 1.0, 0.0],
    [0.2, 1.0, 0.0],
    [0.0, 1.0, 0.4],
    [0.0, 1.0, 1.0],
    [0.0, 0.4, 1.0],
    [0.2, 0.0, 1.0],
    [0.8, 0.0, 1.0],
    [1.0, 0.0, 0.6],
];

/// Pixel-space artifact applied to a sample; outputs are clamped to [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ArtifactSpec {
    /// Per-channel multiplicative tint from [`TINT_COLORS`] applied to
    /// foreground positions (any channel > 0). Requires 3-channel samples.
    ColorTint { color_index: usize },
    /// `size x size` block in the bottom-right corner of every channel set
    /// to `value`.
    BoxPatch { size: usize, value: f64 },
    /// `x + factor * template`, clamped; template shape must match.
    AdditiveShift { template: Tensor, factor: f64 },
}

impl ArtifactSpec {
    pub fn white_box(size: usize) -> Self {
        ArtifactSpec::BoxPatch { size, value: 1.0 }
    }

    /// Short human-readable tag used in provenance records and reports.
    pub fn tag(&self) -> String {
        match self {
            ArtifactSpec::ColorTint { color_index } => format!("color_tint({color_index})"),
            ArtifactSpec::BoxPatch { size, value } => format!("box_patch({size}x{size},{value})"),
            ArtifactSpec::AdditiveShift { factor, .. } => format!("additive_shift({factor})"),
        }
    }

    pub fn validate(&self, shape: (usize, usize, usize)) -> Result<()> {
        let (c, h, w) = shape;
        match self {
            ArtifactSpec::ColorTint { color_index } => {
                if *color_index >= TINT_COLORS.len() {
                    return Err(Error::InvalidConfig(format!(
                        "color index {color_index} out of range"
                    )));
                }
                if c != 3 {
                    return Err(Error::ShapeMismatch(format!(
                        "color tint needs 3 channels, got {c}"
                    )));
                }
            }
            ArtifactSpec::BoxPatch { size, .. } => {
                if *size == 0 || *size > h || *size > w {
                    return Err(Error::ShapeMismatch(format!(
                        "box {size}x{size} does not fit {h}x{w}"
                    )));
                }
            }
            ArtifactSpec::AdditiveShift { template, .. } => {
                if template.len() != c * h * w {
                    return Err(Error::ShapeMismatch(format!(
                        "template has {} values, sample has {}",
                        template.len(),
                        c * h * w
                    )));
                }
            }
        }
        Ok(())
    }

    /// Applies the artifact in place to one flattened (C,H,W) sample.
    pub fn apply_to_slice(&self, x: &mut [f64], shape: (usize, usize, usize)) -> Result<()> {
        let (c, h, w) = shape;
        if x.len() != c * h * w {
            return Err(Error::ShapeMismatch(format!(
                "sample has {} values, shape wants {}",
                x.len(),
                c * h * w
            )));
        }
        self.validate(shape)?;
        match self {
            ArtifactSpec::ColorTint { color_index } => {
                let tint = &TINT_COLORS[*color_index];
                for i in 0..h {
                    for j in 0..w {
                        let foreground = (0..c).any(|ch| x[ch * h * w + i * w + j] > 0.0);
                        if foreground {
                            for ch in 0..c {
                                let p = &mut x[ch * h * w + i * w + j];
                                *p = (*p * tint[ch]).clamp(0.0, 1.0);
                            }
                        }
                    }
                }
            }
            ArtifactSpec::BoxPatch { size, value } => {
                for ch in 0..c {
                    for i in h - size..h {
                        for j in w - size..w {
                            x[ch * h * w + i * w + j] = *value;
                        }
                    }
                }
            }
            ArtifactSpec::AdditiveShift { template, factor } => {
                for (p, t) in x.iter_mut().zip(template.data()) {
                    *p = (*p + factor * t).clamp(0.0, 1.0);
                }
            }
        }
        Ok(())
    }
}

/// Applies an artifact to a standalone sample tensor shaped (C,H,W).
pub fn apply_artifact(x: &Tensor, spec: &ArtifactSpec) -> Result<Tensor> {
    let shape = match x.shape() {
        [c, h, w] => (*c, *h, *w),
        other => {
            return Err(Error::ShapeMismatch(format!(
                "expected (C,H,W) sample, got {other:?}"
            )))
        }
    };
    let mut out = x.clone();
    spec.apply_to_slice(out.data_mut(), shape)?;
    Ok(out)
}

/// Fixed figure-eight template used as the default additive-shift shape:
/// two stacked rings drawn onto an otherwise empty canvas.
pub fn eight_template(shape: (usize, usize, usize)) -> Tensor {
    let (c, h, w) = shape;
    let mut data = vec![0.0; c * h * w];
    let cx = (w as f64 - 1.0) / 2.0;
    let top = ((h as f64 - 1.0) / 2.0 - h as f64 / 4.8, h as f64 / 5.2);
    let bottom = ((h as f64 - 1.0) / 2.0 + h as f64 / 4.8, h as f64 / 4.4);
    for i in 0..h {
        for j in 0..w {
            let mut v: f64 = 0.0;
            for (cy, r) in [top, bottom] {
                let d = ((i as f64 - cy).powi(2) + (j as f64 - cx).powi(2)).sqrt();
                // soft ring of width ~1.2 pixels
                let ring = 1.0 - ((d - r).abs() / 1.2).min(1.0);
                v = v.max(ring);
            }
            for ch in 0..c {
                data[ch * h * w + i * w + j] = v;
            }
        }
    }
    Tensor::new(vec![c, h, w], data).expect("template shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_on_zeros_sets_exactly_the_corner() {
        let x = Tensor::zeros(vec![1, 16, 16]);
        let out = apply_artifact(&x, &ArtifactSpec::white_box(4)).unwrap();
        let ones = out.data().iter().filter(|&&v| v == 1.0).count();
        assert_eq!(ones, 16);
        // bottom-right corner pixel and the rest untouched
        assert_eq!(out.data()[15 * 16 + 15], 1.0);
        assert_eq!(out.data()[0], 0.0);
        assert_eq!(out.data()[11 * 16 + 11], 0.0);
        assert_eq!(out.data()[12 * 16 + 12], 1.0);
    }

    #[test]
    fn box_leaves_unpatched_pixels_bit_identical() {
        let mut data = vec![0.0; 16 * 16];
        for (i, v) in data.iter_mut().enumerate() {
            *v = (i as f64 * 0.37).fract();
        }
        let x = Tensor::new(vec![1, 16, 16], data.clone()).unwrap();
        let out = apply_artifact(&x, &ArtifactSpec::white_box(4)).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                if i >= 12 && j >= 12 {
                    assert_eq!(out.data()[i * 16 + j], 1.0);
                } else {
                    assert_eq!(out.data()[i * 16 + j].to_bits(), data[i * 16 + j].to_bits());
                }
            }
        }
    }

    #[test]
    fn shift_adds_and_clamps() {
        let template = Tensor::new(vec![1, 4, 4], vec![1.0; 16]).unwrap();
        let zeros = Tensor::zeros(vec![1, 4, 4]);
        let spec = ArtifactSpec::AdditiveShift {
            template: template.clone(),
            factor: 0.2,
        };
        let out = apply_artifact(&zeros, &spec).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.2).abs() < 1e-15));

        let ones = Tensor::new(vec![1, 4, 4], vec![1.0; 16]).unwrap();
        let out = apply_artifact(&ones, &spec).unwrap();
        assert!(out.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn tint_applies_to_foreground_only() {
        let mut data = vec![0.0; 3 * 2 * 2];
        // pixel (0,0) lit in all channels, the rest dark
        for ch in 0..3 {
            data[ch * 4] = 0.8;
        }
        let x = Tensor::new(vec![3, 2, 2], data).unwrap();
        let out = apply_artifact(&x, &ArtifactSpec::ColorTint { color_index: 0 }).unwrap();
        assert!((out.data()[0] - 0.8).abs() < 1e-15); // r * 1.0
        assert_eq!(out.data()[4], 0.0); // g * 0.0
        assert_eq!(out.data()[8], 0.0); // b * 0.0
        assert_eq!(out.data()[1], 0.0); // background untouched
    }

    #[test]
    fn tint_requires_three_channels() {
        let x = Tensor::zeros(vec![1, 4, 4]);
        assert!(apply_artifact(&x, &ArtifactSpec::ColorTint { color_index: 1 }).is_err());
    }

    #[test]
    fn oversized_box_rejected() {
        let x = Tensor::zeros(vec![1, 4, 4]);
        assert!(apply_artifact(&x, &ArtifactSpec::white_box(5)).is_err());
    }

    #[test]
    fn eight_template_is_nonempty_and_bounded() {
        let t = eight_template((1, 16, 16));
        assert!(t.data().iter().any(|&v| v > 0.5));
        assert!(t.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
