//! Feature-space correction maps and their attachment point.
//!
//! Both maps replace the component of `x` along the unit concept direction
//! `v`: the augmentive map pins it to the artifact mean's component
//! (`(I - vv^T)x + vv^T z+`), the projective map to the clean mean's
//! (`(I - vv^T)x + vv^T z-`). `vv^T` is never materialized; each map is
//! `x - v(v.x) + v(v.z)` in O(d).

use crate::concepts::{ConceptVector, HookPoint};
use crate::error::{Error, Result};
use crate::numerics::{dot, norm, Tensor};
use serde::{Deserialize, Serialize};

pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClarcMode {
    Augmentive,
    Projective,
}

impl std::fmt::Display for ClarcMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClarcMode::Augmentive => write!(f, "augmentive"),
            ClarcMode::Projective => write!(f, "projective"),
        }
    }
}

/// A correction map bound to a concept vector; the attachment point is the
/// concept's hook point by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClarcHook {
    pub mode: ClarcMode,
    pub concept: ConceptVector,
}

impl ClarcHook {
    pub fn new(mode: ClarcMode, concept: ConceptVector) -> Result<Self> {
        check_unit(&concept.v)?;
        Ok(Self { mode, concept })
    }

    pub fn point(&self) -> HookPoint {
        self.concept.hook
    }

    /// The mean whose v-component replaces the sample's: z+ when
    /// augmentive, z- when projective.
    pub fn anchor(&self) -> &[f64] {
        match self.mode {
            ClarcMode::Augmentive => &self.concept.z_plus,
            ClarcMode::Projective => &self.concept.z_minus,
        }
    }

    /// Applies the map to one flattened feature row in place.
    pub fn apply_row(&self, x: &mut [f64]) -> Result<()> {
        map_in_place(x, &self.concept.v, self.anchor())
    }
}

fn check_unit(v: &[f64]) -> Result<()> {
    let n = norm(v);
    if (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
        return Err(Error::InvalidConfig(format!(
            "concept direction is not unit norm (|v| = {n})"
        )));
    }
    Ok(())
}

fn map_in_place(x: &mut [f64], v: &[f64], z: &[f64]) -> Result<()> {
    if x.len() != v.len() || z.len() != v.len() {
        return Err(Error::ShapeMismatch(format!(
            "map dims x={} v={} z={}",
            x.len(),
            v.len(),
            z.len()
        )));
    }
    let shift = dot(v, z) - dot(v, x);
    for (xi, &vi) in x.iter_mut().zip(v) {
        *xi += shift * vi;
    }
    Ok(())
}

fn map(x: &[f64], v: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    check_unit(v)?;
    let mut out = x.to_vec();
    map_in_place(&mut out, v, z)?;
    Ok(out)
}

/// Inductive artifact map: the v-component of `x` is replaced by the
/// v-component of the artifact mean `z+`.
pub fn aclarc_map(x: &[f64], v: &[f64], z_plus: &[f64]) -> Result<Vec<f64>> {
    map(x, v, z_plus)
}

/// Suppressive artifact map: the v-component of `x` is replaced by the
/// v-component of the clean mean `z-`.
pub fn pclarc_map(x: &[f64], v: &[f64], z_minus: &[f64]) -> Result<Vec<f64>> {
    map(x, v, z_minus)
}

/// Applies the hook's map to every row of a feature matrix. Conv-shaped
/// activations are handled flattened, one row per sample.
pub fn apply_hook_batch(x: &Tensor, hook: &ClarcHook) -> Result<Tensor> {
    check_unit(&hook.concept.v)?;
    let mut out = x.clone();
    for i in 0..out.n_rows() {
        map_in_place(out.row_mut(i), &hook.concept.v, hook.anchor())?;
    }
    Ok(out)
}
