//! Artifact directions in feature space: filter- and pattern-based concept
//! activation vectors, augmentive/projective model correction, and the
//! controlled Clever Hans / backdoor experiment protocols around them, on a
//! from-scratch neural network stack.

pub mod clarc;
pub mod concepts;
pub mod datasets;
pub mod error;
pub mod experiments;
pub mod jsonio;
pub mod models;
pub mod numerics;
pub mod toygen;

pub use error::{Error, Result};
pub use numerics::{Rng, Tensor};
