//! Deterministic randomness, the tensor carrier, and statistics primitives.

mod rng;
mod stats;
mod tensor;

pub use rng::{gaussian, Rng};
pub use stats::{
    angle_between_lines_degrees, column_mean, cosine_similarity, covariance_with_target, dot,
    norm, variance_of_target,
};
pub use tensor::Tensor;
