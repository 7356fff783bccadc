//! Two-dimensional signal/distractor toy data.
//!
//! Each sample decomposes as `x = a_s*y_s + a_c*y_c + a_n*eps` with the
//! artifact pattern `a_s = (1, 0)`, the class pattern `a_c = (0, 1)`, the
//! noise pattern `a_n = (sin tau, cos tau)` and `eps ~ N(0, sigma^2)`.
//! Only class A (`y_c = -1`) carries artifact samples; clean samples
//! contribute `-a_s` through `y_s = -1`.

use crate::datasets::{LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    /// Noise-pattern rotation in radians.
    pub tau: f64,
    /// Noise variance.
    pub sigma2: f64,
    pub n: usize,
    /// Fraction of class-A samples that carry the artifact, in (0, 1).
    pub artifact_fraction_in_a: f64,
    pub rng_seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            tau: 0.0,
            sigma2: 0.15,
            n: 10_000,
            artifact_fraction_in_a: 0.5,
            rng_seed: 0,
        }
    }
}

impl ToyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma2 < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "sigma2 must be >= 0, got {}",
                self.sigma2
            )));
        }
        if !(self.artifact_fraction_in_a > 0.0 && self.artifact_fraction_in_a < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "artifact fraction {} outside (0,1)",
                self.artifact_fraction_in_a
            )));
        }
        if self.n < 4 {
            return Err(Error::InvalidConfig(format!("need n >= 4, got {}", self.n)));
        }
        Ok(())
    }
}

pub const ARTIFACT_PATTERN: [f64; 2] = [1.0, 0.0];
pub const CLASS_PATTERN: [f64; 2] = [0.0, 1.0];

pub fn noise_pattern(tau: f64) -> [f64; 2] {
    [tau.sin(), tau.cos()]
}

/// Generates the toy dataset. Class labels are balanced (`y_c` alternates
/// in {-1,+1}); a random `artifact_fraction_in_a` of class-A samples gets
/// `y_s = +1`, everything else `y_s = -1`.
pub fn generate_toy(cfg: &ToyConfig) -> Result<LabeledDataset> {
    cfg.validate()?;
    let mut rng = Rng::from_seed(cfg.rng_seed);
    let a_n = noise_pattern(cfg.tau);
    let sigma = cfg.sigma2.sqrt();

    // even indices class A (-1), odd class B (+1): balanced within one
    let y_c: Vec<i32> = (0..cfg.n).map(|i| if i % 2 == 0 { -1 } else { 1 }).collect();
    let class_a: Vec<usize> = (0..cfg.n).step_by(2).collect();
    let n_artifact = (class_a.len() as f64 * cfg.artifact_fraction_in_a).floor() as usize;
    let mut y_s = vec![-1i8; cfg.n];
    for j in rng.sample_indices(class_a.len(), n_artifact) {
        y_s[class_a[j]] = 1;
    }

    let mut data = Vec::with_capacity(cfg.n * 2);
    for i in 0..cfg.n {
        let eps = rng.gaussian(0.0, sigma);
        let ys = f64::from(y_s[i]);
        let yc = f64::from(y_c[i]);
        data.push(ARTIFACT_PATTERN[0] * ys + CLASS_PATTERN[0] * yc + a_n[0] * eps);
        data.push(ARTIFACT_PATTERN[1] * ys + CLASS_PATTERN[1] * yc + a_n[1] * eps);
    }

    LabeledDataset::new(Tensor::new(vec![cfg.n, 2], data)?, (1, 1, 2), y_c, y_s, Split::Train)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_lattice() {
        let cfg = ToyConfig {
            sigma2: 0.0,
            tau: 0.0,
            n: 8,
            ..Default::default()
        };
        let ds = generate_toy(&cfg).unwrap();
        for i in 0..8 {
            let s = ds.sample(i);
            assert!(s[0].abs() == 1.0 && s[1].abs() == 1.0, "sample {s:?}");
            assert_eq!(s[1], f64::from(ds.labels()[i]));
            assert_eq!(s[0], f64::from(ds.artifact_flags()[i]));
        }
    }

    #[test]
    fn class_balance() {
        let ds = generate_toy(&ToyConfig {
            n: 101,
            ..Default::default()
        })
        .unwrap();
        let plus = ds.labels().iter().filter(|&&l| l == 1).count() as i64;
        let minus = ds.labels().iter().filter(|&&l| l == -1).count() as i64;
        assert!((plus - minus).abs() <= 1);
    }

    #[test]
    fn artifact_only_in_class_a() {
        let ds = generate_toy(&ToyConfig {
            n: 1000,
            ..Default::default()
        })
        .unwrap();
        for i in 0..ds.n() {
            if ds.artifact_flags()[i] == 1 {
                assert_eq!(ds.labels()[i], -1);
            }
        }
        let n_a = ds.labels().iter().filter(|&&l| l == -1).count();
        let n_art = ds.artifact_flags().iter().filter(|&&s| s == 1).count();
        assert_eq!(n_art, (n_a as f64 * 0.5).floor() as usize);
    }

    #[test]
    fn residuals_collinear_with_noise_pattern() {
        let cfg = ToyConfig {
            tau: 1.1,
            n: 500,
            rng_seed: 13,
            ..Default::default()
        };
        let ds = generate_toy(&cfg).unwrap();
        let a_n = noise_pattern(cfg.tau);
        for i in 0..ds.n() {
            let s = ds.sample(i);
            let r0 = s[0] - f64::from(ds.artifact_flags()[i]);
            let r1 = s[1] - f64::from(ds.labels()[i]);
            // residual must be eps * a_n: cross product with a_n vanishes
            assert!((r0 * a_n[1] - r1 * a_n[0]).abs() < 1e-12, "sample {i}");
        }
    }

    #[test]
    fn artifact_shifts_first_coordinate_mean() {
        let cfg = ToyConfig {
            tau: 0.7,
            n: 20_000,
            rng_seed: 3,
            ..Default::default()
        };
        let ds = generate_toy(&cfg).unwrap();
        let mut art = (0.0, 0usize);
        let mut clean = (0.0, 0usize);
        for i in 0..ds.n() {
            if ds.labels()[i] != -1 {
                continue;
            }
            if ds.artifact_flags()[i] == 1 {
                art = (art.0 + ds.sample(i)[0], art.1 + 1);
            } else {
                clean = (clean.0 + ds.sample(i)[0], clean.1 + 1);
            }
        }
        let gap = art.0 / art.1 as f64 - clean.0 / clean.1 as f64;
        // expectation 2.0, O(sigma/sqrt(n)) sampling error
        assert!((gap - 2.0).abs() < 0.05, "gap {gap}");
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(generate_toy(&ToyConfig {
            sigma2: -0.1,
            ..Default::default()
        })
        .is_err());
        assert!(generate_toy(&ToyConfig {
            artifact_fraction_in_a: 1.0,
            ..Default::default()
        })
        .is_err());
        assert!(generate_toy(&ToyConfig {
            n: 3,
            ..Default::default()
        })
        .is_err());
    }
}
