//! Statistics primitives shared by the estimators.
//!
//! Covariance and variance both use the population (1/n) convention; the
//! pattern estimate only consumes their ratio, which is invariant to the
//! convention as long as it is consistent.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Per-column mean of an `n x d` matrix.
pub fn column_mean(x: &Tensor) -> Result<Vec<f64>> {
    let n = x.n_rows();
    if n == 0 || x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let d = x.row_len();
    let mut mean = vec![0.0; d];
    for row in x.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    Ok(mean)
}

/// Per-column covariance of `x` with the target `y`, population convention:
/// element j = (1/n) sum_i (x[i,j] - mean_j)(y_i - mean_y).
pub fn covariance_with_target(x: &Tensor, y: &[f64]) -> Result<Vec<f64>> {
    let n = x.n_rows();
    if n < 2 {
        return Err(Error::DegenerateSample);
    }
    if y.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{n} rows vs {} targets",
            y.len()
        )));
    }
    let x_mean = column_mean(x)?;
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let d = x.row_len();
    let mut cov = vec![0.0; d];
    for (row, &yi) in x.rows().zip(y) {
        let dy = yi - y_mean;
        for ((c, v), m) in cov.iter_mut().zip(row).zip(&x_mean) {
            *c += (v - m) * dy;
        }
    }
    for c in &mut cov {
        *c /= n as f64;
    }
    Ok(cov)
}

/// Population variance (1/n) sum_i (y_i - mean)^2.
pub fn variance_of_target(y: &[f64]) -> Result<f64> {
    if y.len() < 2 {
        return Err(Error::DegenerateSample);
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    Ok(y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// a.b / (|a||b|), in [-1, 1]. Zero-norm inputs are rejected.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {} elements",
            a.len(),
            b.len()
        )));
    }
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Acute angle in degrees between the lines spanned by `a` and `b`
/// (sign-insensitive: v and -v span the same line).
pub fn angle_between_lines_degrees(a: &[f64], b: &[f64]) -> Result<f64> {
    let c = cosine_similarity(a, b)?;
    Ok(c.abs().clamp(0.0, 1.0).acos().to_degrees())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn column_mean_basics() {
        let x = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(column_mean(&x).unwrap(), vec![2.0, 3.0]);
        let single = Tensor::from_rows(&[vec![5.0, 5.0]]).unwrap();
        assert_eq!(column_mean(&single).unwrap(), vec![5.0, 5.0]);
    }

    #[test]
    fn column_mean_matches_one_pass_oracle() {
        let mut rng = Rng::from_seed(11);
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..8).map(|_| rng.uniform_in(-3.0, 3.0)).collect())
            .collect();
        let x = Tensor::from_rows(&rows).unwrap();
        let got = column_mean(&x).unwrap();
        for j in 0..8 {
            let oracle: f64 = rows.iter().map(|r| r[j]).sum::<f64>() / 100.0;
            assert!((got[j] - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn covariance_aligned_and_constant() {
        let x = Tensor::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        let cov = covariance_with_target(&x, &[1.0, -1.0]).unwrap();
        assert!((cov[0] - 1.0).abs() < 1e-15);

        let c = Tensor::from_rows(&[vec![0.7], vec![0.7]]).unwrap();
        let cov = covariance_with_target(&c, &[1.0, -1.0]).unwrap();
        assert_eq!(cov[0], 0.0);
    }

    #[test]
    fn covariance_matches_brute_force() {
        let mut rng = Rng::from_seed(5);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..4).map(|_| rng.gaussian(0.0, 2.0)).collect())
            .collect();
        let y: Vec<f64> = (0..200).map(|_| rng.gaussian(0.5, 1.0)).collect();
        let x = Tensor::from_rows(&rows).unwrap();
        let got = covariance_with_target(&x, &y).unwrap();
        let ym = y.iter().sum::<f64>() / 200.0;
        for j in 0..4 {
            let xm: f64 = rows.iter().map(|r| r[j]).sum::<f64>() / 200.0;
            let oracle: f64 = rows
                .iter()
                .zip(&y)
                .map(|(r, yi)| (r[j] - xm) * (yi - ym))
                .sum::<f64>()
                / 200.0;
            assert!((got[j] - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn covariance_balanced_labels_equals_half_mean_gap() {
        let mut rng = Rng::from_seed(17);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..6).map(|_| rng.gaussian(0.0, 1.0)).collect())
            .collect();
        let y: Vec<f64> = (0..50).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let x = Tensor::from_rows(&rows).unwrap();
        let cov = covariance_with_target(&x, &y).unwrap();
        for j in 0..6 {
            let plus: Vec<f64> = rows
                .iter()
                .zip(&y)
                .filter(|(_, &yi)| yi > 0.0)
                .map(|(r, _)| r[j])
                .collect();
            let minus: Vec<f64> = rows
                .iter()
                .zip(&y)
                .filter(|(_, &yi)| yi < 0.0)
                .map(|(r, _)| r[j])
                .collect();
            let gap = plus.iter().sum::<f64>() / plus.len() as f64
                - minus.iter().sum::<f64>() / minus.len() as f64;
            assert!((cov[j] - gap / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn variance_examples() {
        assert!((variance_of_target(&[1.0, -1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((variance_of_target(&[1.0, 1.0, -1.0, -1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(variance_of_target(&[0.5, 0.5, 0.5]).unwrap(), 0.0);
        assert!(variance_of_target(&[1.0]).is_err());
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap().abs() < 1e-15);
        let c = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn angle_between_lines_folds_sign() {
        let a = [1.0, 0.0];
        assert!(angle_between_lines_degrees(&a, &[-1.0, 0.0]).unwrap() < 1e-9);
        let forty_five = angle_between_lines_degrees(&a, &[1.0, 1.0]).unwrap();
        assert!((forty_five - 45.0).abs() < 1e-9);
    }
}
