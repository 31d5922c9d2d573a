use crate::error::{FastError, Result};
use crate::numeric::{covariance_rows, mean_rows, psd_sqrt, trace_sqrt_symmetric};

/// Fréchet distance between Gaussian fits of two point sets:
/// `||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2))`.
///
/// The cross term is evaluated as `tr sqrt(S_a^(1/2) S_b S_a^(1/2))`, which is
/// symmetric PSD, with negative eigenvalues clamped to zero.
pub fn frechet_distance<R: AsRef<[f64]>>(set_a: &[R], set_b: &[R]) -> Result<f64> {
    if set_a.len() < 2 || set_b.len() < 2 {
        return Err(FastError::Invalid("frechet distance needs at least 2 points per set".into()));
    }
    let d = set_a[0].as_ref().len();
    if d == 0 {
        return Err(FastError::Empty("feature vector"));
    }
    for r in set_a.iter().chain(set_b) {
        if r.as_ref().len() != d {
            return Err(FastError::DimensionMismatch {
                expected: d,
                found: r.as_ref().len(),
            });
        }
        if r.as_ref().iter().any(|v| !v.is_finite()) {
            return Err(FastError::NonFinite("feature vector"));
        }
    }
    let mu_a = mean_rows(set_a);
    let mu_b = mean_rows(set_b);
    let cov_a = covariance_rows(set_a, &mu_a);
    let cov_b = covariance_rows(set_b, &mu_b);

    let mean_term: f64 = mu_a.iter().zip(&mu_b).map(|(a, b)| (a - b) * (a - b)).sum();
    let root_a = psd_sqrt(&cov_a)?;
    let cross = &root_a * &cov_b * &root_a;
    let cross_trace = trace_sqrt_symmetric(&cross);
    let value = mean_term + cov_a.trace() + cov_b.trace() - 2.0 * cross_trace;
    Ok(value.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_sets_are_zero() {
        let a = vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![0.5, 0.25], vec![3.0, 3.0]];
        assert!(frechet_distance(&a, &a).unwrap() < 1e-8);
    }

    #[test]
    fn pure_shift_of_identical_clouds() {
        let a = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let b: Vec<Vec<f64>> = a.iter().map(|r| vec![r[0] + 3.0, r[1] - 4.0]).collect();
        assert!((frechet_distance(&a, &b).unwrap() - 25.0).abs() < 1e-9);
    }

    #[test]
    fn one_dimensional_formula() {
        // variances 2 and 8 with equal means: (sqrt 2 - sqrt 8)^2 = 2
        let a = vec![vec![-1.0], vec![1.0], vec![0.0], vec![0.0]];
        let b: Vec<Vec<f64>> = a.iter().map(|r| vec![2.0 * r[0]]).collect();
        let var_a = 2.0 / 3.0;
        let var_b = 8.0 / 3.0;
        let expect = (f64::sqrt(var_a) - f64::sqrt(var_b)).powi(2);
        assert!((frechet_distance(&a, &b).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn rejects_tiny_sets_and_mixed_dims() {
        let a = vec![vec![0.0]];
        let b = vec![vec![0.0], vec![1.0]];
        assert!(frechet_distance(&a, &b).is_err());
        let c = vec![vec![0.0, 1.0], vec![1.0, 1.0]];
        assert!(frechet_distance(&b, &c).is_err());
    }
}
