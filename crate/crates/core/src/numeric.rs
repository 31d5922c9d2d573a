//! Small numeric kernels shared across modules: compensated summation,
//! dense vector helpers and symmetric-matrix routines on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{FastError, Result};

/// Kahan–Babuška (Neumaier) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<KahanSum>().total()
}

pub fn kahan_mean(values: &[f64]) -> f64 {
    kahan_sum(values.iter().copied()) / values.len() as f64
}

/// Dot product with compensated accumulation.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    kahan_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Column-wise mean of equally sized rows.
pub fn mean_rows<R: AsRef<[f64]>>(rows: &[R]) -> Vec<f64> {
    let dim = rows[0].as_ref().len();
    let mut acc = vec![KahanSum::new(); dim];
    for row in rows {
        for (a, &x) in acc.iter_mut().zip(row.as_ref()) {
            a.add(x);
        }
    }
    let n = rows.len() as f64;
    acc.iter().map(|a| a.total() / n).collect()
}

/// Sample covariance with the (n - 1) denominator.
pub fn covariance_rows<R: AsRef<[f64]>>(rows: &[R], mean: &[f64]) -> DMatrix<f64> {
    let d = mean.len();
    let n = rows.len();
    let centered = DMatrix::from_fn(n, d, |i, j| rows[i].as_ref()[j] - mean[j]);
    let mut cov = centered.transpose() * &centered / (n as f64 - 1.0);
    symmetrize(&mut cov);
    cov
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Relative tolerance below which a negative eigenvalue is treated as rounding noise.
const EIGEN_CLAMP_RTOL: f64 = 1e-10;

/// Symmetric square root `V diag(sqrt(max(l, 0))) V^T` of a symmetric PSD matrix.
///
/// Eigenvalues below `-EIGEN_CLAMP_RTOL * max|l|` are reported as a factorization
/// failure; smaller negative values are clamped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let floor = -EIGEN_CLAMP_RTOL * scale.max(f64::MIN_POSITIVE);
    if let Some(bad) = eig.eigenvalues.iter().find(|l| **l < floor || !l.is_finite()) {
        return Err(FastError::Factorization(format!(
            "matrix is not positive semidefinite (eigenvalue {bad:.3e})"
        )));
    }
    let noise = noise_floor(m.nrows(), scale);
    let roots = eig.eigenvalues.map(|l| if l > noise { l.sqrt() } else { 0.0 });
    let v = &eig.eigenvectors;
    let mut out = v * DMatrix::from_diagonal(&roots) * v.transpose();
    symmetrize(&mut out);
    Ok(out)
}

/// Eigenvalues at or below this level are indistinguishable from zero after
/// an eigensolve; their square roots would otherwise inject `O(sqrt(eps))` noise.
fn noise_floor(n: usize, scale: f64) -> f64 {
    n.max(1) as f64 * f64::EPSILON * scale
}

/// Sum of square roots of the (clamped) eigenvalues of a symmetric matrix.
pub fn trace_sqrt_symmetric(m: &DMatrix<f64>) -> f64 {
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let noise = noise_floor(m.nrows(), scale);
    kahan_sum(eig.eigenvalues.iter().map(|l| if *l > noise { l.sqrt() } else { 0.0 }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut values = vec![1e16];
        values.extend(std::iter::repeat(1.0).take(1000));
        values.push(-1e16);
        assert_eq!(kahan_sum(values.iter().copied()), 1000.0);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = psd_sqrt(&m).unwrap();
        let back = &r * &r;
        assert!((back - m).abs().max() < 1e-12);
    }

    #[test]
    fn psd_sqrt_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(psd_sqrt(&m), Err(FastError::Factorization(_))));
    }

    #[test]
    fn covariance_uses_n_minus_one() {
        let rows = vec![vec![0.0], vec![2.0]];
        let mean = mean_rows(&rows);
        assert_eq!(mean, vec![1.0]);
        assert_eq!(covariance_rows(&rows, &mean)[(0, 0)], 2.0);
    }
}
