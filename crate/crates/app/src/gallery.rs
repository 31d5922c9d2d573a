//! 2-D display coordinates for corpus rows: projections onto the first two
//! principal directions of the samples.

use fast_core::numeric::{covariance_rows, mean_rows};
use nalgebra::SymmetricEigen;

use crate::corpus::Corpus;

pub fn pca_coordinates(corpus: &Corpus) -> Vec<[f64; 2]> {
    let samples = corpus.samples();
    if samples.len() < 2 {
        return vec![[0.0, 0.0]; samples.len()];
    }
    let mean = mean_rows(&samples);
    let cov = covariance_rows(&samples, &mean);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let axes: Vec<Vec<f64>> = order
        .iter()
        .take(2)
        .map(|&j| {
            let mut v: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
            // Sign convention: the largest-magnitude entry is positive.
            let pivot = v
                .iter()
                .copied()
                .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
            if pivot < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();

    samples
        .iter()
        .map(|x| {
            let mut out = [0.0; 2];
            for (slot, axis) in out.iter_mut().zip(&axes) {
                *slot = x.iter().zip(&mean).zip(axis).map(|((xi, mi), ai)| (xi - mi) * ai).sum();
            }
            out
        })
        .collect()
}
