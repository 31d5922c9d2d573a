//! Undesired representation functions.
//!
//! Each URF turns the projected negative and positive feedback latents into
//! one direction. The direction is always oriented so that negatives score
//! higher than positives, which is what the blocking rule expects.

mod augment;
mod svm;

pub use augment::{
    augment_latents, empirical_gaussian, empirical_gaussian_with, AugmentConfig, Augmented, CovarianceMode,
    EmpiricalGaussian, DEFAULT_AUGMENT_COUNT, DEFAULT_LAMBDA_REL,
};
pub use svm::{train_linear_svm, LinearSvm, SvmConfig};

use crate::error::{FastError, Result};
use crate::latent::{LatentVector, UndesiredDirection, UndesiredRepresentation, UrfMethod};
use crate::numeric::{dot, mean_rows};

pub(crate) fn check_classes(zn: &[LatentVector], zp: &[LatentVector]) -> Result<usize> {
    if zn.is_empty() {
        return Err(FastError::Empty("negative latents"));
    }
    if zp.is_empty() {
        return Err(FastError::Empty("positive latents"));
    }
    let dim = zn[0].dim();
    for z in zn.iter().chain(zp) {
        z.check_dim(dim)?;
    }
    Ok(dim)
}

/// `mean(zn) - mean(zp)`.
pub fn mean_difference(zn: &[LatentVector], zp: &[LatentVector]) -> Result<UndesiredDirection> {
    check_classes(zn, zp)?;
    let mn = mean_rows(zn);
    let mp = mean_rows(zp);
    let diff: Vec<f64> = mn.iter().zip(&mp).map(|(a, b)| a - b).collect();
    if diff.iter().all(|v| *v == 0.0) {
        return Err(FastError::ZeroDirection("class means coincide"));
    }
    UndesiredDirection::new(LatentVector::new(diff)?, UrfMethod::MeanDifference, false)
}

/// Normal of a linear soft-margin SVM separating `zn` (label +1) from `zp`
/// (label -1). The intercept is discarded.
pub fn svm_normal(zn: &[LatentVector], zp: &[LatentVector], config: &SvmConfig) -> Result<UndesiredDirection> {
    check_classes(zn, zp)?;
    let fit = train_linear_svm(zn, zp, config)?;
    let mut w = fit.weights;
    let mn = mean_rows(zn);
    let mp = mean_rows(zp);
    let gap: Vec<f64> = mn.iter().zip(&mp).map(|(a, b)| a - b).collect();
    if dot(&w, &gap) < 0.0 {
        w.iter_mut().for_each(|v| *v = -*v);
    }
    if w.iter().all(|v| *v == 0.0) {
        return Err(FastError::ZeroDirection("svm normal vanished"));
    }
    UndesiredDirection::new(LatentVector::new(w)?, UrfMethod::SvmNormal, false)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MeanDifference;

impl UndesiredRepresentation for MeanDifference {
    fn represent(&self, negatives: &[LatentVector], positives: &[LatentVector]) -> Result<UndesiredDirection> {
        mean_difference(negatives, positives)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SvmNormal {
    pub config: SvmConfig,
}

impl SvmNormal {
    pub fn new(config: SvmConfig) -> Self {
        Self { config }
    }
}

impl UndesiredRepresentation for SvmNormal {
    fn represent(&self, negatives: &[LatentVector], positives: &[LatentVector]) -> Result<UndesiredDirection> {
        svm_normal(negatives, positives, &self.config)
    }
}
