//! Latent augmentation: enlarge each feedback class with draws from its
//! empirical Gaussian before computing the undesired direction.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{FastError, Result};
use crate::latent::{LatentVector, UndesiredDirection, UndesiredRepresentation};
use crate::numeric::{covariance_rows, mean_rows, psd_sqrt};

pub const DEFAULT_AUGMENT_COUNT: usize = 5000;
pub const DEFAULT_LAMBDA_REL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceMode {
    #[default]
    Full,
    /// Keep only the diagonal of the sample covariance.
    Diagonal,
}

impl CovarianceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CovarianceMode::Full => "full",
            CovarianceMode::Diagonal => "diagonal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(CovarianceMode::Full),
            "diagonal" | "diag" => Ok(CovarianceMode::Diagonal),
            other => Err(FastError::Invalid(format!("unknown covariance mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalGaussian {
    mean: LatentVector,
    covariance: DMatrix<f64>,
    regularization: f64,
}

impl EmpiricalGaussian {
    pub fn new(mean: LatentVector, covariance: DMatrix<f64>, regularization: f64) -> Result<Self> {
        let d = mean.dim();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(FastError::DimensionMismatch {
                expected: d,
                found: covariance.nrows(),
            });
        }
        if !(regularization >= 0.0 && regularization.is_finite()) {
            return Err(FastError::Invalid(format!("regularization must be >= 0, got {regularization}")));
        }
        let scale = covariance.abs().max().max(1.0);
        for i in 0..d {
            for j in (i + 1)..d {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > 1e-12 * scale {
                    return Err(FastError::Invalid("covariance is not symmetric".into()));
                }
            }
        }
        Ok(Self {
            mean,
            covariance,
            regularization,
        })
    }

    pub fn mean(&self) -> &LatentVector {
        &self.mean
    }

    /// The unregularised sample covariance.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    pub fn regularized_covariance(&self) -> DMatrix<f64> {
        let d = self.mean.dim();
        &self.covariance + DMatrix::identity(d, d) * self.regularization
    }

    /// Symmetric factor `S` with `S S = cov + lambda I`.
    pub fn factor(&self) -> Result<DMatrix<f64>> {
        psd_sqrt(&self.regularized_covariance())
    }
}

/// Sample mean and (n - 1) covariance, with diagonal loading
/// `lambda = lambda_rel * trace(cov) / d`.
pub fn empirical_gaussian(z: &[LatentVector], lambda_rel: f64) -> Result<EmpiricalGaussian> {
    empirical_gaussian_with(z, lambda_rel, CovarianceMode::Full)
}

pub fn empirical_gaussian_with(z: &[LatentVector], lambda_rel: f64, mode: CovarianceMode) -> Result<EmpiricalGaussian> {
    if z.len() < 2 {
        return Err(FastError::Invalid(format!(
            "empirical gaussian needs at least 2 samples, got {}",
            z.len()
        )));
    }
    if !(lambda_rel >= 0.0 && lambda_rel.is_finite()) {
        return Err(FastError::Invalid(format!("lambda_rel must be >= 0, got {lambda_rel}")));
    }
    let d = z[0].dim();
    for v in z {
        v.check_dim(d)?;
    }
    let mean = mean_rows(z);
    let mut cov = covariance_rows(z, &mean);
    if mode == CovarianceMode::Diagonal {
        cov = DMatrix::from_diagonal(&cov.diagonal());
    }
    let lambda = lambda_rel * cov.trace() / d as f64;
    EmpiricalGaussian::new(LatentVector::new(mean)?, cov, lambda)
}

/// `count` draws `mean + S xi` with `xi ~ N(0, I)` and `S` the symmetric
/// square root of the regularised covariance.
pub fn augment_latents(gaussian: &EmpiricalGaussian, count: usize, seed: u64) -> Result<Vec<LatentVector>> {
    if count == 0 {
        return Err(FastError::Invalid("augmentation count must be positive".into()));
    }
    let factor = gaussian.factor()?;
    let d = gaussian.mean.dim();
    let mean = DVector::from_column_slice(gaussian.mean.as_slice());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let xi = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(&mut rng)));
        let draw = &mean + &factor * xi;
        out.push(LatentVector::new(draw.iter().copied().collect())?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub count: usize,
    pub lambda_rel: f64,
    pub mode: CovarianceMode,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            count: DEFAULT_AUGMENT_COUNT,
            lambda_rel: DEFAULT_LAMBDA_REL,
            mode: CovarianceMode::Full,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    /// Enlarges one class: the original latents followed by `count` draws.
    pub fn augment_class(&self, z: &[LatentVector], stream: u64) -> Result<Vec<LatentVector>> {
        let g = empirical_gaussian_with(z, self.lambda_rel, self.mode)?;
        let seed = self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream);
        let mut out = z.to_vec();
        out.extend(augment_latents(&g, self.count, seed)?);
        Ok(out)
    }
}

/// Wraps a URF so that it sees augmented feedback classes.
#[derive(Debug, Clone)]
pub struct Augmented<U> {
    pub inner: U,
    pub config: AugmentConfig,
}

impl<U> Augmented<U> {
    pub fn new(inner: U, config: AugmentConfig) -> Self {
        Self { inner, config }
    }
}

impl<U: UndesiredRepresentation> UndesiredRepresentation for Augmented<U> {
    fn represent(&self, negatives: &[LatentVector], positives: &[LatentVector]) -> Result<UndesiredDirection> {
        let zn = self.config.augment_class(negatives, 1)?;
        let zp = self.config.augment_class(positives, 2)?;
        Ok(self.inner.represent(&zn, &zp)?.with_augmented(true))
    }
}
