//! Synthetic black-box generator with a known undesired feature.
//!
//! Latents are standard normal, samples are `f(A z + b)` and a sample is
//! undesired exactly when `w . z > c`.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{FastError, Result};
use crate::latent::{FeedbackSet, LatentVector, SampleId};
use crate::lpf::SamplePair;
use crate::numeric::{dot, kahan_sum};

pub const DEFAULT_PREVALENCE: f64 = 0.1;
/// Slope of the piecewise-linear squash below zero.
pub const LEAKY_SLOPE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Nonlinearity {
    #[default]
    None,
    Tanh,
    PiecewiseLinear,
}

impl Nonlinearity {
    pub fn as_str(self) -> &'static str {
        match self {
            Nonlinearity::None => "none",
            Nonlinearity::Tanh => "tanh",
            Nonlinearity::PiecewiseLinear => "piecewise_linear",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Nonlinearity::None),
            "tanh" => Ok(Nonlinearity::Tanh),
            "piecewise_linear" | "pwl" => Ok(Nonlinearity::PiecewiseLinear),
            other => Err(FastError::Invalid(format!("unknown nonlinearity `{other}`"))),
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Nonlinearity::None => x,
            Nonlinearity::Tanh => x.tanh(),
            Nonlinearity::PiecewiseLinear => {
                if x < 0.0 {
                    LEAKY_SLOPE * x
                } else {
                    x
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    latent_dim: usize,
    data_dim: usize,
    /// Row-major, `data_dim` rows of `latent_dim` entries.
    mixing_matrix: Vec<f64>,
    offset: Vec<f64>,
    nonlinearity: Nonlinearity,
    feature_direction: LatentVector,
    feature_offset: f64,
    seed: u64,
}

impl GeneratorSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        latent_dim: usize,
        data_dim: usize,
        mixing_matrix: Vec<f64>,
        offset: Vec<f64>,
        nonlinearity: Nonlinearity,
        feature_direction: LatentVector,
        feature_offset: f64,
        seed: u64,
    ) -> Result<Self> {
        if latent_dim == 0 || data_dim == 0 {
            return Err(FastError::Invalid("generator dimensions must be positive".into()));
        }
        if mixing_matrix.len() != latent_dim * data_dim {
            return Err(FastError::DimensionMismatch {
                expected: latent_dim * data_dim,
                found: mixing_matrix.len(),
            });
        }
        if offset.len() != data_dim {
            return Err(FastError::DimensionMismatch {
                expected: data_dim,
                found: offset.len(),
            });
        }
        feature_direction.check_dim(latent_dim)?;
        if mixing_matrix.iter().chain(&offset).any(|v| !v.is_finite()) || !feature_offset.is_finite() {
            return Err(FastError::NonFinite("generator spec"));
        }
        if feature_direction.norm() == 0.0 {
            return Err(FastError::ZeroDirection("feature direction"));
        }
        Ok(Self {
            latent_dim,
            data_dim,
            mixing_matrix,
            offset,
            nonlinearity,
            feature_direction,
            feature_offset,
            seed,
        })
    }

    /// `A = I`, `b = 0`, no squash: samples equal latents.
    pub fn identity(dim: usize, feature_direction: LatentVector, feature_offset: f64) -> Result<Self> {
        let mut a = vec![0.0; dim * dim];
        for i in 0..dim {
            a[i * dim + i] = 1.0;
        }
        Self::new(dim, dim, a, vec![0.0; dim], Nonlinearity::None, feature_direction, feature_offset, 0)
    }

    /// Random well-conditioned mixing (`I + G / (2 sqrt d)` on the square
    /// part), random unit feature direction, and `c` set so that a fraction
    /// `prevalence` of prior draws is undesired.
    pub fn random(
        latent_dim: usize,
        data_dim: usize,
        nonlinearity: Nonlinearity,
        prevalence: f64,
        seed: u64,
    ) -> Result<Self> {
        if latent_dim == 0 || data_dim == 0 {
            return Err(FastError::Invalid("generator dimensions must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 0.5 / (latent_dim as f64).sqrt();
        let mut a = Vec::with_capacity(latent_dim * data_dim);
        for r in 0..data_dim {
            for c in 0..latent_dim {
                let g: f64 = rng.sample(StandardNormal);
                a.push(if r == c { 1.0 } else { 0.0 } + scale * g);
            }
        }
        let offset: Vec<f64> = (0..data_dim).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
        let raw: Vec<f64> = (0..latent_dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = kahan_sum(raw.iter().map(|v| v * v)).sqrt();
        let w = LatentVector::new(raw.iter().map(|v| v / n).collect())?;
        let c = prevalence_offset(prevalence, w.norm())?;
        Self::new(latent_dim, data_dim, a, offset, nonlinearity, w, c, seed)
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn data_dim(&self) -> usize {
        self.data_dim
    }

    pub fn mixing_matrix(&self) -> &[f64] {
        &self.mixing_matrix
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nonlinearity
    }

    pub fn feature_direction(&self) -> &LatentVector {
        &self.feature_direction
    }

    pub fn feature_offset(&self) -> f64 {
        self.feature_offset
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The black-box map `G(z)`.
    pub fn render(&self, z: &LatentVector) -> Result<Vec<f64>> {
        z.check_dim(self.latent_dim)?;
        Ok((0..self.data_dim)
            .map(|r| {
                let row = &self.mixing_matrix[r * self.latent_dim..(r + 1) * self.latent_dim];
                self.nonlinearity.apply(dot(row, z.as_slice()) + self.offset[r])
            })
            .collect())
    }

    /// Ground truth: `w . z > c`.
    pub fn label(&self, z: &LatentVector) -> Result<bool> {
        z.check_dim(self.latent_dim)?;
        Ok(dot(self.feature_direction.as_slice(), z.as_slice()) > self.feature_offset)
    }
}

/// `c` such that `P(w . z > c) = prevalence` under a standard normal prior.
pub fn prevalence_offset(prevalence: f64, w_norm: f64) -> Result<f64> {
    if !(prevalence > 0.0 && prevalence < 1.0) {
        return Err(FastError::Invalid(format!("prevalence must lie in (0, 1), got {prevalence}")));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(1.0 - prevalence) * w_norm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub latents: Vec<LatentVector>,
    pub samples: Vec<Vec<f64>>,
    /// `true` marks an undesired sample.
    pub labels: Vec<bool>,
}

impl LabeledBatch {
    pub fn len(&self) -> usize {
        self.latents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latents.is_empty()
    }

    /// Pairs keyed by row index, the id scheme used throughout.
    pub fn pairs(&self) -> Vec<SamplePair> {
        self.latents
            .iter()
            .zip(&self.samples)
            .enumerate()
            .map(|(i, (z, x))| SamplePair {
                latent: z.clone(),
                sample: x.clone(),
                sample_id: SampleId(i.to_string()),
            })
            .collect()
    }
}

/// Draws latents from the prior to feed a [`crate::mining`] pool.
pub fn prior_sampler(dim: usize, seed: u64) -> impl FnMut() -> LatentVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    move || {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        LatentVector::new(v).expect("standard normal draws are finite")
    }
}

pub fn generate(spec: &GeneratorSpec, n: usize, seed: u64) -> Result<LabeledBatch> {
    if n == 0 {
        return Err(FastError::Invalid("batch size must be positive".into()));
    }
    let mut draw = prior_sampler(spec.latent_dim, seed);
    let latents: Vec<LatentVector> = (0..n).map(|_| draw()).collect();
    let samples = latents.iter().map(|z| spec.render(z)).collect::<Result<_>>()?;
    let labels = latents.iter().map(|z| spec.label(z)).collect::<Result<_>>()?;
    Ok(LabeledBatch {
        latents,
        samples,
        labels,
    })
}

fn check_batch(spec: &GeneratorSpec, batch: &LabeledBatch) -> Result<()> {
    if batch.samples.len() != batch.len() || batch.labels.len() != batch.len() {
        return Err(FastError::Invalid("batch columns differ in length".into()));
    }
    for (z, (x, l)) in batch.latents.iter().zip(batch.samples.iter().zip(&batch.labels)) {
        if x.len() != spec.data_dim {
            return Err(FastError::DimensionMismatch {
                expected: spec.data_dim,
                found: x.len(),
            });
        }
        if spec.label(z)? != *l {
            return Err(FastError::Invalid("batch labels disagree with the generator spec".into()));
        }
    }
    Ok(())
}

/// Human-level reference filter: the samples without the feature.
pub fn oracle_filter(spec: &GeneratorSpec, batch: &LabeledBatch) -> Result<Vec<Vec<f64>>> {
    check_batch(spec, batch)?;
    Ok(batch
        .samples
        .iter()
        .zip(&batch.labels)
        .filter(|(_, l)| !**l)
        .map(|(x, _)| x.clone())
        .collect())
}

/// Uniform draw without replacement of `s_pos` clean and `s_neg` undesired
/// pool items. Ids are pool row indices.
pub fn make_feedback(
    spec: &GeneratorSpec,
    pool: &LabeledBatch,
    s_pos: usize,
    s_neg: usize,
    seed: u64,
) -> Result<FeedbackSet> {
    check_batch(spec, pool)?;
    let neg_idx: Vec<usize> = (0..pool.len()).filter(|&i| pool.labels[i]).collect();
    let pos_idx: Vec<usize> = (0..pool.len()).filter(|&i| !pool.labels[i]).collect();
    if neg_idx.len() < s_neg {
        return Err(FastError::Invalid(format!(
            "pool holds {} undesired samples, {s_neg} requested",
            neg_idx.len()
        )));
    }
    if pos_idx.len() < s_pos {
        return Err(FastError::Invalid(format!(
            "pool holds {} clean samples, {s_pos} requested",
            pos_idx.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |from: &[usize], k: usize| -> Vec<(SampleId, LatentVector)> {
        let mut chosen: Vec<usize> = sample_indices(&mut rng, from.len(), k).into_iter().map(|j| from[j]).collect();
        chosen.sort_unstable();
        chosen
            .into_iter()
            .map(|i| (SampleId(i.to_string()), pool.latents[i].clone()))
            .collect()
    };
    let negatives = pick(&neg_idx, s_neg);
    let positives = pick(&pos_idx, s_pos);
    FeedbackSet::new(positives, negatives)
}
