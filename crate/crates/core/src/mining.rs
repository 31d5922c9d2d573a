//! Positive mining for negatives-only feedback.
//!
//! The negatives' mean is used as a probe direction. Fresh prior draws whose
//! projection onto it falls well below every negative's own projection are
//! taken as positives.

use crate::error::{FastError, Result};
use crate::latent::{compute_threshold, projection_score, FilterModel, LatentVector, UndesiredDirection, UrfMethod};
use crate::numeric::{kahan_mean, kahan_sum, mean_rows};

pub const DEFAULT_ALPHA: f64 = 2.0;
pub const DEFAULT_POOL_FACTOR: usize = 10;
pub const DEFAULT_CAP_FACTOR: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct MiningScores {
    pub center: LatentVector,
    pub scores: Vec<f64>,
    pub min_score: f64,
    /// Sample standard deviation of `scores`.
    pub score_spread: f64,
}

impl MiningScores {
    /// `min_score - alpha * score_spread`; candidates must score strictly below it.
    pub fn cutoff(&self, alpha: f64) -> f64 {
        if self.score_spread == 0.0 {
            self.min_score
        } else {
            self.min_score - alpha * self.score_spread
        }
    }

    pub fn score(&self, z: &LatentVector) -> Result<f64> {
        projection_score(z, &self.center)
    }
}

pub fn negative_similarity_scores(zn: &[LatentVector]) -> Result<MiningScores> {
    if zn.len() < 2 {
        return Err(FastError::Invalid(format!(
            "positive mining needs at least 2 negatives, got {}",
            zn.len()
        )));
    }
    let dim = zn[0].dim();
    for z in zn {
        z.check_dim(dim)?;
    }
    let center = LatentVector::new(mean_rows(zn))?;
    if center.norm() == 0.0 {
        return Err(FastError::ZeroDirection("negatives' mean is the origin"));
    }
    let scores = zn
        .iter()
        .map(|z| projection_score(z, &center))
        .collect::<Result<Vec<_>>>()?;
    let min_score = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = kahan_mean(&scores);
    let var = kahan_sum(scores.iter().map(|s| (s - mean) * (s - mean))) / (scores.len() as f64 - 1.0);
    Ok(MiningScores {
        center,
        scores,
        min_score,
        score_spread: var.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiningOutcome {
    pub mined: Vec<LatentVector>,
    pub requested: usize,
    pub examined: usize,
}

impl MiningOutcome {
    pub fn is_short(&self) -> bool {
        self.mined.len() < self.requested
    }
}

/// Up to `want` candidates scoring below the cutoff, in candidate order.
pub fn mine_positives(
    candidates: &[LatentVector],
    mining: &MiningScores,
    alpha: f64,
    want: usize,
) -> Result<MiningOutcome> {
    if want == 0 {
        return Err(FastError::Invalid("want must be at least 1".into()));
    }
    if alpha.is_nan() || alpha < 0.0 {
        return Err(FastError::Invalid(format!("alpha must be >= 0, got {alpha}")));
    }
    let mut outcome = MiningOutcome {
        mined: Vec::new(),
        requested: want,
        examined: 0,
    };
    collect(candidates, mining, alpha, &mut outcome)?;
    Ok(outcome)
}

fn collect(candidates: &[LatentVector], mining: &MiningScores, alpha: f64, out: &mut MiningOutcome) -> Result<()> {
    if alpha.is_infinite() && mining.score_spread > 0.0 {
        out.examined += candidates.len();
        return Ok(());
    }
    let cutoff = mining.cutoff(alpha);
    for z in candidates {
        if out.mined.len() >= out.requested {
            break;
        }
        out.examined += 1;
        if mining.score(z)? < cutoff {
            out.mined.push(z.clone());
        }
    }
    Ok(())
}

/// Draws candidates from `sampler` in batches of `pool_factor * want` until
/// `want` positives are found or `cap_factor * want` draws were spent.
pub fn mine_from_prior<S>(
    mining: &MiningScores,
    alpha: f64,
    want: usize,
    pool_factor: usize,
    cap_factor: usize,
    mut sampler: S,
) -> Result<MiningOutcome>
where
    S: FnMut() -> LatentVector,
{
    if want == 0 || pool_factor == 0 || cap_factor < pool_factor {
        return Err(FastError::Invalid("invalid mining pool configuration".into()));
    }
    if alpha.is_nan() || alpha < 0.0 {
        return Err(FastError::Invalid(format!("alpha must be >= 0, got {alpha}")));
    }
    let batch = pool_factor * want;
    let cap = cap_factor * want;
    let mut outcome = MiningOutcome {
        mined: Vec::new(),
        requested: want,
        examined: 0,
    };
    let mut drawn = 0;
    while outcome.mined.len() < want && drawn < cap {
        let size = batch.min(cap - drawn);
        let pool: Vec<LatentVector> = (0..size).map(|_| sampler()).collect();
        drawn += size;
        collect(&pool, mining, alpha, &mut outcome)?;
    }
    Ok(outcome)
}

/// Reference filter for the negatives-only regime without mining: the
/// negatives' mean as direction and the negatives' mean score as threshold.
pub fn negatives_only_baseline(zn: &[LatentVector], lpf_id: &str) -> Result<FilterModel> {
    let scores = negative_similarity_scores(zn)?;
    let threshold = compute_threshold(&scores.scores, &scores.scores)?;
    let direction = UndesiredDirection::new(scores.center, UrfMethod::MeanDifference, false)?;
    FilterModel::new(direction, threshold, lpf_id)
}
