//! Filtering metrics: recall on undesired samples, threshold-sweep AUC,
//! Fréchet distance and kNN density/coverage against a reference set.

mod frechet;
mod manifold;
mod report;

pub use frechet::frechet_distance;
pub use manifold::{density_coverage, density_coverage_brute, density_coverage_pruned, DEFAULT_K, PRUNING_THRESHOLD};
pub use report::{evaluate, EvalReport, LabeledSet};

use crate::error::{FastError, Result};
use crate::latent::{Decision, Verdict};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledScore {
    pub score: f64,
    /// Ground truth: the sample carries the undesired feature.
    pub is_negative: bool,
}

impl LabeledScore {
    pub fn new(score: f64, is_negative: bool) -> Result<Self> {
        if !score.is_finite() {
            return Err(FastError::NonFinite("labeled score"));
        }
        Ok(Self { score, is_negative })
    }
}

fn check_pairs(decisions: &[Decision], labels: &[bool]) -> Result<usize> {
    if decisions.len() != labels.len() {
        return Err(FastError::DimensionMismatch {
            expected: decisions.len(),
            found: labels.len(),
        });
    }
    let negatives = labels.iter().filter(|l| **l).count();
    if negatives == 0 {
        return Err(FastError::Invalid("recall is undefined without undesired samples".into()));
    }
    Ok(negatives)
}

/// Fraction of undesired samples that were blocked.
pub fn recall(decisions: &[Decision], labels: &[bool]) -> Result<f64> {
    let negatives = check_pairs(decisions, labels)?;
    let hit = decisions
        .iter()
        .zip(labels)
        .filter(|(d, l)| **l && d.verdict == Verdict::Block)
        .count();
    Ok(hit as f64 / negatives as f64)
}

/// Fraction of undesired samples that slipped through.
pub fn miss_rate(decisions: &[Decision], labels: &[bool]) -> Result<f64> {
    let negatives = check_pairs(decisions, labels)?;
    let missed = decisions
        .iter()
        .zip(labels)
        .filter(|(d, l)| **l && d.verdict == Verdict::Keep)
        .count();
    Ok(missed as f64 / negatives as f64)
}

/// One operating point of the threshold sweep: blocking every score
/// `>= threshold` yields the given rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub false_positive_rate: f64,
    pub true_positive_rate: f64,
}

struct SweepStep {
    threshold: f64,
    tp: u64,
    fp: u64,
}

/// Cumulative (tp, fp) counts after each distinct score, highest first.
fn sweep(scored: &[LabeledScore]) -> Result<(Vec<SweepStep>, u64, u64)> {
    let n_neg = scored.iter().filter(|s| s.is_negative).count() as u64;
    let n_pos = scored.len() as u64 - n_neg;
    if n_neg == 0 || n_pos == 0 {
        return Err(FastError::Invalid("auc needs both labels present".into()));
    }
    if scored.iter().any(|s| !s.score.is_finite()) {
        return Err(FastError::NonFinite("labeled score"));
    }
    let mut sorted: Vec<LabeledScore> = scored.to_vec();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut steps: Vec<SweepStep> = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].score;
        while i < sorted.len() && sorted[i].score == t {
            if sorted[i].is_negative {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        steps.push(SweepStep { threshold: t, tp, fp });
    }
    Ok((steps, n_neg, n_pos))
}

/// ROC curve of the block-if-score-reaches-threshold rule, from (0, 0) to (1, 1).
pub fn roc_curve(scored: &[LabeledScore]) -> Result<Vec<RocPoint>> {
    let (steps, n_neg, n_pos) = sweep(scored)?;
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        false_positive_rate: 0.0,
        true_positive_rate: 0.0,
    }];
    points.extend(steps.iter().map(|s| RocPoint {
        threshold: s.threshold,
        false_positive_rate: s.fp as f64 / n_pos as f64,
        true_positive_rate: s.tp as f64 / n_neg as f64,
    }));
    Ok(points)
}

/// Trapezoidal area under the ROC curve.
///
/// Accumulated in integer units, so the result equals the Mann–Whitney
/// statistic `P(neg > pos) + P(tie) / 2` up to one final division.
pub fn auc(scored: &[LabeledScore]) -> Result<f64> {
    let (steps, n_neg, n_pos) = sweep(scored)?;
    let mut twice_area: u128 = 0;
    let (mut tp_prev, mut fp_prev) = (0u64, 0u64);
    for s in &steps {
        twice_area += (s.fp - fp_prev) as u128 * (s.tp + tp_prev) as u128;
        tp_prev = s.tp;
        fp_prev = s.fp;
    }
    Ok(twice_area as f64 / (2.0 * n_neg as f64 * n_pos as f64))
}

/// Equal-width histogram over `[min, max]` of the observed values.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub min: f64,
    pub max: f64,
    pub counts: Vec<u64>,
}

pub const HISTOGRAM_BINS: usize = 50;

pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if values.is_empty() {
        return Err(FastError::Empty("histogram values"));
    }
    if bins == 0 {
        return Err(FastError::Invalid("histogram needs at least one bin".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(FastError::NonFinite("histogram values"));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = vec![0u64; bins];
    let width = (max - min) / bins as f64;
    for v in values {
        let idx = if width > 0.0 {
            (((v - min) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    Ok(Histogram { min, max, counts })
}
