use crate::error::{FastError, Result};
use crate::latent::{Decision, FilterModel, LatentVector, Verdict};

use super::{auc, density_coverage, frechet_distance, recall, LabeledScore};

/// Test samples with their projected latents, data-space vectors and ground truth.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    pub latents: Vec<LatentVector>,
    pub samples: Vec<Vec<f64>>,
    /// `true` marks a sample carrying the undesired feature.
    pub labels: Vec<bool>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.latents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latents.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub recall: f64,
    pub auc: f64,
    /// `None` when the kept set is too small for a Gaussian fit.
    pub fid: Option<f64>,
    pub density: Option<f64>,
    pub coverage: Option<f64>,
    pub n_eval: usize,
    pub n_kept: usize,
    pub n_blocked: usize,
}

/// Scores `test` with `model` and compares the kept samples against
/// `reference`, the output of an oracle-quality filter.
pub fn evaluate(model: &FilterModel, test: &LabeledSet, reference: &[Vec<f64>], k: usize) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(FastError::Empty("evaluation set"));
    }
    if test.samples.len() != test.len() || test.labels.len() != test.len() {
        return Err(FastError::Invalid("evaluation set columns differ in length".into()));
    }
    if reference.is_empty() {
        return Err(FastError::Empty("reference set"));
    }
    let decisions: Vec<Decision> = test
        .latents
        .iter()
        .map(|z| model.decide(z))
        .collect::<Result<_>>()?;
    let scored: Vec<LabeledScore> = decisions
        .iter()
        .zip(&test.labels)
        .map(|(d, l)| LabeledScore::new(d.similarity, *l))
        .collect::<Result<_>>()?;

    let kept: Vec<&[f64]> = decisions
        .iter()
        .zip(&test.samples)
        .filter(|(d, _)| d.verdict == Verdict::Keep)
        .map(|(_, s)| s.as_slice())
        .collect();
    let reference: Vec<&[f64]> = reference.iter().map(|r| r.as_slice()).collect();

    let fid = if kept.len() >= 2 && reference.len() >= 2 {
        Some(frechet_distance(&kept, &reference)?)
    } else {
        None
    };
    let (density, coverage) = if !kept.is_empty() && reference.len() > k {
        let (d, c) = density_coverage(&reference, &kept, k)?;
        (Some(d), Some(c))
    } else {
        (None, None)
    };

    Ok(EvalReport {
        recall: recall(&decisions, &test.labels)?,
        auc: auc(&scored)?,
        fid,
        density,
        coverage,
        n_eval: test.len(),
        n_kept: kept.len(),
        n_blocked: test.len() - kept.len(),
    })
}
