//! Latent-space types and the similarity-thresholding filter.
//!
//! A filter is fitted from a handful of user-marked samples: both feedback
//! classes are projected into a latent space, reduced to a single
//! "undesired" direction, and a threshold is placed halfway between the
//! two classes' mean projection scores. New samples whose scalar projection
//! onto the direction reaches the threshold are blocked.

use std::collections::HashSet;
use std::fmt;

use crate::error::{FastError, Result};
use crate::numeric::{dot, kahan_mean, kahan_sum, norm};

/// A dense, finite latent coordinate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentVector(Vec<f64>);

impl LatentVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(FastError::Empty("latent vector"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FastError::NonFinite("latent vector"));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "latent dimension must be positive");
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|v| v * factor).collect())
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(FastError::DimensionMismatch {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

impl AsRef<[f64]> for LatentVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for LatentVector {
    type Error = FastError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// Identifier of a generated sample shown to the user.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SampleId(pub String);

impl SampleId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SampleId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// User feedback: samples marked as carrying the undesired feature
/// (`negatives`) and samples marked as clean (`positives`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackSet {
    positives: Vec<(SampleId, LatentVector)>,
    negatives: Vec<(SampleId, LatentVector)>,
}

impl FeedbackSet {
    /// Positives may be empty (negatives-only regime); negatives may not.
    pub fn new(
        positives: Vec<(SampleId, LatentVector)>,
        negatives: Vec<(SampleId, LatentVector)>,
    ) -> Result<Self> {
        if negatives.is_empty() {
            return Err(FastError::Empty("negative feedback"));
        }
        let dim = negatives[0].1.dim();
        let mut seen = HashSet::new();
        for (id, z) in negatives.iter().chain(&positives) {
            z.check_dim(dim)?;
            if !seen.insert(id.clone()) {
                return Err(FastError::DuplicateSample(id.0.clone()));
            }
        }
        Ok(Self {
            positives,
            negatives,
        })
    }

    pub fn dim(&self) -> usize {
        self.negatives[0].1.dim()
    }

    pub fn positives(&self) -> &[(SampleId, LatentVector)] {
        &self.positives
    }

    pub fn negatives(&self) -> &[(SampleId, LatentVector)] {
        &self.negatives
    }

    pub fn positive_latents(&self) -> Vec<LatentVector> {
        self.positives.iter().map(|(_, z)| z.clone()).collect()
    }

    pub fn negative_latents(&self) -> Vec<LatentVector> {
        self.negatives.iter().map(|(_, z)| z.clone()).collect()
    }

    /// Returns a copy whose positives are extended with inferred latents,
    /// named `mined-0`, `mined-1`, ...
    pub fn with_mined_positives(&self, mined: &[LatentVector]) -> Result<Self> {
        let mut positives = self.positives.clone();
        positives.extend(
            mined
                .iter()
                .enumerate()
                .map(|(i, z)| (SampleId(format!("mined-{i}")), z.clone())),
        );
        Self::new(positives, self.negatives.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UrfMethod {
    MeanDifference,
    SvmNormal,
}

impl UrfMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            UrfMethod::MeanDifference => "MeanDifference",
            UrfMethod::SvmNormal => "SvmNormal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "MeanDifference" => Ok(UrfMethod::MeanDifference),
            "SvmNormal" => Ok(UrfMethod::SvmNormal),
            other => Err(FastError::Invalid(format!("unknown URF method `{other}`"))),
        }
    }
}

/// The latent direction that represents the undesired feature.
#[derive(Debug, Clone, PartialEq)]
pub struct UndesiredDirection {
    direction: LatentVector,
    method: UrfMethod,
    augmented: bool,
}

impl UndesiredDirection {
    pub fn new(direction: LatentVector, method: UrfMethod, augmented: bool) -> Result<Self> {
        if direction.norm() <= 0.0 {
            return Err(FastError::ZeroDirection("undesired direction"));
        }
        Ok(Self {
            direction,
            method,
            augmented,
        })
    }

    pub fn direction(&self) -> &LatentVector {
        &self.direction
    }

    pub fn method(&self) -> UrfMethod {
        self.method
    }

    pub fn augmented(&self) -> bool {
        self.augmented
    }

    pub fn dim(&self) -> usize {
        self.direction.dim()
    }

    pub(crate) fn with_augmented(mut self, augmented: bool) -> Self {
        self.augmented = augmented;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Block,
    Keep,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Block => "block",
            Verdict::Keep => "keep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub verdict: Verdict,
    pub similarity: f64,
}

impl Decision {
    pub fn is_blocked(&self) -> bool {
        self.verdict == Verdict::Block
    }
}

/// Scalar projection `z . u / ||u||` of `z` onto the undesired direction.
///
/// This is not cosine similarity: `z` is left unnormalised.
pub fn similarity(z: &LatentVector, u: &UndesiredDirection) -> Result<f64> {
    projection_score(z, u.direction())
}

pub(crate) fn projection_score(z: &LatentVector, direction: &LatentVector) -> Result<f64> {
    z.check_dim(direction.dim())?;
    let n = direction.norm();
    if n <= 0.0 {
        return Err(FastError::ZeroDirection("similarity direction"));
    }
    Ok(dot(z.as_slice(), direction.as_slice()) / n)
}

/// Operating threshold: the mean of the two per-class mean similarities.
///
/// With equally many negatives and positives this is the grand mean of all
/// feedback similarities.
pub fn compute_threshold(neg_sims: &[f64], pos_sims: &[f64]) -> Result<f64> {
    if neg_sims.is_empty() {
        return Err(FastError::Empty("negative similarities"));
    }
    if pos_sims.is_empty() {
        return Err(FastError::Empty("positive similarities"));
    }
    if neg_sims.iter().chain(pos_sims).any(|s| !s.is_finite()) {
        return Err(FastError::NonFinite("feedback similarities"));
    }
    if neg_sims.len() == pos_sims.len() {
        let total = kahan_sum(neg_sims.iter().chain(pos_sims).copied());
        Ok(total / (2 * neg_sims.len()) as f64)
    } else {
        Ok(0.5 * (kahan_mean(neg_sims) + kahan_mean(pos_sims)))
    }
}

/// Blocks when `sim_value >= threshold`; ties block.
pub fn decide(sim_value: f64, threshold: f64) -> Result<Decision> {
    if !sim_value.is_finite() {
        return Err(FastError::NonFinite("similarity"));
    }
    if !threshold.is_finite() {
        return Err(FastError::NonFinite("threshold"));
    }
    let verdict = if sim_value >= threshold {
        Verdict::Block
    } else {
        Verdict::Keep
    };
    Ok(Decision {
        verdict,
        similarity: sim_value,
    })
}

/// A fitted, immutable filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterModel {
    direction: UndesiredDirection,
    threshold: f64,
    lpf_id: String,
}

impl FilterModel {
    pub fn new(direction: UndesiredDirection, threshold: f64, lpf_id: impl Into<String>) -> Result<Self> {
        if !threshold.is_finite() {
            return Err(FastError::NonFinite("threshold"));
        }
        Ok(Self {
            direction,
            threshold,
            lpf_id: lpf_id.into(),
        })
    }

    pub fn direction(&self) -> &UndesiredDirection {
        &self.direction
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn lpf_id(&self) -> &str {
        &self.lpf_id
    }

    pub fn dim(&self) -> usize {
        self.direction.dim()
    }

    pub fn similarity(&self, projected: &LatentVector) -> Result<f64> {
        similarity(projected, &self.direction)
    }

    /// Decision for an already projected latent.
    pub fn decide(&self, projected: &LatentVector) -> Result<Decision> {
        decide(self.similarity(projected)?, self.threshold)
    }

    /// Decision using a caller-chosen threshold instead of the fitted one.
    pub fn decide_with(&self, projected: &LatentVector, threshold: f64) -> Result<Decision> {
        decide(self.similarity(projected)?, threshold)
    }
}

/// Latent projection function: maps a generated sample, addressed by the
/// generator latent that produced it, into the space the filter works in.
pub trait LatentProjection {
    fn id(&self) -> &str;

    fn project(&self, z: &LatentVector) -> Result<LatentVector>;
}

/// Undesired representation function: reduces the two feedback classes to
/// a single direction.
pub trait UndesiredRepresentation {
    fn represent(&self, negatives: &[LatentVector], positives: &[LatentVector]) -> Result<UndesiredDirection>;
}

impl<U: UndesiredRepresentation + ?Sized> UndesiredRepresentation for Box<U> {
    fn represent(&self, negatives: &[LatentVector], positives: &[LatentVector]) -> Result<UndesiredDirection> {
        (**self).represent(negatives, positives)
    }
}

#[derive(Debug, Clone)]
pub struct FastOutcome {
    pub model: FilterModel,
    pub kept: Vec<LatentVector>,
    pub blocked: Vec<LatentVector>,
    /// One decision per test latent, in input order.
    pub decisions: Vec<Decision>,
}

/// Fits a filter on `feedback` and partitions `test_latents` with it.
///
/// `kept` and `blocked` hold the caller's test latents (not their
/// projections) in input order.
pub fn run_fast(
    feedback: &FeedbackSet,
    lpf: &dyn LatentProjection,
    urf: &dyn UndesiredRepresentation,
    test_latents: &[LatentVector],
) -> Result<FastOutcome> {
    let model = fit_filter(feedback, lpf, urf)?;
    let mut kept = Vec::new();
    let mut blocked = Vec::new();
    let mut decisions = Vec::with_capacity(test_latents.len());
    for z in test_latents {
        let projected = lpf.project(z)?;
        let decision = model.decide(&projected)?;
        match decision.verdict {
            Verdict::Block => blocked.push(z.clone()),
            Verdict::Keep => kept.push(z.clone()),
        }
        decisions.push(decision);
    }
    Ok(FastOutcome {
        model,
        kept,
        blocked,
        decisions,
    })
}

/// The fitting half of [`run_fast`].
pub fn fit_filter(
    feedback: &FeedbackSet,
    lpf: &dyn LatentProjection,
    urf: &dyn UndesiredRepresentation,
) -> Result<FilterModel> {
    if feedback.positives().is_empty() {
        return Err(FastError::Empty("positive feedback (mine positives first)"));
    }
    let project_all = |items: &[(SampleId, LatentVector)]| -> Result<Vec<LatentVector>> {
        items.iter().map(|(_, z)| lpf.project(z)).collect()
    };
    let zn = project_all(feedback.negatives())?;
    let zp = project_all(feedback.positives())?;
    let dim = zn[0].dim();
    for z in zn.iter().chain(&zp) {
        z.check_dim(dim)?;
    }
    let direction = urf.represent(&zn, &zp)?;
    direction.direction().check_dim(dim)?;
    let neg_sims = zn
        .iter()
        .map(|z| similarity(z, &direction))
        .collect::<Result<Vec<_>>>()?;
    let pos_sims = zp
        .iter()
        .map(|z| similarity(z, &direction))
        .collect::<Result<Vec<_>>>()?;
    let threshold = compute_threshold(&neg_sims, &pos_sims)?;
    FilterModel::new(direction, threshold, lpf.id())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(v: &[f64]) -> LatentVector {
        LatentVector::new(v.to_vec()).unwrap()
    }

    fn dir(v: &[f64]) -> UndesiredDirection {
        UndesiredDirection::new(lv(v), UrfMethod::MeanDifference, false).unwrap()
    }

    #[test]
    fn latent_rejects_nan_and_empty() {
        assert!(LatentVector::new(vec![]).is_err());
        assert!(LatentVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(LatentVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(similarity(&lv(&[0.0, 0.0, 0.0]), &dir(&[1.0, -2.0, 5.0])).unwrap(), 0.0);
        let u = dir(&[3.0, 4.0]);
        assert!((similarity(&lv(&[3.0, 4.0]), &u).unwrap() - 5.0).abs() < 1e-15);
        assert_eq!(similarity(&lv(&[3.0, 4.0]), &dir(&[0.0, 2.0])).unwrap(), 4.0);
    }

    #[test]
    fn similarity_errors() {
        assert!(matches!(
            similarity(&lv(&[1.0]), &dir(&[1.0, 1.0])),
            Err(FastError::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert!(UndesiredDirection::new(lv(&[0.0, 0.0]), UrfMethod::SvmNormal, false).is_err());
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(compute_threshold(&[1.0, 2.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(compute_threshold(&[0.3; 5], &[0.3; 5]).unwrap(), 0.3);
        assert_eq!(compute_threshold(&[5.0], &[-5.0]).unwrap(), 0.0);
        assert!(compute_threshold(&[], &[1.0]).is_err());
        assert!(compute_threshold(&[1.0], &[]).is_err());
    }

    #[test]
    fn threshold_unequal_counts_is_mean_of_class_means() {
        // class means 2 and 0
        assert_eq!(compute_threshold(&[1.0, 2.0, 3.0], &[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn decide_boundary_blocks() {
        assert_eq!(decide(1.5, 1.5).unwrap().verdict, Verdict::Block);
        assert_eq!(decide(1.5 - 1e-9, 1.5).unwrap().verdict, Verdict::Keep);
        assert!(decide(f64::INFINITY, 0.0).is_err());
        assert!(decide(0.0, f64::NAN).is_err());
    }

    #[test]
    fn feedback_validation() {
        let a = (SampleId::from("a"), lv(&[1.0]));
        let b = (SampleId::from("b"), lv(&[2.0]));
        assert!(FeedbackSet::new(vec![a.clone()], vec![]).is_err());
        assert!(matches!(
            FeedbackSet::new(vec![a.clone()], vec![a.clone()]),
            Err(FastError::DuplicateSample(_))
        ));
        assert!(FeedbackSet::new(vec![(SampleId::from("c"), lv(&[1.0, 2.0]))], vec![b.clone()]).is_err());
        let only_neg = FeedbackSet::new(vec![], vec![b]).unwrap();
        assert!(only_neg.positives().is_empty());
    }

    #[test]
    fn model_rejects_infinite_threshold() {
        assert!(FilterModel::new(dir(&[1.0]), f64::INFINITY, "implicit").is_err());
    }
}
