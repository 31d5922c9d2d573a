//! Latent projection functions.
//!
//! * implicit: the generator's own latent, known for every generated sample.
//! * inverted: a ridge-regularised linear map from data space back to a
//!   latent space, fitted on (latent, sample) pairs by reconstruction.

use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix};

use crate::error::{FastError, Result};
use crate::latent::{LatentProjection, LatentVector, SampleId};
use crate::numeric::{dot, kahan_sum, mean_rows};

pub const IMPLICIT_LPF_ID: &str = "implicit";
pub const INVERTED_LPF_ID: &str = "inverted";

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    pub latent: LatentVector,
    pub sample: Vec<f64>,
    pub sample_id: SampleId,
}

/// Generated samples indexed by id.
#[derive(Debug, Clone)]
pub struct SampleCorpus {
    pairs: Vec<SamplePair>,
    index: HashMap<SampleId, usize>,
}

impl SampleCorpus {
    pub fn new(pairs: Vec<SamplePair>) -> Result<Self> {
        let mut index = HashMap::with_capacity(pairs.len());
        if let Some(first) = pairs.first() {
            let (d, p) = (first.latent.dim(), first.sample.len());
            for (i, pair) in pairs.iter().enumerate() {
                pair.latent.check_dim(d)?;
                if pair.sample.len() != p {
                    return Err(FastError::DimensionMismatch {
                        expected: p,
                        found: pair.sample.len(),
                    });
                }
                if pair.sample.iter().any(|v| !v.is_finite()) {
                    return Err(FastError::NonFinite("sample"));
                }
                if index.insert(pair.sample_id.clone(), i).is_some() {
                    return Err(FastError::DuplicateSample(pair.sample_id.0.clone()));
                }
            }
        }
        Ok(Self { pairs, index })
    }

    pub fn pairs(&self) -> &[SamplePair] {
        &self.pairs
    }

    pub fn get(&self, id: &SampleId) -> Result<&SamplePair> {
        self.index
            .get(id)
            .map(|&i| &self.pairs[i])
            .ok_or_else(|| FastError::UnknownSample(id.0.clone()))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Imp-LS lookup: the stored generator latent of `sample_id`.
pub fn implicit_projection(corpus: &SampleCorpus, sample_id: &SampleId) -> Result<LatentVector> {
    Ok(corpus.get(sample_id)?.latent.clone())
}

/// Affine map `z = W x + b` from data space to latent space.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearInverter {
    /// Row-major `latent_dim x data_dim`.
    weights: Vec<f64>,
    latent_dim: usize,
    data_dim: usize,
    intercept: LatentVector,
    ridge: f64,
    fit_residual: f64,
}

impl LinearInverter {
    pub fn from_parts(
        weights: Vec<f64>,
        latent_dim: usize,
        data_dim: usize,
        intercept: LatentVector,
        ridge: f64,
        fit_residual: f64,
    ) -> Result<Self> {
        if weights.len() != latent_dim * data_dim {
            return Err(FastError::DimensionMismatch {
                expected: latent_dim * data_dim,
                found: weights.len(),
            });
        }
        intercept.check_dim(latent_dim)?;
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(FastError::NonFinite("inverter weights"));
        }
        if !(ridge >= 0.0 && fit_residual >= 0.0) {
            return Err(FastError::Invalid("ridge and fit_residual must be nonnegative".into()));
        }
        Ok(Self {
            weights,
            latent_dim,
            data_dim,
            intercept,
            ridge,
            fit_residual,
        })
    }

    pub fn identity(dim: usize) -> Self {
        let mut weights = vec![0.0; dim * dim];
        for i in 0..dim {
            weights[i * dim + i] = 1.0;
        }
        Self::from_parts(weights, dim, dim, LatentVector::zeros(dim), 0.0, 0.0).expect("identity inverter")
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_row(&self, latent_index: usize) -> &[f64] {
        &self.weights[latent_index * self.data_dim..(latent_index + 1) * self.data_dim]
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn data_dim(&self) -> usize {
        self.data_dim
    }

    pub fn intercept(&self) -> &LatentVector {
        &self.intercept
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Mean squared latent reconstruction error over the training pairs.
    pub fn fit_residual(&self) -> f64 {
        self.fit_residual
    }
}

/// Minimises `sum ||W x_i + b - z_i||^2 + ridge ||W||_F^2` (intercept unpenalised).
pub fn train_inverter(pairs: &[SamplePair], ridge: f64) -> Result<LinearInverter> {
    if pairs.is_empty() {
        return Err(FastError::Empty("inverter training pairs"));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(FastError::Invalid(format!("ridge must be >= 0, got {ridge}")));
    }
    let d = pairs[0].latent.dim();
    let p = pairs[0].sample.len();
    if p == 0 {
        return Err(FastError::Empty("data vector"));
    }
    for pair in pairs {
        pair.latent.check_dim(d)?;
        if pair.sample.len() != p {
            return Err(FastError::DimensionMismatch {
                expected: p,
                found: pair.sample.len(),
            });
        }
    }
    let n = pairs.len();
    let xs: Vec<&[f64]> = pairs.iter().map(|q| q.sample.as_slice()).collect();
    let zs: Vec<&[f64]> = pairs.iter().map(|q| q.latent.as_slice()).collect();
    let x_mean = mean_rows(&xs);
    let z_mean = mean_rows(&zs);
    let xc = DMatrix::from_fn(n, p, |i, j| xs[i][j] - x_mean[j]);
    let zc = DMatrix::from_fn(n, d, |i, j| zs[i][j] - z_mean[j]);

    let mut gram = xc.transpose() * &xc;
    let scale = gram.diagonal().iter().fold(0.0f64, |a, v| a.max(*v));
    for k in 0..p {
        gram[(k, k)] += ridge;
    }
    let rhs = xc.transpose() * &zc;
    // W^T = (Xc'Xc + ridge I)^-1 Xc'Zc
    let chol = Cholesky::new(gram).ok_or_else(|| {
        FastError::Singular("normal equations are not positive definite; increase the ridge".into())
    })?;
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |a, v| a.min(v * v));
    if min_pivot <= 1e-12 * scale.max(ridge) {
        return Err(FastError::Singular(
            "data are rank deficient; use a positive ridge".into(),
        ));
    }
    let wt = chol.solve(&rhs);
    let w = wt.transpose();

    let mut weights = Vec::with_capacity(d * p);
    for r in 0..d {
        for c in 0..p {
            weights.push(w[(r, c)]);
        }
    }
    let intercept: Vec<f64> = (0..d)
        .map(|r| z_mean[r] - dot(&weights[r * p..(r + 1) * p], &x_mean))
        .collect();
    let mut inv = LinearInverter::from_parts(weights, d, p, LatentVector::new(intercept)?, ridge, 0.0)?;
    let residual = kahan_sum(pairs.iter().map(|q| {
        let rec = apply(&inv, &q.sample);
        rec.iter().zip(q.latent.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    })) / n as f64;
    inv.fit_residual = residual;
    Ok(inv)
}

fn apply(inv: &LinearInverter, sample: &[f64]) -> Vec<f64> {
    (0..inv.latent_dim)
        .map(|r| dot(inv.weight_row(r), sample) + inv.intercept.as_slice()[r])
        .collect()
}

/// `W sample + b`.
pub fn invert(inverter: &LinearInverter, sample: &[f64]) -> Result<LatentVector> {
    if sample.len() != inverter.data_dim {
        return Err(FastError::DimensionMismatch {
            expected: inverter.data_dim,
            found: sample.len(),
        });
    }
    LatentVector::new(apply(inverter, sample))
}

/// Imp-LS as a projection handle: generator latents are used as they are.
#[derive(Debug, Clone, Copy)]
pub struct ImplicitProjection {
    dim: usize,
}

impl ImplicitProjection {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl LatentProjection for ImplicitProjection {
    fn id(&self) -> &str {
        IMPLICIT_LPF_ID
    }

    fn project(&self, z: &LatentVector) -> Result<LatentVector> {
        z.check_dim(self.dim)?;
        Ok(z.clone())
    }
}

type Render<'a> = Box<dyn Fn(&LatentVector) -> Result<Vec<f64>> + Send + Sync + 'a>;

/// Inv-LS as a projection handle: render the sample through the black-box
/// generator, then invert it.
pub struct InvertedProjection<'a> {
    inverter: LinearInverter,
    render: Render<'a>,
}

impl<'a> InvertedProjection<'a> {
    pub fn new<F>(inverter: LinearInverter, render: F) -> Self
    where
        F: Fn(&LatentVector) -> Result<Vec<f64>> + Send + Sync + 'a,
    {
        Self {
            inverter,
            render: Box::new(render),
        }
    }

    /// Uses recorded generator outputs instead of a live generator: each
    /// latent is looked up by its exact bit pattern.
    pub fn from_pairs(inverter: LinearInverter, pairs: &[SamplePair]) -> InvertedProjection<'static> {
        let table: HashMap<Vec<u64>, Vec<f64>> = pairs
            .iter()
            .map(|p| (bits(&p.latent), p.sample.clone()))
            .collect();
        InvertedProjection::new(inverter, move |z: &LatentVector| {
            table
                .get(&bits(z))
                .cloned()
                .ok_or_else(|| FastError::UnknownSample("latent not present in recorded corpus".into()))
        })
    }

    pub fn inverter(&self) -> &LinearInverter {
        &self.inverter
    }
}

fn bits(z: &LatentVector) -> Vec<u64> {
    z.as_slice().iter().map(|v| v.to_bits()).collect()
}

impl LatentProjection for InvertedProjection<'_> {
    fn id(&self) -> &str {
        INVERTED_LPF_ID
    }

    fn project(&self, z: &LatentVector) -> Result<LatentVector> {
        let sample = (self.render)(z)?;
        invert(&self.inverter, &sample)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(id: &str, z: &[f64], x: &[f64]) -> SamplePair {
        SamplePair {
            latent: LatentVector::new(z.to_vec()).unwrap(),
            sample: x.to_vec(),
            sample_id: SampleId::from(id),
        }
    }

    #[test]
    fn implicit_lookup() {
        let corpus = SampleCorpus::new(vec![pair("a", &[1.0, 2.0], &[0.0]), pair("b", &[3.0, 4.0], &[1.0])]).unwrap();
        assert_eq!(
            implicit_projection(&corpus, &"a".into()).unwrap().as_slice(),
            &[1.0, 2.0]
        );
        assert!(matches!(
            implicit_projection(&corpus, &"missing".into()),
            Err(FastError::UnknownSample(_))
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let r = SampleCorpus::new(vec![pair("a", &[1.0], &[0.0]), pair("a", &[2.0], &[1.0])]);
        assert!(matches!(r, Err(FastError::DuplicateSample(_))));
    }

    #[test]
    fn constant_target_gives_zero_weights() {
        let pairs: Vec<_> = (0..6)
            .map(|i| pair(&i.to_string(), &[0.5, -1.0], &[i as f64, (i * i) as f64]))
            .collect();
        let inv = train_inverter(&pairs, 0.1).unwrap();
        assert!(inv.weights().iter().all(|w| w.abs() < 1e-14));
        assert!((inv.intercept().as_slice()[0] - 0.5).abs() < 1e-14);
        assert!((inv.intercept().as_slice()[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn huge_ridge_shrinks_weights() {
        let pairs: Vec<_> = (0..10)
            .map(|i| {
                let t = i as f64;
                pair(&i.to_string(), &[t], &[2.0 * t + 1.0])
            })
            .collect();
        let small = train_inverter(&pairs, 1e-6).unwrap();
        let big = train_inverter(&pairs, 1e12).unwrap();
        assert!((small.weights()[0] - 0.5).abs() < 1e-6);
        assert!(big.weights()[0].abs() < 1e-8);
        assert!(big.fit_residual() >= small.fit_residual());
    }

    #[test]
    fn rank_deficient_without_ridge_is_singular() {
        let pairs: Vec<_> = (0..5)
            .map(|i| {
                let t = i as f64;
                pair(&i.to_string(), &[t], &[t, 2.0 * t])
            })
            .collect();
        assert!(matches!(train_inverter(&pairs, 0.0), Err(FastError::Singular(_))));
        assert!(train_inverter(&pairs, 1e-3).is_ok());
    }

    #[test]
    fn identity_and_zero_inverters() {
        let id = LinearInverter::identity(3);
        assert_eq!(invert(&id, &[1.0, -2.0, 3.5]).unwrap().as_slice(), &[1.0, -2.0, 3.5]);
        let b = LatentVector::new(vec![4.0, 5.0]).unwrap();
        let zero = LinearInverter::from_parts(vec![0.0; 6], 2, 3, b.clone(), 0.0, 0.0).unwrap();
        assert_eq!(invert(&zero, &[9.0, 8.0, 7.0]).unwrap(), b);
        assert!(invert(&zero, &[1.0]).is_err());
    }

    #[test]
    fn inverted_projection_from_recorded_pairs() {
        let pairs = vec![pair("a", &[1.0], &[2.0]), pair("b", &[2.0], &[4.0])];
        let inv = train_inverter(&pairs, 0.0).unwrap();
        let lpf = InvertedProjection::from_pairs(inv, &pairs);
        let z = lpf.project(&LatentVector::new(vec![2.0]).unwrap()).unwrap();
        assert!((z.as_slice()[0] - 2.0).abs() < 1e-12);
        assert!(lpf.project(&LatentVector::new(vec![7.0]).unwrap()).is_err());
        assert_eq!(lpf.id(), INVERTED_LPF_ID);
    }
}
