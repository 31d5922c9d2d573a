//! Fitting and applying filters on corpora. Shared by the command-line tool
//! and the session service so that both produce identical models.

use fast_core::lpf::{invert, train_inverter, ImplicitProjection, InvertedProjection, LinearInverter, IMPLICIT_LPF_ID, INVERTED_LPF_ID};
use fast_core::metrics::{evaluate, EvalReport};
use fast_core::mining::{mine_from_prior, negative_similarity_scores, MiningOutcome, DEFAULT_ALPHA, DEFAULT_CAP_FACTOR, DEFAULT_POOL_FACTOR};
use fast_core::synthgen::{generate, prior_sampler, GeneratorSpec, Nonlinearity};
use fast_core::urf::{
    AugmentConfig, Augmented, CovarianceMode, MeanDifference, SvmConfig, SvmNormal, DEFAULT_AUGMENT_COUNT,
    DEFAULT_LAMBDA_REL,
};
use fast_core::{fit_filter, FilterModel, LatentProjection, LatentVector, UndesiredRepresentation};

use crate::corpus::Corpus;
use crate::error::{AppError, AppResult};
use crate::marks::Marks;

/// Seed stream for mining candidates, kept apart from augmentation draws.
const MINING_STREAM: u64 = 0x6d69_6e65;
/// Seed stream for corpus draws, kept apart from the generator parameters.
const CORPUS_STREAM: u64 = 0x6461_7461;

/// Random generator and an `n`-row labeled corpus drawn from it.
pub fn simulate(
    latent_dim: usize,
    data_dim: usize,
    n: usize,
    prevalence: f64,
    nonlinearity: Nonlinearity,
    seed: u64,
) -> AppResult<(GeneratorSpec, Corpus)> {
    if n == 0 {
        return Err(AppError::Usage("n must be at least 1".into()));
    }
    let spec = GeneratorSpec::random(latent_dim, data_dim, nonlinearity, prevalence, seed)?;
    let corpus = Corpus::from_batch(&generate(&spec, n, seed ^ CORPUS_STREAM)?)?;
    Ok((spec, corpus))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UrfChoice {
    MeanDifference,
    Svm,
}

impl UrfChoice {
    pub fn parse(s: &str) -> AppResult<Self> {
        match s {
            "md" => Ok(UrfChoice::MeanDifference),
            "svm" => Ok(UrfChoice::Svm),
            other => Err(AppError::Usage(format!("unknown urf `{other}` (expected md or svm)"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            UrfChoice::MeanDifference => "md",
            UrfChoice::Svm => "svm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpfChoice {
    Implicit,
    Inverted,
}

impl LpfChoice {
    pub fn parse(s: &str) -> AppResult<Self> {
        match s {
            IMPLICIT_LPF_ID => Ok(LpfChoice::Implicit),
            INVERTED_LPF_ID => Ok(LpfChoice::Inverted),
            other => Err(AppError::Usage(format!("unknown lpf `{other}` (expected implicit or inverted)"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LpfChoice::Implicit => IMPLICIT_LPF_ID,
            LpfChoice::Inverted => INVERTED_LPF_ID,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub urf: UrfChoice,
    pub lpf: LpfChoice,
    pub augment: bool,
    pub augment_count: usize,
    pub lambda_rel: f64,
    pub covariance: CovarianceMode,
    pub alpha: f64,
    pub seed: u64,
    pub svm_penalty: f64,
    pub svm_max_iterations: usize,
    pub svm_tolerance: f64,
    pub ridge: f64,
    /// Positives to mine when none are marked; defaults to the negative count.
    pub mine_count: Option<usize>,
}

impl Default for FitOptions {
    fn default() -> Self {
        let svm = SvmConfig::default();
        Self {
            urf: UrfChoice::MeanDifference,
            lpf: LpfChoice::Implicit,
            augment: false,
            augment_count: DEFAULT_AUGMENT_COUNT,
            lambda_rel: DEFAULT_LAMBDA_REL,
            covariance: CovarianceMode::Full,
            alpha: DEFAULT_ALPHA,
            seed: 0,
            svm_penalty: svm.penalty,
            svm_max_iterations: svm.max_iterations,
            svm_tolerance: svm.tolerance,
            ridge: 0.0,
            mine_count: None,
        }
    }
}

impl FitOptions {
    fn svm_config(&self) -> SvmConfig {
        SvmConfig {
            penalty: self.svm_penalty,
            max_iterations: self.svm_max_iterations,
            tolerance: self.svm_tolerance,
            seed: self.seed,
        }
    }

    fn representation(&self) -> Box<dyn UndesiredRepresentation> {
        let base: Box<dyn UndesiredRepresentation> = match self.urf {
            UrfChoice::MeanDifference => Box::new(MeanDifference),
            UrfChoice::Svm => Box::new(SvmNormal::new(self.svm_config())),
        };
        if !self.augment {
            return base;
        }
        let config = AugmentConfig {
            count: self.augment_count,
            lambda_rel: self.lambda_rel,
            mode: self.covariance,
            seed: self.seed,
        };
        Box::new(Augmented::new(base, config))
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: FilterModel,
    pub inverter: Option<LinearInverter>,
    pub mining: Option<MiningOutcome>,
    pub n_negative: usize,
    pub n_positive: usize,
}

/// Fits a filter from the marked rows of `corpus`. Without positive marks
/// the positives are mined from fresh prior draws.
pub fn fit_model(corpus: &Corpus, marks: &Marks, opts: &FitOptions) -> AppResult<FitOutcome> {
    let mut feedback = marks.feedback(corpus)?;
    let (projection, inverter): (Box<dyn LatentProjection>, Option<LinearInverter>) = match opts.lpf {
        LpfChoice::Implicit => (Box::new(ImplicitProjection::new(corpus.dim())), None),
        LpfChoice::Inverted => {
            let pairs = corpus.pairs();
            let inv = train_inverter(&pairs, opts.ridge)?;
            (Box::new(InvertedProjection::from_pairs(inv.clone(), &pairs)), Some(inv))
        }
    };
    let mut mining = None;
    if feedback.positives().is_empty() {
        if opts.lpf == LpfChoice::Inverted {
            return Err(AppError::Usage(
                "positive mining draws new generator latents and needs the implicit lpf".into(),
            ));
        }
        let scores = negative_similarity_scores(&feedback.negative_latents())?;
        let want = opts.mine_count.unwrap_or(feedback.negatives().len());
        let outcome = mine_from_prior(
            &scores,
            opts.alpha,
            want,
            DEFAULT_POOL_FACTOR,
            DEFAULT_CAP_FACTOR,
            prior_sampler(corpus.dim(), opts.seed ^ MINING_STREAM),
        )?;
        if outcome.mined.is_empty() {
            return Err(AppError::Data(format!(
                "no positives mined from {} prior draws at alpha {}",
                outcome.examined, opts.alpha
            )));
        }
        feedback = feedback.with_mined_positives(&outcome.mined)?;
        mining = Some(outcome);
    }
    let urf = opts.representation();
    let model = fit_filter(&feedback, projection.as_ref(), urf.as_ref())?;
    Ok(FitOutcome {
        model,
        inverter,
        mining,
        n_negative: feedback.negatives().len(),
        n_positive: feedback.positives().len(),
    })
}

/// Latents of every corpus row in the space the model was fitted in.
pub fn project_corpus(corpus: &Corpus, model: &FilterModel, inverter: Option<&LinearInverter>) -> AppResult<Vec<LatentVector>> {
    match model.lpf_id() {
        IMPLICIT_LPF_ID => Ok(corpus.latents()),
        INVERTED_LPF_ID => {
            let inv = inverter.ok_or_else(|| AppError::Usage("model uses the inverted lpf; supply its inverter".into()))?;
            (0..corpus.len())
                .map(|i| invert(inv, corpus.sample_row(i)).map_err(AppError::from))
                .collect()
        }
        other => Err(AppError::Data(format!("unknown lpf id `{other}` in model"))),
    }
}

/// Similarities of every row, in row order.
pub fn similarities(corpus: &Corpus, model: &FilterModel, inverter: Option<&LinearInverter>) -> AppResult<Vec<f64>> {
    project_corpus(corpus, model, inverter)?
        .iter()
        .map(|z| model.similarity(z).map_err(AppError::from))
        .collect()
}

/// Row indices split into (kept, blocked).
pub fn partition(corpus: &Corpus, model: &FilterModel, inverter: Option<&LinearInverter>) -> AppResult<(Vec<usize>, Vec<usize>)> {
    let mut kept = Vec::new();
    let mut blocked = Vec::new();
    for (i, z) in project_corpus(corpus, model, inverter)?.iter().enumerate() {
        if model.decide(z)?.is_blocked() {
            blocked.push(i);
        } else {
            kept.push(i);
        }
    }
    Ok((kept, blocked))
}

/// Evaluates `model` on the labeled `corpus`. The reference set defaults to
/// the corpus rows labeled clean.
pub fn evaluate_corpus(
    corpus: &Corpus,
    model: &FilterModel,
    inverter: Option<&LinearInverter>,
    reference: Option<&Corpus>,
    k: usize,
) -> AppResult<EvalReport> {
    let projected = project_corpus(corpus, model, inverter)?;
    let test = corpus.labeled_set(projected)?;
    let reference = match reference {
        Some(r) => {
            if r.data_dim() != corpus.data_dim() {
                return Err(AppError::Data("reference and evaluation corpora differ in data_dim".into()));
            }
            r.samples()
        }
        None => corpus.clean_samples()?,
    };
    Ok(evaluate(model, &test, &reference, k)?)
}
