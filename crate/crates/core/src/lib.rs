//! Few-shot filtering of black-box generator outputs in latent space.
//!
//! A filter is fitted from a handful of user-marked samples: each sample is
//! projected to a latent space, the undesired feature is reduced to a single
//! direction, and new samples are blocked when their scalar projection onto
//! that direction reaches a threshold.

pub mod error;
pub mod latent;
pub mod lpf;
pub mod manifest;
pub mod metrics;
pub mod mining;
pub mod numeric;
pub mod synthgen;
pub mod theory;
pub mod urf;

pub use error::{FastError, Result};
pub use latent::{
    compute_threshold, decide, fit_filter, run_fast, similarity, Decision, FastOutcome, FeedbackSet, FilterModel,
    LatentProjection, LatentVector, SampleId, UndesiredDirection, UndesiredRepresentation, UrfMethod, Verdict,
};
