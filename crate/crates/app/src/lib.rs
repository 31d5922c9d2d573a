//! Command-line tool, corpus files and session service for filtering
//! generated samples by user feedback.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod gallery;
pub mod marks;
pub mod repro;
pub mod service;
pub mod session;
pub mod workflow;

pub use error::{AppError, AppResult};
