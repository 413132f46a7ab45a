//! Spectral inference for high-dimensional canonical correlation analysis
//! with finite-rank signals.
//!
//! Data follow `𝒳 = X + AZ`, `𝒴 = Y + BZ` with i.i.d. noise of variance `1/n`.
//! The crate computes the squared sample canonical correlations, their
//! deterministic limits and outlier fluctuations, tests for independence,
//! rank and correlation estimators, and a Monte-Carlo harness that replays
//! the reference simulation study.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod inference;
pub mod io;
pub mod limits;
pub mod linalg;
pub mod model;
pub mod quad;
pub mod rng;
pub mod spectrum;
pub mod theory;

pub use error::{Error, Result};
pub use model::{DataSet, EntryKind, EntryLaw, FactorLoadings, ModelSpec};
pub use spectrum::{SccSpectrum, SpectrumOptions};
pub use theory::{EdgeData, TheoryContext};
