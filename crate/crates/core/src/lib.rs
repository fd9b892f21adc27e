//! Masked sample covariance estimation with explicit-constant error bounds,
//! and Monte Carlo checks of the matrix inequalities behind them.
//!
//! The estimator is `M ⊙ Σ̂ₙ`: a fixed symmetric mask `M` applied entrywise
//! to the sample covariance `Σ̂ₙ = n⁻¹ Σ xᵢxᵢ*`.

// `!(x >= lo)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod config;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod io;
pub mod masks;
pub mod matrix;
pub mod models;

pub use error::{Error, Result};
pub use masks::{Mask, MaskComplexity, MaskKind};
pub use matrix::SymMatrix;
pub use models::{CovarianceSpec, DistributionSpec, Family, SampleSet};
