//! The sample covariance, the masked estimator and its error functionals.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::masks::Mask;
use crate::matrix::{schur_product, spectral_norm, SymMatrix};
use crate::models::{center_samples, SampleSet};

/// `n⁻¹ Σᵢ xᵢxᵢ*` (1/n normalization, no centering).
pub fn sample_covariance(s: &SampleSet) -> SymMatrix {
    let x = s.columns();
    let gram = x * x.transpose() / s.n() as f64;
    SymMatrix::new(gram).expect("a Gram matrix of finite samples is symmetric and finite")
}

/// `M ⊙ Σ̂ₙ`, optionally from mean-centered samples (still 1/n).
pub fn masked_estimator(mask: &Mask, s: &SampleSet, centered: bool) -> Result<SymMatrix> {
    let cov = if centered {
        sample_covariance(&center_samples(s))
    } else {
        sample_covariance(s)
    };
    schur_product(mask.matrix(), &cov)
}

/// Spectral-norm error split for one sample set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorDecomposition {
    /// `‖M⊙Σ̂ₙ − M⊙Σ‖`
    pub variance_term: f64,
    /// `‖M⊙Σ − Σ‖`
    pub bias_term: f64,
    pub total_bound: f64,
    /// `‖M⊙Σ̂ₙ − Σ‖`
    pub total_actual: f64,
}

pub fn decompose_error(
    mask: &Mask,
    sigma: &SymMatrix,
    s: &SampleSet,
) -> Result<ErrorDecomposition> {
    decompose_estimate(mask, sigma, &sample_covariance(s))
}

/// Same as [`decompose_error`] for an already-formed `Σ̂ₙ`.
pub fn decompose_estimate(
    mask: &Mask,
    sigma: &SymMatrix,
    sample_cov: &SymMatrix,
) -> Result<ErrorDecomposition> {
    let masked_hat = schur_product(mask.matrix(), sample_cov)?;
    let masked_sigma = schur_product(mask.matrix(), sigma)?;
    let variance_term = spectral_norm(&masked_hat.sub(&masked_sigma)?)?;
    let bias_term = spectral_norm(&masked_sigma.sub(sigma)?)?;
    let total_actual = spectral_norm(&masked_hat.sub(sigma)?)?;
    Ok(ErrorDecomposition {
        variance_term,
        bias_term,
        total_bound: variance_term + bias_term,
        total_actual,
    })
}

/// `‖estimate − target‖ / ‖target‖`.
pub fn relative_spectral_error(estimate: &SymMatrix, target: &SymMatrix) -> Result<f64> {
    let denom = spectral_norm(target)?;
    if denom == 0.0 {
        return Err(Error::invalid("relative error undefined for a zero target"));
    }
    Ok(spectral_norm(&estimate.sub(target)?)? / denom)
}
