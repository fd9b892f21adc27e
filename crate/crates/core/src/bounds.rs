//! Closed-form error bounds and sample-complexity formulas.
//!
//! All logarithms are natural. Absolute constants that are not pinned down
//! (the `C` of the Gaussian shape bound and of the sample-complexity
//! formulas) are caller parameters; the explicit-constant Gaussian chain in
//! [`gaussian_bound`] with [`GaussianMode::Explicit`] is the certified path.

use std::f64::consts::E;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::masks::{mask_complexity, Mask, MaskComplexity};
use crate::matrix::{max_norm, psd_sqrt, schatten_norm, spectral_norm, SymMatrix};
use crate::models::{gaussian_mu_at_order, ConcentrationParams};

/// Orders searched by [`expected_max_bound`] in addition to `log(np)/2`.
pub const DEFAULT_R_GRID: [f64; 8] = [1.0, 1.25, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formula {
    Main,
    GaussianExplicit,
    GaussianShape,
    ComplexityMasked,
    ComplexityBanded,
    ComplexityLv,
    Classical,
    BiasBanded,
}

/// Inputs echoed into a report; absent fields are omitted from JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BoundInputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub col_norm_sq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu4: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emax_sq_root: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<usize>,
}

/// A bound split into its moderate-deviation and large-deviation terms.
/// Sample-complexity reports also carry the ceilinged sample count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub formula: Formula,
    pub moderate_term: f64,
    pub large_dev_term: f64,
    pub total: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_count: Option<u64>,
    pub inputs: BoundInputs,
}

impl BoundReport {
    fn new(
        formula: Formula,
        moderate_term: f64,
        large_dev_term: f64,
        inputs: BoundInputs,
    ) -> Result<Self> {
        for (name, v) in [
            ("moderate", moderate_term),
            ("large-deviation", large_dev_term),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!(
                    "{name} term is not a finite nonnegative number: {v}"
                )));
            }
        }
        Ok(Self {
            formula,
            moderate_term,
            large_dev_term,
            total: moderate_term + large_dev_term,
            sample_count: None,
            inputs,
        })
    }

    fn complexity(formula: Formula, first: f64, second: f64, inputs: BoundInputs) -> Result<Self> {
        let mut report = Self::new(formula, first, second, inputs)?;
        report.sample_count = Some(ceil_count(report.total));
        Ok(report)
    }

    /// The ceilinged sample count of a sample-complexity report.
    pub fn samples(&self) -> Option<u64> {
        self.sample_count
    }
}

/// Ceiling that ignores round-off: a value within `1e-9` (relative) of an
/// integer maps to that integer.
fn ceil_count(x: f64) -> u64 {
    if x <= 0.0 {
        return 0;
    }
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * x.max(1.0) {
        nearest as u64
    } else {
        x.ceil() as u64
    }
}

fn require_p(p: usize) -> Result<()> {
    if p < 3 {
        return Err(Error::invalid(format!(
            "the bound requires p >= 3, got p = {p}"
        )));
    }
    Ok(())
}

fn require_n(n: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::invalid("n must be at least 1"));
    }
    Ok(())
}

fn require_nonneg(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::invalid(format!(
            "{name} must be finite and >= 0, got {v}"
        )));
    }
    Ok(())
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::invalid(format!(
            "{name} must be finite and > 0, got {v}"
        )));
    }
    Ok(())
}

/// Variance bound for a general distribution with four moments:
/// `√(8e log p / n)·‖M‖₁→₂·μ₄·ν + (8e log p / n)·‖M‖·[E maxᵢ‖xᵢ‖∞⁴]^{1/2}`.
pub fn main_bound(
    mc: &MaskComplexity,
    cp: &ConcentrationParams,
    emax_sq_root: f64,
    n: usize,
    p: usize,
) -> Result<BoundReport> {
    require_p(p)?;
    require_n(n)?;
    require_nonneg("emax_sq_root", emax_sq_root)?;
    let mu4 = cp
        .mu(4.0)
        .ok_or_else(|| Error::invalid("concentration parameters lack mu_4"))?;
    let scale = 8.0 * E * (p as f64).ln() / n as f64;
    let moderate = scale.sqrt() * mc.col_norm_sq.sqrt() * mu4 * cp.nu;
    let large = scale * mc.spec_norm * emax_sq_root;
    BoundReport::new(
        Formula::Main,
        moderate,
        large,
        BoundInputs {
            n: Some(n),
            p: Some(p as f64),
            col_norm_sq: Some(mc.col_norm_sq),
            spec_norm: Some(mc.spec_norm),
            mu4: Some(mu4),
            nu: Some(cp.nu),
            emax_sq_root: Some(emax_sq_root),
            ..Default::default()
        },
    )
}

/// The grid actually searched: `r_grid ∪ {1} ∪ {log(np)/2 if ≥ 1}`, sorted.
pub fn effective_r_grid(n: usize, p: usize, r_grid: &[f64]) -> Vec<f64> {
    let mut grid: Vec<f64> = r_grid.iter().copied().filter(|&r| r >= 1.0).collect();
    grid.push(1.0);
    let opt = ((n * p) as f64).ln() / 2.0;
    if opt >= 1.0 {
        grid.push(opt);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Minimizer and value of `(np)^{1/(2r)}·μ_{4r}²` over the effective grid.
pub fn expected_max_search(
    n: usize,
    p: usize,
    mu_fn: impl Fn(f64) -> Result<f64>,
    r_grid: &[f64],
) -> Result<(f64, f64)> {
    require_n(n)?;
    if p < 1 {
        return Err(Error::invalid("p must be at least 1"));
    }
    let np = (n * p) as f64;
    let mut best: Option<(f64, f64)> = None;
    for r in effective_r_grid(n, p, r_grid) {
        let mu = mu_fn(4.0 * r)?;
        require_nonneg("mu", mu)?;
        let value = np.powf(1.0 / (2.0 * r)) * mu * mu;
        if best.is_none_or(|(v, _)| value < v) {
            best = Some((value, r));
        }
    }
    Ok(best.expect("effective grid always contains r = 1"))
}

/// Upper bound on `[E maxᵢ ‖xᵢ‖∞⁴]^{1/2}`. `mu_fn` maps a moment order `k`
/// to `μ_k`.
pub fn expected_max_bound(
    n: usize,
    p: usize,
    mu_fn: impl Fn(f64) -> Result<f64>,
    r_grid: &[f64],
) -> Result<f64> {
    Ok(expected_max_search(n, p, mu_fn, r_grid)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GaussianMode {
    /// Explicit constants: closed-form Gaussian `μ₄`, `ν` and expected
    /// maximum substituted into [`main_bound`].
    Explicit,
    /// `C·[(ρ ‖M‖₁→₂² log p / n)^{1/2} + ρ ‖M‖ log p log(np) / n]·‖Σ‖` with
    /// `ρ = ‖Σ‖_max / ‖Σ‖` and a caller-chosen `C`.
    Shape { c: f64 },
}

pub fn gaussian_bound(
    mask: &Mask,
    sigma: &SymMatrix,
    n: usize,
    mode: GaussianMode,
) -> Result<BoundReport> {
    let p = mask.dim();
    if sigma.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: sigma.dim(),
        });
    }
    require_p(p)?;
    require_n(n)?;
    let mc = mask_complexity(mask)?;
    let sigma_max = max_norm(sigma);
    let sigma_norm = spectral_norm(sigma)?;
    match mode {
        GaussianMode::Explicit => {
            let cp = ConcentrationParams::gaussian(sigma, &[4.0])?;
            let emax =
                expected_max_bound(n, p, |k| gaussian_mu_at_order(sigma, k), &DEFAULT_R_GRID)?;
            let mut report = main_bound(&mc, &cp, emax, n, p)?;
            report.formula = Formula::GaussianExplicit;
            report.inputs.sigma_max = Some(sigma_max);
            report.inputs.sigma_norm = Some(sigma_norm);
            Ok(report)
        }
        GaussianMode::Shape { c } => {
            require_nonneg("c", c)?;
            let (ratio, moderate, large) = if sigma_norm == 0.0 {
                (0.0, 0.0, 0.0)
            } else {
                let ratio = sigma_max / sigma_norm;
                let log_p = (p as f64).ln();
                let nf = n as f64;
                let moderate = c * (ratio * mc.col_norm_sq * log_p / nf).sqrt() * sigma_norm;
                let large =
                    c * ratio * mc.spec_norm * log_p * (nf * p as f64).ln() / nf * sigma_norm;
                (ratio, moderate, large)
            };
            BoundReport::new(
                Formula::GaussianShape,
                moderate,
                large,
                BoundInputs {
                    n: Some(n),
                    p: Some(p as f64),
                    col_norm_sq: Some(mc.col_norm_sq),
                    spec_norm: Some(mc.spec_norm),
                    sigma_max: Some(sigma_max),
                    sigma_norm: Some(sigma_norm),
                    ratio: Some(ratio),
                    c: Some(c),
                    ..Default::default()
                },
            )
        }
    }
}

/// `⌈c·(‖M‖₁→₂² log p/ε² + ‖M‖ log²p/ε)·ratio⌉` from mask metrics.
pub fn sample_complexity_from_metrics(
    mc: &MaskComplexity,
    p: f64,
    ratio: f64,
    epsilon: f64,
    c: f64,
) -> Result<BoundReport> {
    require_positive("epsilon", epsilon)?;
    require_nonneg("c", c)?;
    require_nonneg("ratio", ratio)?;
    require_positive("p", p)?;
    let log_p = p.ln();
    let first = c * mc.col_norm_sq * log_p / (epsilon * epsilon) * ratio;
    let second = c * mc.spec_norm * log_p * log_p / epsilon * ratio;
    BoundReport::complexity(
        Formula::ComplexityMasked,
        first,
        second,
        BoundInputs {
            p: Some(p),
            col_norm_sq: Some(mc.col_norm_sq),
            spec_norm: Some(mc.spec_norm),
            ratio: Some(ratio),
            epsilon: Some(epsilon),
            c: Some(c),
            ..Default::default()
        },
    )
}

/// Sample count for relative error `ε` with the norm ratio `‖Σ‖_max/‖Σ‖`.
pub fn sample_complexity_masked(
    mask: &Mask,
    sigma: &SymMatrix,
    epsilon: f64,
    c: f64,
) -> Result<BoundReport> {
    if sigma.dim() != mask.dim() {
        return Err(Error::DimensionMismatch {
            expected: mask.dim(),
            actual: sigma.dim(),
        });
    }
    let norm = spectral_norm(sigma)?;
    if norm == 0.0 {
        return Err(Error::invalid("covariance has zero spectral norm"));
    }
    let mut report = sample_complexity_from_metrics(
        &mask_complexity(mask)?,
        mask.dim() as f64,
        max_norm(sigma) / norm,
        epsilon,
        c,
    )?;
    report.inputs.sigma_max = Some(max_norm(sigma));
    report.inputs.sigma_norm = Some(norm);
    Ok(report)
}

/// `⌈c·(B log p/ε² + B log²p/ε)·ratio⌉`; `p` may be any real > 0.
pub fn sample_complexity_banded(
    bandwidth: f64,
    p: f64,
    ratio: f64,
    epsilon: f64,
    c: f64,
) -> Result<BoundReport> {
    require_nonneg("bandwidth", bandwidth)?;
    let mut report = sample_complexity_from_metrics(
        &MaskComplexity {
            col_norm_sq: bandwidth,
            spec_norm: bandwidth,
        },
        p,
        ratio,
        epsilon,
        c,
    )?;
    report.formula = Formula::ComplexityBanded;
    report.inputs.col_norm_sq = None;
    report.inputs.spec_norm = None;
    report.inputs.bandwidth = Some(bandwidth);
    Ok(report)
}

/// The earlier comparison bound `⌈c·(‖M‖₁→₂² log⁵p/ε² + ‖M‖ log³p/ε)⌉`.
pub fn sample_complexity_lv_from_metrics(
    mc: &MaskComplexity,
    p: f64,
    epsilon: f64,
    c: f64,
) -> Result<BoundReport> {
    require_positive("epsilon", epsilon)?;
    require_nonneg("c", c)?;
    require_positive("p", p)?;
    let log_p = p.ln();
    let first = c * mc.col_norm_sq * log_p.powi(5) / (epsilon * epsilon);
    let second = c * mc.spec_norm * log_p.powi(3) / epsilon;
    BoundReport::complexity(
        Formula::ComplexityLv,
        first,
        second,
        BoundInputs {
            p: Some(p),
            col_norm_sq: Some(mc.col_norm_sq),
            spec_norm: Some(mc.spec_norm),
            epsilon: Some(epsilon),
            c: Some(c),
            ..Default::default()
        },
    )
}

pub fn sample_complexity_lv(mask: &Mask, epsilon: f64, c: f64) -> Result<BoundReport> {
    sample_complexity_lv_from_metrics(&mask_complexity(mask)?, mask.dim() as f64, epsilon, c)
}

/// `⌈c·p/ε²⌉`.
pub fn sample_complexity_classical(p: usize, epsilon: f64, c: f64) -> Result<BoundReport> {
    require_positive("epsilon", epsilon)?;
    require_nonneg("c", c)?;
    BoundReport::complexity(
        Formula::Classical,
        c * p as f64 / (epsilon * epsilon),
        0.0,
        BoundInputs {
            p: Some(p as f64),
            epsilon: Some(epsilon),
            c: Some(c),
            ..Default::default()
        },
    )
}

/// Gershgorin bias bound for a banded mask on a decaying covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasBound {
    /// `2/(α−1)·(b+1)^{1−α}`
    pub bias: f64,
    /// `1 + 2/(α−1)`, an upper estimate of `‖Σ‖`.
    pub sigma_norm_upper: f64,
}

pub fn banded_bias_bound(alpha: f64, b: usize) -> Result<BiasBound> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha must exceed 1, got {alpha}")));
    }
    Ok(BiasBound {
        bias: 2.0 / (alpha - 1.0) * ((b + 1) as f64).powf(1.0 - alpha),
        sigma_norm_upper: 1.0 + 2.0 / (alpha - 1.0),
    })
}

pub fn banded_bias_report(alpha: f64, b: usize) -> Result<BoundReport> {
    let bb = banded_bias_bound(alpha, b)?;
    let mut report = BoundReport::new(
        Formula::BiasBanded,
        bb.bias,
        0.0,
        BoundInputs {
            alpha: Some(alpha),
            b: Some(b),
            bandwidth: Some((2 * b + 1) as f64),
            ..Default::default()
        },
    )?;
    report.inputs.sigma_norm = Some(bb.sigma_norm_upper);
    Ok(report)
}

/// `max(q, 2 log p)`, the smallest admissible order for the moment bounds.
pub fn moment_order(q: f64, p: usize) -> f64 {
    q.max(2.0 * (p as f64).ln())
}

fn check_orders(q: f64, r: f64, q_min: f64) -> Result<()> {
    if !(q >= q_min) || !q.is_finite() {
        return Err(Error::invalid(format!("q must be >= {q_min}, got {q}")));
    }
    if !(r >= q) || !r.is_finite() {
        return Err(Error::invalid(format!("r must be >= q = {q}, got {r}")));
    }
    Ok(())
}

/// Moment bound for independent PSD summands:
/// `[‖Σ E Wᵢ‖^{1/2} + 2√(e r)·(E maxᵢ‖Wᵢ‖^q)^{1/(2q)}]²`.
///
/// `mean_norm = ‖Σ E Wᵢ‖`, `max_term = E maxᵢ ‖Wᵢ‖^q`. The caller is
/// responsible for `r ≥ max(q, 2 log p)` (see [`moment_order`]).
pub fn moment_bound_psd(mean_norm: f64, max_term: f64, q: f64, r: f64) -> Result<f64> {
    check_orders(q, r, 1.0)?;
    require_nonneg("mean_norm", mean_norm)?;
    require_nonneg("max_term", max_term)?;
    let root = mean_norm.sqrt() + 2.0 * (E * r).sqrt() * max_term.powf(1.0 / (2.0 * q));
    Ok(root * root)
}

/// Moment bound for independent symmetric self-adjoint summands:
/// `√(e r)·‖(Σ E Yᵢ²)^{1/2}‖ + 2e r·(E maxᵢ‖Yᵢ‖^q)^{1/q}`.
pub fn moment_bound_selfadj(variance_norm: f64, max_term: f64, q: f64, r: f64) -> Result<f64> {
    check_orders(q, r, 2.0)?;
    require_nonneg("variance_norm", variance_norm)?;
    require_nonneg("max_term", max_term)?;
    Ok((E * r).sqrt() * variance_norm + 2.0 * E * r * max_term.powf(1.0 / q))
}

/// `√r · ‖(Σ Aᵢ²)^{1/2}‖_r`.
pub fn khintchine_rhs(matrices: &[SymMatrix], r: f64) -> Result<f64> {
    if !(r >= 2.0) || !r.is_finite() {
        return Err(Error::invalid(format!(
            "Khintchine order must be >= 2, got {r}"
        )));
    }
    let squares: Vec<SymMatrix> = matrices.iter().map(SymMatrix::square).collect();
    let sum = SymMatrix::sum(&squares)?;
    Ok(r.sqrt() * schatten_norm(&psd_sqrt(&sum)?, r)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masks::{all_ones_mask, banded_mask};
    use crate::models::{materialize, CovarianceSpec, Provenance};
    use approx::assert_relative_eq;

    fn gaussian_cp(sigma: &SymMatrix) -> ConcentrationParams {
        ConcentrationParams::gaussian(sigma, &[4.0]).unwrap()
    }

    #[test]
    fn main_bound_zero_mask() {
        let mc = MaskComplexity {
            col_norm_sq: 0.0,
            spec_norm: 0.0,
        };
        let r = main_bound(&mc, &gaussian_cp(&SymMatrix::identity(5)), 3.0, 10, 5).unwrap();
        assert_eq!(r.total, 0.0);
    }

    #[test]
    fn main_bound_doubling_n() {
        let mc = MaskComplexity {
            col_norm_sq: 3.0,
            spec_norm: 2.9,
        };
        let cp = gaussian_cp(&SymMatrix::identity(16));
        let a = main_bound(&mc, &cp, 7.0, 100, 16).unwrap();
        let b = main_bound(&mc, &cp, 7.0, 200, 16).unwrap();
        assert_relative_eq!(
            a.moderate_term / b.moderate_term,
            2f64.sqrt(),
            epsilon = 1e-12
        );
        assert_relative_eq!(a.large_dev_term / b.large_dev_term, 2.0, epsilon = 1e-12);
        assert_eq!(a.total, a.moderate_term + a.large_dev_term);
    }

    #[test]
    fn main_bound_rejects_small_p_and_missing_mu4() {
        let mc = MaskComplexity {
            col_norm_sq: 1.0,
            spec_norm: 1.0,
        };
        let cp = gaussian_cp(&SymMatrix::identity(2));
        assert!(main_bound(&mc, &cp, 1.0, 10, 2).is_err());
        assert!(main_bound(&mc, &cp, 1.0, 0, 3).is_err());
        let no4 = ConcentrationParams::new(vec![(2.0, 1.0)], 1.0, Provenance::Empirical).unwrap();
        assert!(main_bound(&mc, &no4, 1.0, 10, 3).is_err());
    }

    #[test]
    fn main_bound_hand_evaluation_p16_n256_b3() {
        // Independent arithmetic: Σ = I, μ₄ = √2, ν = 3^{1/4},
        // emax = e·log(np) (np = 4096 ≥ e²), banded B = 3 on p = 16.
        let p = 16usize;
        let n = 256usize;
        let sigma = SymMatrix::identity(p);
        let mask = banded_mask(p, 3).unwrap();
        let report = gaussian_bound(&mask, &sigma, n, GaussianMode::Explicit).unwrap();

        let col_norm_sq: f64 = 3.0;
        let spec_norm = 1.0 + 2.0 * (std::f64::consts::PI / 17.0).cos();
        let scale = 8.0 * E * 16f64.ln() / 256.0;
        let moderate = scale.sqrt() * col_norm_sq.sqrt() * 2f64.sqrt() * 3f64.powf(0.25);
        let large = scale * spec_norm * E * 4096f64.ln();
        assert_relative_eq!(report.moderate_term, moderate, max_relative = 1e-12);
        assert_relative_eq!(report.large_dev_term, large, max_relative = 1e-12);
        assert_relative_eq!(report.total, moderate + large, max_relative = 1e-12);
    }

    #[test]
    fn expected_max_single_point_grid() {
        // np = 6 < e², so log(np)/2 < 1 and the grid is exactly {1}
        let mu4 = 1.7;
        let v = expected_max_bound(2, 3, |_| Ok(mu4), &[1.0]).unwrap();
        assert_relative_eq!(v, 6f64.sqrt() * mu4 * mu4, epsilon = 1e-14);
    }

    #[test]
    fn expected_max_gaussian_optimum() {
        let sigma = materialize(&CovarianceSpec::ar1(50, 0.5).unwrap()).unwrap();
        let n = 400;
        let np = (n * 50) as f64;
        let (value, r) =
            expected_max_search(n, 50, |k| gaussian_mu_at_order(&sigma, k), &DEFAULT_R_GRID)
                .unwrap();
        assert_relative_eq!(r, np.ln() / 2.0, epsilon = 1e-14);
        assert_relative_eq!(value, E * np.ln() * max_norm(&sigma), max_relative = 1e-12);
    }

    #[test]
    fn enlarging_grid_never_increases() {
        let sigma = SymMatrix::identity(10);
        let f = |k: f64| gaussian_mu_at_order(&sigma, k);
        let small = expected_max_bound(30, 10, f, &[1.0, 2.0]).unwrap();
        let large = expected_max_bound(30, 10, f, &[1.0, 2.0, 3.0, 5.0, 1.7]).unwrap();
        assert!(large <= small);
    }

    #[test]
    fn gaussian_bound_homogeneity() {
        let sigma = materialize(&CovarianceSpec::ar1(12, 0.3).unwrap()).unwrap();
        let mask = banded_mask(12, 5).unwrap();
        for mode in [GaussianMode::Explicit, GaussianMode::Shape { c: 1.0 }] {
            let a = gaussian_bound(&mask, &sigma, 64, mode).unwrap();
            let b = gaussian_bound(&mask, &sigma.scale(9.0), 64, mode).unwrap();
            assert_relative_eq!(b.total / a.total, 9.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn gaussian_bound_rank_one_beats_identity_at_equal_norm() {
        let p = 64;
        let rank_one = materialize(&CovarianceSpec::rank_one_plus(p, 0.99, 0.01).unwrap()).unwrap();
        let ident = SymMatrix::identity(p);
        let mask = banded_mask(p, 5).unwrap();
        for mode in [GaussianMode::Explicit, GaussianMode::Shape { c: 1.0 }] {
            let a = gaussian_bound(&mask, &rank_one, 256, mode).unwrap();
            let b = gaussian_bound(&mask, &ident, 256, mode).unwrap();
            assert!(a.total < b.total);
        }
        let ratio = max_norm(&rank_one) / spectral_norm(&rank_one).unwrap();
        assert!(ratio < 0.03);
    }

    #[test]
    fn gaussian_bound_explicit_equals_main_composition() {
        let sigma = materialize(&CovarianceSpec::decaying(20, 1.5).unwrap()).unwrap();
        let mask = banded_mask(20, 7).unwrap();
        let g = gaussian_bound(&mask, &sigma, 100, GaussianMode::Explicit).unwrap();
        let cp = ConcentrationParams::new(
            vec![(4.0, crate::models::gaussian_mu(&sigma, 2.0).unwrap().bound)],
            crate::models::gaussian_nu(&sigma).unwrap(),
            Provenance::ClosedForm,
        )
        .unwrap();
        let emax = expected_max_bound(
            100,
            20,
            |k| gaussian_mu_at_order(&sigma, k),
            &DEFAULT_R_GRID,
        )
        .unwrap();
        let m = main_bound(&mask_complexity(&mask).unwrap(), &cp, emax, 100, 20).unwrap();
        assert_relative_eq!(g.total, m.total, max_relative = 1e-12);
    }

    #[test]
    fn complexity_masked_epsilon_scaling_and_zero_mask() {
        let mc = MaskComplexity {
            col_norm_sq: 5.0,
            spec_norm: 4.5,
        };
        let a = sample_complexity_from_metrics(&mc, 100.0, 0.5, 0.2, 1.0).unwrap();
        let b = sample_complexity_from_metrics(&mc, 100.0, 0.5, 0.1, 1.0).unwrap();
        assert_relative_eq!(b.moderate_term / a.moderate_term, 4.0, max_relative = 1e-12);
        assert_relative_eq!(
            b.large_dev_term / a.large_dev_term,
            2.0,
            max_relative = 1e-12
        );
        let zero = Mask::custom(SymMatrix::zeros(8));
        let r = sample_complexity_masked(&zero, &SymMatrix::identity(8), 0.1, 1.0).unwrap();
        assert_eq!(r.samples(), Some(0));
    }

    #[test]
    fn complexity_masked_banded_matches_banded_formula() {
        // p ≥ 2B−1 so the band fits wholly inside the interior rows
        let p = 40;
        let b = 5;
        let mask = banded_mask(p, b).unwrap();
        let sigma = SymMatrix::identity(p);
        let ratio = 1.0; // ‖I‖_max / ‖I‖
        let m = sample_complexity_masked(&mask, &sigma, 0.3, 2.0).unwrap();
        let mc = mask_complexity(&mask).unwrap();
        // col_norm_sq = B exactly, spec_norm → B from below
        assert_relative_eq!(mc.col_norm_sq, b as f64, epsilon = 1e-12);
        let from_metrics = sample_complexity_from_metrics(&mc, p as f64, ratio, 0.3, 2.0).unwrap();
        assert_eq!(m.samples(), from_metrics.samples());
        let banded = sample_complexity_banded(b as f64, p as f64, ratio, 0.3, 2.0).unwrap();
        assert_relative_eq!(m.moderate_term, banded.moderate_term, max_relative = 1e-12);
        assert!(m.large_dev_term <= banded.large_dev_term);
    }

    #[test]
    fn complexity_banded_examples() {
        let r = sample_complexity_banded(1.0, E, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(r.samples(), Some(2));
        let a = sample_complexity_banded(3.0, 200.0, 0.4, 0.25, 1.5).unwrap();
        let b = sample_complexity_banded(6.0, 200.0, 0.4, 0.25, 1.5).unwrap();
        assert!(b.samples().unwrap() <= 2 * a.samples().unwrap());
        let big = sample_complexity_banded(3.0, 1e6, 1.0, 0.99, 1.0).unwrap();
        assert!(big.large_dev_term > big.moderate_term);
    }

    #[test]
    fn complexity_lv_examples() {
        let mask = banded_mask(256, 9).unwrap();
        let lv = sample_complexity_lv(&mask, 0.5, 1.0).unwrap();
        let mc = mask_complexity(&mask).unwrap();
        let masked = sample_complexity_from_metrics(&mc, 256.0, 1.0, 0.5, 1.0).unwrap();
        assert_relative_eq!(
            lv.moderate_term / masked.moderate_term,
            256f64.ln().powi(4),
            max_relative = 1e-12
        );
        assert!(lv.samples() >= masked.samples());
        let at_e = sample_complexity_lv_from_metrics(&mc, E, 0.5, 1.0).unwrap();
        let masked_e = sample_complexity_from_metrics(&mc, E, 1.0, 0.5, 1.0).unwrap();
        assert_relative_eq!(
            at_e.moderate_term,
            masked_e.moderate_term,
            max_relative = 1e-12
        );
    }

    #[test]
    fn complexity_classical_examples() {
        assert_eq!(
            sample_complexity_classical(37, 1.0, 1.0).unwrap().samples(),
            Some(37)
        );
        assert_eq!(
            sample_complexity_classical(37, 0.5, 1.0).unwrap().samples(),
            Some(148)
        );
        assert_eq!(
            sample_complexity_classical(100, 0.1, 1.0)
                .unwrap()
                .samples(),
            Some(10_000)
        );
        let a = sample_complexity_classical(50, 0.3, 2.0).unwrap().total;
        let b = sample_complexity_classical(100, 0.3, 2.0).unwrap().total;
        assert_relative_eq!(b, 2.0 * a, max_relative = 1e-15);
        assert!(sample_complexity_classical(10, 0.0, 1.0).is_err());
    }

    #[test]
    fn banded_bias_examples() {
        let bb = banded_bias_bound(2.0, 4).unwrap();
        assert_relative_eq!(bb.bias, 0.4, epsilon = 1e-15);
        assert_relative_eq!(bb.sigma_norm_upper, 3.0, epsilon = 1e-15);
        assert!(banded_bias_bound(2.0, 1_000_000).unwrap().bias < 1e-5);
        assert!(banded_bias_bound(1.0, 3).is_err());
    }

    #[test]
    fn moment_bound_psd_examples() {
        assert_relative_eq!(
            moment_bound_psd(2.5, 0.0, 2.0, 4.0).unwrap(),
            2.5,
            epsilon = 1e-14
        );
        let r = 5.0;
        let q = 2.0;
        assert_relative_eq!(
            moment_bound_psd(0.0, 9.0, q, r).unwrap(),
            4.0 * E * r * 9f64.powf(1.0 / q),
            max_relative = 1e-14
        );
        assert!(
            moment_bound_psd(1.0, 1.0, 2.0, 3.0).unwrap()
                < moment_bound_psd(1.0, 1.0, 2.0, 4.0).unwrap()
        );
        assert!(moment_bound_psd(1.0, 1.0, 0.5, 3.0).is_err());
        assert!(moment_bound_psd(1.0, 1.0, 3.0, 2.0).is_err());
    }

    #[test]
    fn moment_bound_selfadj_reproduces_second_moment_constants() {
        let p = 10usize;
        let r = moment_order(2.0, p);
        let log_p = (p as f64).ln();
        let v = 1.7;
        let m = 2.3; // E max ‖Y‖²
        let got = moment_bound_selfadj(v, m, 2.0, r).unwrap();
        let expected = (2.0 * E * log_p).sqrt() * v + 4.0 * E * log_p * m.sqrt();
        assert_relative_eq!(got, expected, max_relative = 1e-14);
        assert_eq!(moment_bound_selfadj(0.0, 0.0, 2.0, r).unwrap(), 0.0);
        let sum = moment_bound_selfadj(v, 0.0, 2.0, r).unwrap()
            + moment_bound_selfadj(0.0, m, 2.0, r).unwrap();
        assert_relative_eq!(got, sum, max_relative = 1e-14);
        assert!(moment_bound_selfadj(1.0, 1.0, 1.5, 3.0).is_err());
    }

    #[test]
    fn khintchine_rhs_examples() {
        let a = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, -3.0]]).unwrap();
        for r in [2.0, 3.0, 8.0] {
            assert_relative_eq!(
                khintchine_rhs(std::slice::from_ref(&a), r).unwrap(),
                r.sqrt() * schatten_norm(&a, r).unwrap(),
                max_relative = 1e-12
            );
        }
        let zeros = vec![SymMatrix::zeros(3); 4];
        assert_eq!(khintchine_rhs(&zeros, 4.0).unwrap(), 0.0);
        let p = 5;
        let units: Vec<SymMatrix> = (0..p)
            .map(|i| {
                SymMatrix::from_fn(p, |a, b| if a == i && b == i { 1.0 } else { 0.0 }).unwrap()
            })
            .collect();
        assert_relative_eq!(
            khintchine_rhs(&units, 2.0).unwrap(),
            2f64.sqrt() * (p as f64).sqrt(),
            max_relative = 1e-12
        );
        assert!(khintchine_rhs(&units, 1.5).is_err());
        assert!(khintchine_rhs(&[], 2.0).is_err());
    }

    #[test]
    fn lv_dominates_masked_at_unit_ratio() {
        for p in [3usize, 8, 100, 1000] {
            for b in [1usize, 3, 9] {
                let mask = banded_mask(p.max(b), b).unwrap();
                let mc = mask_complexity(&mask).unwrap();
                for eps in [0.05, 0.5, 0.99] {
                    let lv = sample_complexity_lv_from_metrics(&mc, p as f64, eps, 1.0).unwrap();
                    let m = sample_complexity_from_metrics(&mc, p as f64, 1.0, eps, 1.0).unwrap();
                    assert!(lv.samples() >= m.samples());
                }
            }
        }
        let _ = all_ones_mask(3);
    }
}
