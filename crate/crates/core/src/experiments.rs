//! Seeded Monte Carlo engine: the variance experiment, scaling studies and
//! empirical checks of the lemmas and matrix inequalities.
//!
//! Every trial `t` draws from its own stream seeded by
//! `derive_seed(seed, t)`. Trials run in parallel but results are collected
//! and reduced in trial order, so outputs do not depend on the thread count.

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    expected_max_search, gaussian_bound, khintchine_rhs, main_bound, moment_bound_psd,
    moment_bound_selfadj, moment_order, BoundReport, GaussianMode, DEFAULT_R_GRID,
};
use crate::error::{Error, Result};
use crate::estimator::masked_estimator;
use crate::io::ResultRow;
use crate::masks::{mask_complexity, Mask, MaskKind};
use crate::matrix::{
    is_psd, one_to_two_norm, schatten_norm, schur_product, spectral_norm, SymMatrix, PSD_TOLERANCE,
};
use crate::models::{
    derive_seed, gaussian_mu, gaussian_nu, rng_from_seed, ConcentrationParams, DistributionSpec,
    Family, Sampler,
};

/// Standard errors of slack for Monte Carlo inequality checks.
pub const MC_SLACK_SE: f64 = 3.0;
/// Slack for the variance lemma check.
pub const VARIANCE_LEMMA_SLACK_SE: f64 = 5.0;
/// Largest ensemble the exact Khintchine mode will enumerate.
pub const MAX_EXACT_SUMMANDS: usize = 20;

/// Pilot sample size for empirical concentration parameters.
const PILOT_SAMPLES: usize = 20_000;
const PILOT_DIRECTIONS: usize = 256;

/// Independent stream for the Rademacher signs of trial seed `s`.
fn sign_seed(s: u64) -> u64 {
    derive_seed(s, 0x5349_474e)
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: DistributionSpec,
    pub mask: Mask,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub centered: bool,
    pub epsilon: Option<f64>,
}

impl ExperimentConfig {
    /// All violated constraints, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n < 1 {
            out.push("n must be at least 1".to_string());
        }
        if self.trials < 2 {
            out.push(format!("trials must be at least 2, got {}", self.trials));
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0 && eps < 1.0) {
                out.push(format!("epsilon must lie in (0,1), got {eps}"));
            }
        }
        if self.mask.dim() != self.model.dim() {
            out.push(format!(
                "mask dimension {} does not match model dimension {}",
                self.mask.dim(),
                self.model.dim()
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoryProvenance {
    /// Closed-form Gaussian parameters; a certified bound.
    ClosedForm,
    /// Pilot-sample `μ₄`, `ν` and Monte Carlo expected maximum; diagnostic.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentMetadata {
    pub n: usize,
    pub p: usize,
    pub trials: usize,
    pub seed: u64,
    pub centered: bool,
    pub epsilon: Option<f64>,
    pub family: Family,
    pub mask_kind: MaskKind,
    pub bandwidth: Option<usize>,
    pub theory: TheoryProvenance,
    /// Share of trials with `‖M⊙Σ̂ₙ − Σ‖ ≤ ε‖Σ‖`, when `ε` is set.
    pub within_epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    /// `[mean of ‖M⊙Σ̂ₙ − M⊙Σ‖²]^{1/2}`
    pub empirical_rms: f64,
    pub std_error: f64,
    pub theoretical: BoundReport,
    /// `empirical_rms / theoretical.total`, or 0 when the bound is 0.
    pub ratio: f64,
    pub per_trial: Vec<f64>,
    pub metadata: ExperimentMetadata,
}

impl ExperimentResult {
    pub fn to_row(&self, axis_value: f64) -> ResultRow {
        ResultRow {
            axis_value,
            empirical_rms: self.empirical_rms,
            std_error: self.std_error,
            theoretical_total: self.theoretical.total,
            theoretical_moderate: self.theoretical.moderate_term,
            theoretical_large_dev: self.theoretical.large_dev_term,
            ratio: self.ratio,
            trials: self.metadata.trials,
            seed: self.metadata.seed,
        }
    }
}

/// Sample mean and (n−1)-normalized standard deviation.
fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean of `values` and the delta-method standard error of `mean^{1/k}`.
fn root_of_mean(values: &[f64], k: f64) -> (f64, f64) {
    let (mean, sd) = mean_sd(values);
    let root = mean.powf(1.0 / k);
    let se = if mean > 0.0 {
        sd / (values.len() as f64).sqrt() / (k * mean.powf((k - 1.0) / k))
    } else {
        0.0
    };
    (root, se)
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

struct Trial {
    error: f64,
    max_inf4: f64,
    within: bool,
}

pub fn run_variance_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let sampler = Sampler::new(&cfg.model)?;
    let sigma = sampler.sigma();
    let p = sigma.dim();
    let masked_sigma = schur_product(cfg.mask.matrix(), sigma)?;
    let sigma_norm = spectral_norm(sigma)?;

    let trials: Vec<Trial> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let s = sampler.draw(cfg.n, derive_seed(cfg.seed, t as u64))?;
            let est = masked_estimator(&cfg.mask, &s, cfg.centered)?;
            let error = spectral_norm(&est.sub(&masked_sigma)?)?;
            let max_inf4 = max_abs(s.columns().as_slice()).powi(4);
            let within = match cfg.epsilon {
                Some(eps) => spectral_norm(&est.sub(sigma)?)? <= eps * sigma_norm,
                None => false,
            };
            Ok(Trial {
                error,
                max_inf4,
                within,
            })
        })
        .collect::<Result<_>>()?;

    let per_trial: Vec<f64> = trials.iter().map(|t| t.error).collect();
    let squares: Vec<f64> = per_trial.iter().map(|e| e * e).collect();
    let (empirical_rms, std_error) = root_of_mean(&squares, 2.0);

    let (theoretical, theory) = if cfg.model.is_gaussian() {
        (
            gaussian_bound(&cfg.mask, sigma, cfg.n, GaussianMode::Explicit)?,
            TheoryProvenance::ClosedForm,
        )
    } else {
        let pilot_seed = derive_seed(cfg.seed, u64::MAX);
        let pilot = sampler.draw(PILOT_SAMPLES, pilot_seed)?;
        let cp = ConcentrationParams::empirical(&pilot, &[4.0], PILOT_DIRECTIONS, pilot_seed)?;
        let emax: Vec<f64> = trials.iter().map(|t| t.max_inf4).collect();
        let emax_sq_root = mean_sd(&emax).0.sqrt();
        (
            main_bound(&mask_complexity(&cfg.mask)?, &cp, emax_sq_root, cfg.n, p)?,
            TheoryProvenance::Empirical,
        )
    };

    let ratio = if theoretical.total > 0.0 {
        empirical_rms / theoretical.total
    } else {
        0.0
    };
    let within_epsilon = cfg
        .epsilon
        .map(|_| trials.iter().filter(|t| t.within).count() as f64 / cfg.trials as f64);

    Ok(ExperimentResult {
        empirical_rms,
        std_error,
        theoretical,
        ratio,
        per_trial,
        metadata: ExperimentMetadata {
            n: cfg.n,
            p,
            trials: cfg.trials,
            seed: cfg.seed,
            centered: cfg.centered,
            epsilon: cfg.epsilon,
            family: cfg.model.family,
            mask_kind: cfg.mask.kind(),
            bandwidth: cfg.mask.bandwidth(),
            theory,
            within_epsilon,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    N,
    Bandwidth,
    P,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::N => "n",
            Axis::Bandwidth => "bandwidth",
            Axis::P => "p",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub axis_value: f64,
    pub result: ExperimentResult,
}

fn axis_count(axis: Axis, v: f64) -> Result<usize> {
    if !(v >= 1.0) || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(Error::invalid(format!(
            "{axis} values must be positive integers, got {v}"
        )));
    }
    Ok(v as usize)
}

/// Configuration of `base` with one axis set to `value`.
pub fn vary_config(base: &ExperimentConfig, axis: Axis, value: f64) -> Result<ExperimentConfig> {
    let v = axis_count(axis, value)?;
    let mut cfg = base.clone();
    match axis {
        Axis::N => cfg.n = v,
        Axis::Bandwidth => cfg.mask = base.mask.with_bandwidth(v)?,
        Axis::P => {
            cfg.model =
                DistributionSpec::new(base.model.covariance.with_dim(v)?, base.model.family)?;
            cfg.mask = base.mask.regenerate(v)?;
        }
    }
    Ok(cfg)
}

/// One experiment per value. All rows share the base seed.
pub fn scaling_study(
    base: &ExperimentConfig,
    axis: Axis,
    values: &[f64],
) -> Result<Vec<ScalingRow>> {
    values
        .iter()
        .map(|&v| {
            let cfg = vary_config(base, axis, v)?;
            Ok(ScalingRow {
                axis_value: v,
                result: run_variance_experiment(&cfg)?,
            })
        })
        .collect()
}

pub fn scaling_rows(rows: &[ScalingRow]) -> Vec<ResultRow> {
    rows.iter().map(|r| r.result.to_row(r.axis_value)).collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("slope fit needs at least two paired points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("slope fit needs positive values"));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("slope fit needs distinct x values"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

fn require_gaussian(model: &DistributionSpec, what: &str) -> Result<()> {
    if !model.is_gaussian() {
        return Err(Error::invalid(format!(
            "{what} uses closed-form Gaussian parameters and needs a gaussian model"
        )));
    }
    Ok(())
}

fn require_mask_dim(mask: &Mask, p: usize) -> Result<()> {
    if mask.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: mask.dim(),
        });
    }
    Ok(())
}

fn require_trials(trials: usize) -> Result<()> {
    if trials < 2 {
        return Err(Error::invalid(format!(
            "trials must be at least 2, got {trials}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceLemmaReport {
    pub trials: usize,
    /// `λ_max` of the Monte Carlo mean of `(M⊙xx*)²`.
    pub lhs_max_eigenvalue: f64,
    /// `μ₄²ν²‖M‖₁→₂²` with exact Gaussian `μ₄` and `ν`.
    pub bound: f64,
    /// `λ_max(mean − bound·I)`
    pub max_violation: f64,
    pub std_error: f64,
    pub holds: bool,
}

/// Checks `E(M⊙xx*)² ⪯ μ₄²ν²‖M‖₁→₂²·I` for a Gaussian model.
pub fn verify_variance_lemma(
    model: &DistributionSpec,
    mask: &Mask,
    trials: usize,
    seed: u64,
) -> Result<VarianceLemmaReport> {
    require_gaussian(model, "the variance lemma check")?;
    require_trials(trials)?;
    let sampler = Sampler::new(model)?;
    let sigma = sampler.sigma();
    let p = sigma.dim();
    require_mask_dim(mask, p)?;
    let s = sampler.draw(trials, seed)?;
    let squares: Vec<SymMatrix> = (0..trials)
        .into_par_iter()
        .map(|k| Ok(mask.matrix().congruence_by_diagonal(s.sample(k))?.square()))
        .collect::<Result<_>>()?;
    let mean = SymMatrix::sum(&squares)?.scale(1.0 / trials as f64);

    let mu4 = gaussian_mu(sigma, 2.0)?.exact;
    let nu = gaussian_nu(sigma)?;
    let col = one_to_two_norm(mask.matrix());
    let bound = mu4 * mu4 * nu * nu * col * col;

    let eig = mean.eigen()?;
    let top = eig.values[p - 1];
    let v = eig.vectors.column(p - 1);
    let quad: Vec<f64> = squares
        .iter()
        .map(|w| (v.transpose() * w.as_matrix() * v)[(0, 0)])
        .collect();
    let std_error = mean_sd(&quad).1 / (trials as f64).sqrt();
    let max_violation = top - bound;
    Ok(VarianceLemmaReport {
        trials,
        lhs_max_eigenvalue: top,
        bound,
        max_violation,
        std_error,
        holds: max_violation <= VARIANCE_LEMMA_SLACK_SE * std_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchurLemmaReport {
    pub trials: usize,
    pub p: usize,
    pub violations: usize,
    /// Largest `‖M⊙xx*‖ / (‖M‖·‖x‖∞²)` seen.
    pub max_ratio: f64,
    pub holds: bool,
}

/// Relative round-off allowance for the deterministic Schur norm check.
const ROUNDOFF: f64 = 1e-12;

/// Checks `‖M⊙xx*‖ ≤ ‖M‖·‖x‖∞²` on random symmetric `M` (standard normal
/// entries) and standard normal `x`. No statistical slack.
pub fn verify_schur_norm_lemma(trials: usize, p: usize, seed: u64) -> Result<SchurLemmaReport> {
    if trials < 1 || p < 1 {
        return Err(Error::invalid("trials and p must be positive"));
    }
    let ratios: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(seed, t as u64));
            let raw = DMatrix::<f64>::from_fn(p, p, |_, _| rng.sample(rand_distr::StandardNormal));
            let m = SymMatrix::new((&raw + raw.transpose()) * 0.5)?;
            let x: Vec<f64> = (0..p)
                .map(|_| rng.sample(rand_distr::StandardNormal))
                .collect();
            let lhs = spectral_norm(&m.congruence_by_diagonal(&x)?)?;
            let rhs = spectral_norm(&m)? * max_abs(&x).powi(2);
            Ok(if rhs > 0.0 {
                lhs / rhs
            } else if lhs > 0.0 {
                f64::INFINITY
            } else {
                0.0
            })
        })
        .collect::<Result<_>>()?;
    let violations = ratios.iter().filter(|&&r| r > 1.0 + ROUNDOFF).count();
    Ok(SchurLemmaReport {
        trials,
        p,
        violations,
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        holds: violations == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectedMaxReport {
    /// Monte Carlo `[E maxᵢ ‖xᵢ‖∞⁴]^{1/4}`
    pub empirical: f64,
    pub std_error: f64,
    /// `inf_r (np)^{1/(4r)} μ_{4r}` with exact Gaussian moments.
    pub bound: f64,
    pub best_r: f64,
    pub ratio: f64,
    pub holds: bool,
}

pub fn verify_expected_max_lemma(
    model: &DistributionSpec,
    n: usize,
    trials: usize,
    r_grid: &[f64],
    seed: u64,
) -> Result<ExpectedMaxReport> {
    require_gaussian(model, "the expected maximum check")?;
    require_trials(trials)?;
    let sampler = Sampler::new(model)?;
    let sigma = sampler.sigma();
    let p = sigma.dim();
    let maxima: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            Ok(max_abs(
                sampler
                    .draw(n, derive_seed(seed, t as u64))?
                    .columns()
                    .as_slice(),
            )
            .powi(4))
        })
        .collect::<Result<_>>()?;
    let (empirical, std_error) = root_of_mean(&maxima, 4.0);
    let (sq, best_r) =
        expected_max_search(n, p, |k| Ok(gaussian_mu(sigma, k / 2.0)?.exact), r_grid)?;
    let bound = sq.sqrt();
    Ok(ExpectedMaxReport {
        empirical,
        std_error,
        bound,
        best_r,
        ratio: if bound > 0.0 { empirical / bound } else { 0.0 },
        holds: empirical <= bound + MC_SLACK_SE * std_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetrizationReport {
    /// `E‖Σᵢ (Zᵢ − E Zᵢ)‖`
    pub lhs: f64,
    pub lhs_std_error: f64,
    /// `2·E‖Σᵢ ξᵢ Zᵢ‖`
    pub rhs: f64,
    pub rhs_std_error: f64,
    pub holds: bool,
}

/// Symmetrization with `Zᵢ = M⊙xᵢxᵢ*` and fresh Rademacher signs.
pub fn verify_symmetrization(
    model: &DistributionSpec,
    mask: &Mask,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<SymmetrizationReport> {
    require_trials(trials)?;
    let sampler = Sampler::new(model)?;
    require_mask_dim(mask, sampler.sigma().dim())?;
    let mean_z = schur_product(mask.matrix(), sampler.sigma())?.scale(n as f64);
    let pairs: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = derive_seed(seed, t as u64);
            let s = sampler.draw(n, trial_seed)?;
            let x = s.columns();
            let sum = SymMatrix::new(x * x.transpose())?;
            let centered = schur_product(mask.matrix(), &sum)?.sub(&mean_z)?;
            let mut rng = rng_from_seed(sign_seed(trial_seed));
            let mut signed = x.clone();
            for mut col in signed.column_iter_mut() {
                if rng.random::<bool>() {
                    col.neg_mut();
                }
            }
            let rad = SymMatrix::new(signed * x.transpose())?;
            let rad = schur_product(mask.matrix(), &rad)?;
            Ok((spectral_norm(&centered)?, 2.0 * spectral_norm(&rad)?))
        })
        .collect::<Result<_>>()?;
    let lhs_v: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let rhs_v: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let root_t = (trials as f64).sqrt();
    let (lhs, lsd) = mean_sd(&lhs_v);
    let (rhs, rsd) = mean_sd(&rhs_v);
    let (lhs_std_error, rhs_std_error) = (lsd / root_t, rsd / root_t);
    let slack = MC_SLACK_SE * lhs_std_error.hypot(rhs_std_error);
    Ok(SymmetrizationReport {
        lhs,
        lhs_std_error,
        rhs,
        rhs_std_error,
        holds: lhs <= rhs + slack,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum KhintchineMode {
    /// Average over all `2^k` sign patterns; no slack.
    Exact,
    MonteCarlo {
        trials: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KhintchineReport {
    /// `(E‖Σ ξᵢAᵢ‖_r^r)^{1/r}`
    pub lhs: f64,
    pub std_error: f64,
    /// `√r·‖(Σ Aᵢ²)^{1/2}‖_r`
    pub rhs: f64,
    pub mode: KhintchineMode,
    pub holds: bool,
}

fn signed_sum(matrices: &[SymMatrix], signs: impl Fn(usize) -> bool) -> Result<SymMatrix> {
    let p = matrices[0].dim();
    let mut acc = DMatrix::<f64>::zeros(p, p);
    for (i, a) in matrices.iter().enumerate() {
        if a.dim() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: a.dim(),
            });
        }
        if signs(i) {
            acc -= a.as_matrix();
        } else {
            acc += a.as_matrix();
        }
    }
    SymMatrix::new(acc)
}

pub fn verify_khintchine(
    matrices: &[SymMatrix],
    r: f64,
    mode: KhintchineMode,
) -> Result<KhintchineReport> {
    let rhs = khintchine_rhs(matrices, r)?;
    let k = matrices.len();
    let powered = |signs: &dyn Fn(usize) -> bool| -> Result<f64> {
        Ok(schatten_norm(&signed_sum(matrices, signs)?, r)?.powf(r))
    };
    let (lhs, std_error, holds) = match mode {
        KhintchineMode::Exact => {
            if k > MAX_EXACT_SUMMANDS {
                return Err(Error::invalid(format!(
                    "exact mode enumerates 2^k patterns and allows at most {MAX_EXACT_SUMMANDS} summands, got {k}"
                )));
            }
            let values: Vec<f64> = (0..1u64 << k)
                .into_par_iter()
                .map(|bits| powered(&|i| bits >> i & 1 == 1))
                .collect::<Result<_>>()?;
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let lhs = mean.powf(1.0 / r);
            (lhs, 0.0, lhs <= rhs)
        }
        KhintchineMode::MonteCarlo { trials, seed } => {
            require_trials(trials)?;
            let values: Vec<f64> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = rng_from_seed(derive_seed(seed, t as u64));
                    let signs: Vec<bool> = (0..k).map(|_| rng.random()).collect();
                    powered(&|i| signs[i])
                })
                .collect::<Result<_>>()?;
            let (lhs, se) = root_of_mean(&values, r);
            (lhs, se, lhs <= rhs + MC_SLACK_SE * se)
        }
    };
    Ok(KhintchineReport {
        lhs,
        std_error,
        rhs,
        mode,
        holds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentPart {
    /// Independent PSD summands `Wᵢ`.
    Psd,
    /// Symmetric summands `Yᵢ = ξᵢWᵢ`.
    SelfAdj,
}

#[derive(Debug, Clone)]
pub enum MomentEnsemble {
    /// `Wᵢ = cᵢ·M⊙xᵢxᵢ*` with independent `xᵢ` from `model`, one per scale.
    RankOne {
        model: DistributionSpec,
        mask: Mask,
        scales: Vec<f64>,
    },
    /// Deterministic `Wᵢ = Aᵢ`.
    Fixed { matrices: Vec<SymMatrix> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub part: MomentPart,
    pub q: f64,
    pub r: f64,
    /// `(E‖Σᵢ summandᵢ‖^q)^{1/q}`
    pub lhs: f64,
    pub lhs_std_error: f64,
    /// `‖Σ E Wᵢ‖` (psd) or `‖(Σ E Yᵢ²)^{1/2}‖` (self-adjoint).
    pub leading_norm: f64,
    /// `E maxᵢ ‖summandᵢ‖^q`
    pub max_term: f64,
    pub rhs: f64,
    pub holds: bool,
}

struct MomentTrial {
    norm_q: f64,
    max_q: f64,
    square_sum: Option<SymMatrix>,
}

/// Checks one part of the matrix moment inequality with `r = max(q, 2 log p)`.
pub fn verify_moment_inequality(
    ensemble: &MomentEnsemble,
    q: f64,
    part: MomentPart,
    trials: usize,
    seed: u64,
) -> Result<MomentReport> {
    require_trials(trials)?;
    let (p, k) = match ensemble {
        MomentEnsemble::RankOne {
            model,
            mask,
            scales,
        } => {
            require_mask_dim(mask, model.dim())?;
            if scales.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
                return Err(Error::invalid("ensemble scales must be finite and >= 0"));
            }
            if part == MomentPart::Psd && !is_psd(mask.matrix(), PSD_TOLERANCE)? {
                return Err(Error::invalid(
                    "the psd part needs a positive-semidefinite mask",
                ));
            }
            (model.dim(), scales.len())
        }
        MomentEnsemble::Fixed { matrices } => {
            let p = matrices.first().map(SymMatrix::dim).unwrap_or(0);
            if part == MomentPart::Psd {
                for a in matrices {
                    if !is_psd(a, PSD_TOLERANCE)? {
                        return Err(Error::invalid(
                            "the psd part needs positive-semidefinite summands",
                        ));
                    }
                }
            }
            (p, matrices.len())
        }
    };
    if k == 0 {
        return Err(Error::invalid("the ensemble needs at least one summand"));
    }
    if p < 3 {
        return Err(Error::invalid(format!(
            "the moment inequality requires p >= 3, got {p}"
        )));
    }
    let r = moment_order(q, p);
    let sampler = match ensemble {
        MomentEnsemble::RankOne { model, .. } => Some(Sampler::new(model)?),
        MomentEnsemble::Fixed { .. } => None,
    };
    let want_squares = part == MomentPart::SelfAdj && sampler.is_some();

    let results: Vec<MomentTrial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = derive_seed(seed, t as u64);
            let summands: Vec<SymMatrix> = match (ensemble, &sampler) {
                (MomentEnsemble::RankOne { mask, scales, .. }, Some(sampler)) => {
                    let s = sampler.draw(k, trial_seed)?;
                    scales
                        .iter()
                        .enumerate()
                        .map(|(i, &c)| {
                            Ok(mask.matrix().congruence_by_diagonal(s.sample(i))?.scale(c))
                        })
                        .collect::<Result<_>>()?
                }
                (MomentEnsemble::Fixed { matrices }, _) => matrices.clone(),
                _ => unreachable!("rank-one ensembles always carry a sampler"),
            };
            let sum = match part {
                MomentPart::Psd => signed_sum(&summands, |_| false)?,
                MomentPart::SelfAdj => {
                    let mut rng = rng_from_seed(sign_seed(trial_seed));
                    let signs: Vec<bool> = (0..k).map(|_| rng.random()).collect();
                    signed_sum(&summands, |i| signs[i])?
                }
            };
            let mut max_q = 0.0_f64;
            for w in &summands {
                max_q = max_q.max(spectral_norm(w)?.powf(q));
            }
            let square_sum = if want_squares {
                Some(SymMatrix::sum(
                    &summands.iter().map(SymMatrix::square).collect::<Vec<_>>(),
                )?)
            } else {
                None
            };
            Ok(MomentTrial {
                norm_q: spectral_norm(&sum)?.powf(q),
                max_q,
                square_sum,
            })
        })
        .collect::<Result<_>>()?;

    let norms: Vec<f64> = results.iter().map(|t| t.norm_q).collect();
    let (lhs, lhs_std_error) = root_of_mean(&norms, q);
    let max_term = match ensemble {
        MomentEnsemble::RankOne { .. } => {
            results.iter().map(|t| t.max_q).sum::<f64>() / trials as f64
        }
        MomentEnsemble::Fixed { .. } => results[0].max_q,
    };

    let (leading_norm, rhs) = match part {
        MomentPart::Psd => {
            let mean_norm = match ensemble {
                MomentEnsemble::RankOne {
                    model,
                    mask,
                    scales,
                } => {
                    let sigma = sampler
                        .as_ref()
                        .map(Sampler::sigma)
                        .expect("sampler exists");
                    debug_assert_eq!(sigma.dim(), model.dim());
                    scales.iter().sum::<f64>()
                        * spectral_norm(&schur_product(mask.matrix(), sigma)?)?
                }
                MomentEnsemble::Fixed { matrices } => spectral_norm(&SymMatrix::sum(matrices)?)?,
            };
            (mean_norm, moment_bound_psd(mean_norm, max_term, q, r)?)
        }
        MomentPart::SelfAdj => {
            let variance = match ensemble {
                MomentEnsemble::RankOne { .. } => {
                    let sums: Vec<&SymMatrix> = results
                        .iter()
                        .filter_map(|t| t.square_sum.as_ref())
                        .collect();
                    SymMatrix::sum(sums)?.scale(1.0 / trials as f64)
                }
                MomentEnsemble::Fixed { matrices } => {
                    SymMatrix::sum(&matrices.iter().map(SymMatrix::square).collect::<Vec<_>>())?
                }
            };
            let variance_norm = spectral_norm(&variance)?.sqrt();
            (
                variance_norm,
                moment_bound_selfadj(variance_norm, max_term, q, r)?,
            )
        }
    };

    Ok(MomentReport {
        part,
        q,
        r,
        lhs,
        lhs_std_error,
        leading_norm,
        max_term,
        rhs,
        holds: lhs <= rhs + MC_SLACK_SE * lhs_std_error,
    })
}

/// `k` symmetric `p × p` matrices with independent standard normal entries
/// on and above the diagonal.
pub fn random_symmetric_ensemble(k: usize, p: usize, seed: u64) -> Result<Vec<SymMatrix>> {
    if k == 0 || p == 0 {
        return Err(Error::invalid(
            "an ensemble needs k >= 1 summands of dimension p >= 1",
        ));
    }
    (0..k)
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, i as u64));
            let mut m = DMatrix::<f64>::zeros(p, p);
            for a in 0..p {
                for b in a..p {
                    let v: f64 = rng.sample(rand_distr::StandardNormal);
                    m[(a, b)] = v;
                    m[(b, a)] = v;
                }
            }
            SymMatrix::new(m)
        })
        .collect()
}

/// Sizes the global worker pool; must run before the first parallel call.
pub fn set_global_threads(threads: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::invalid(e.to_string()))
}

/// The default order grid, for callers that do not pick one.
pub fn default_r_grid() -> Vec<f64> {
    DEFAULT_R_GRID.to_vec()
}
