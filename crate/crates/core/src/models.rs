//! Population models: covariance families, zero-mean samplers and the
//! concentration parameters `μ_r` (worst-coordinate `L_r` norm) and `ν`
//! (worst-direction `L_4` norm).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::sample_covariance;
use crate::matrix::{is_psd, psd_sqrt, spectral_norm, SymMatrix, PSD_TOLERANCE};

/// Student-t degrees of freedom used when none is given (finite 8th moments).
pub const DEFAULT_DF: f64 = 9.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovarianceKind {
    Identity,
    Ar1 {
        rho: f64,
    },
    Decaying {
        alpha: f64,
    },
    RankOnePlus {
        lambda: f64,
        delta: f64,
    },
    Custom {
        #[serde(skip)]
        matrix: SymMatrix,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceSpec {
    dim: usize,
    kind: CovarianceKind,
}

fn positive_dim(p: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::invalid("covariance dimension must be positive"));
    }
    Ok(())
}

impl CovarianceSpec {
    pub fn identity(p: usize) -> Result<Self> {
        positive_dim(p)?;
        Ok(Self {
            dim: p,
            kind: CovarianceKind::Identity,
        })
    }

    /// `Σᵢⱼ = ρ^{|i−j|}` with `ρ ∈ (−1, 1)`.
    pub fn ar1(p: usize, rho: f64) -> Result<Self> {
        positive_dim(p)?;
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::invalid(format!(
                "ar1 rho must lie in (-1, 1), got {rho}"
            )));
        }
        Ok(Self {
            dim: p,
            kind: CovarianceKind::Ar1 { rho },
        })
    }

    /// `Σᵢⱼ = (|i−j| + 1)^{−α}` with `α > 1`.
    pub fn decaying(p: usize, alpha: f64) -> Result<Self> {
        positive_dim(p)?;
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!(
                "decay exponent must exceed 1, got {alpha}"
            )));
        }
        Ok(Self {
            dim: p,
            kind: CovarianceKind::Decaying { alpha },
        })
    }

    /// `Σ = λ·vv* + δ·I` with `v` the normalized all-ones vector.
    pub fn rank_one_plus(p: usize, lambda: f64, delta: f64) -> Result<Self> {
        positive_dim(p)?;
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::invalid(format!("delta must be > 0, got {delta}")));
        }
        Ok(Self {
            dim: p,
            kind: CovarianceKind::RankOnePlus { lambda, delta },
        })
    }

    pub fn custom(matrix: SymMatrix) -> Result<Self> {
        if !is_psd(&matrix, PSD_TOLERANCE)? {
            return Err(Error::NotPsd {
                min_eigenvalue: matrix.min_eigenvalue()?,
            });
        }
        Ok(Self {
            dim: matrix.dim(),
            kind: CovarianceKind::Custom { matrix },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &CovarianceKind {
        &self.kind
    }

    /// The same family at dimension `p`; custom matrices cannot be resized.
    pub fn with_dim(&self, p: usize) -> Result<Self> {
        match &self.kind {
            CovarianceKind::Identity => Self::identity(p),
            CovarianceKind::Ar1 { rho } => Self::ar1(p, *rho),
            CovarianceKind::Decaying { alpha } => Self::decaying(p, *alpha),
            CovarianceKind::RankOnePlus { lambda, delta } => {
                Self::rank_one_plus(p, *lambda, *delta)
            }
            CovarianceKind::Custom { .. } => Err(Error::invalid(
                "a custom covariance cannot be regenerated at another dimension",
            )),
        }
    }
}

/// Builds `Σ` for a spec. The decaying family is checked for PSD-ness and
/// never repaired.
pub fn materialize(spec: &CovarianceSpec) -> Result<SymMatrix> {
    let p = spec.dim;
    let sigma = match &spec.kind {
        CovarianceKind::Identity => SymMatrix::identity(p),
        CovarianceKind::Ar1 { rho } => {
            SymMatrix::from_fn(p, |i, j| rho.powi(i.abs_diff(j) as i32))?
        }
        CovarianceKind::Decaying { alpha } => {
            let m = SymMatrix::from_fn(p, |i, j| ((i.abs_diff(j) + 1) as f64).powf(-alpha))?;
            if !is_psd(&m, PSD_TOLERANCE)? {
                return Err(Error::NotPsd {
                    min_eigenvalue: m.min_eigenvalue()?,
                });
            }
            m
        }
        CovarianceKind::RankOnePlus { lambda, delta } => {
            let w = lambda / p as f64;
            SymMatrix::from_fn(p, |i, j| if i == j { w + delta } else { w })?
        }
        CovarianceKind::Custom { matrix } => matrix.clone(),
    };
    Ok(sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    /// Multivariate t rescaled so the covariance is exactly `Σ`.
    StudentT {
        df: f64,
    },
    /// `√p · Σ^{1/2} u` with `u` uniform on the unit sphere.
    SphereBounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionSpec {
    pub covariance: CovarianceSpec,
    pub family: Family,
}

impl DistributionSpec {
    pub fn new(covariance: CovarianceSpec, family: Family) -> Result<Self> {
        if let Family::StudentT { df } = family {
            if !(df > 4.0) || !df.is_finite() {
                return Err(Error::invalid(format!(
                    "student_t needs df > 4 for finite fourth moments, got {df}"
                )));
            }
        }
        Ok(Self { covariance, family })
    }

    pub fn gaussian(covariance: CovarianceSpec) -> Self {
        Self {
            covariance,
            family: Family::Gaussian,
        }
    }

    pub fn dim(&self) -> usize {
        self.covariance.dim()
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.family, Family::Gaussian)
    }
}

/// `n` samples stored as the columns of a `p × n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    data: DMatrix<f64>,
    seed: Option<u64>,
    model: Option<DistributionSpec>,
}

impl SampleSet {
    /// Wraps a `p × n` matrix whose columns are samples.
    pub fn from_columns(data: DMatrix<f64>) -> Result<Self> {
        if data.ncols() == 0 || data.nrows() == 0 {
            return Err(Error::invalid("a sample set needs n >= 1 and p >= 1"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sample values must be finite"));
        }
        Ok(Self {
            data,
            seed: None,
            model: None,
        })
    }

    /// Wraps an `n × p` matrix whose rows are samples (the file layout).
    pub fn from_rows(rows: &DMatrix<f64>) -> Result<Self> {
        Self::from_columns(rows.transpose())
    }

    pub fn from_vectors(vectors: &[Vec<f64>]) -> Result<Self> {
        let n = vectors.len();
        let p = vectors.first().map_or(0, Vec::len);
        if vectors.iter().any(|v| v.len() != p) {
            return Err(Error::invalid("all samples must have the same dimension"));
        }
        Self::from_columns(DMatrix::from_fn(p, n, |i, k| vectors[k][i]))
    }

    pub fn n(&self) -> usize {
        self.data.ncols()
    }

    pub fn p(&self) -> usize {
        self.data.nrows()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn model(&self) -> Option<&DistributionSpec> {
        self.model.as_ref()
    }

    /// `p × n`, one sample per column.
    pub fn columns(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        let p = self.p();
        &self.data.as_slice()[k * p..(k + 1) * p]
    }

    pub fn to_rows(&self) -> DMatrix<f64> {
        self.data.transpose()
    }

    pub fn scaled(&self, c: f64) -> SampleSet {
        Self {
            data: &self.data * c,
            seed: self.seed,
            model: self.model.clone(),
        }
    }
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed: the master seed xor a hash of the trial index, so trial
/// streams do not depend on execution order.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    master ^ splitmix64(index)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A model with its covariance root precomputed, for repeated draws.
#[derive(Debug, Clone)]
pub struct Sampler {
    model: DistributionSpec,
    sigma: SymMatrix,
    root: DMatrix<f64>,
}

impl Sampler {
    pub fn new(model: &DistributionSpec) -> Result<Self> {
        if let Family::StudentT { df } = model.family {
            if !(df > 4.0) {
                return Err(Error::invalid(format!(
                    "student_t df must exceed 4, got {df}"
                )));
            }
        }
        let sigma = materialize(&model.covariance)?;
        let root = psd_sqrt(&sigma)?.into_matrix();
        Ok(Self {
            model: model.clone(),
            sigma,
            root,
        })
    }

    pub fn sigma(&self) -> &SymMatrix {
        &self.sigma
    }

    pub fn model(&self) -> &DistributionSpec {
        &self.model
    }

    /// Deterministic given `(model, n, seed)`.
    pub fn draw(&self, n: usize, seed: u64) -> Result<SampleSet> {
        if n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        let p = self.sigma.dim();
        let mut rng = rng_from_seed(seed);
        let mut g = DMatrix::<f64>::zeros(p, n);
        for v in g.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        match self.model.family {
            Family::Gaussian => {}
            Family::StudentT { df } => {
                let chi = ChiSquared::new(df).map_err(|e| Error::invalid(e.to_string()))?;
                for mut col in g.column_iter_mut() {
                    let w: f64 = chi.sample(&mut rng);
                    col *= ((df - 2.0) / w).sqrt();
                }
            }
            Family::SphereBounded => {
                let scale = (p as f64).sqrt();
                for mut col in g.column_iter_mut() {
                    let norm = col.norm();
                    // a zero Gaussian vector has probability zero; map it to e₁
                    if norm == 0.0 {
                        col[0] = scale;
                    } else {
                        col *= scale / norm;
                    }
                }
            }
        }
        let data = &self.root * g;
        Ok(SampleSet {
            data,
            seed: Some(seed),
            model: Some(self.model.clone()),
        })
    }
}

pub fn draw_samples(model: &DistributionSpec, n: usize, seed: u64) -> Result<SampleSet> {
    Sampler::new(model)?.draw(n, seed)
}

/// Closed-form Gaussian `μ_{2r}`: the bound `√(r·maxᵢ σᵢᵢ)` and the exact
/// value `((2r)!/(2^r r!))^{1/(2r)} √(maxᵢ σᵢᵢ)` (Gamma form for real `r`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianMu {
    pub bound: f64,
    pub exact: f64,
}

fn max_variance(sigma: &SymMatrix) -> f64 {
    sigma
        .diagonal()
        .into_iter()
        .fold(0.0_f64, |a, v| a.max(v.abs()))
}

/// `E|Z|^k` for a standard normal `Z`.
pub fn standard_normal_abs_moment(k: f64) -> f64 {
    (0.5 * k * 2f64.ln() + libm::lgamma(0.5 * (k + 1.0)) - 0.5 * PI.ln()).exp()
}

pub fn gaussian_mu(sigma: &SymMatrix, r: f64) -> Result<GaussianMu> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::invalid(format!(
            "moment half-order r must be >= 1, got {r}"
        )));
    }
    let s = max_variance(sigma);
    Ok(GaussianMu {
        bound: (r * s).sqrt(),
        exact: standard_normal_abs_moment(2.0 * r).powf(1.0 / (2.0 * r)) * s.sqrt(),
    })
}

/// Bound-form Gaussian `μ_order = √(order/2 · maxᵢ σᵢᵢ)`, `order ≥ 2`.
pub fn gaussian_mu_at_order(sigma: &SymMatrix, order: f64) -> Result<f64> {
    Ok(gaussian_mu(sigma, order / 2.0)?.bound)
}

/// `3^{1/4} ‖Σ‖^{1/2}`, attained at the top eigenvector.
pub fn gaussian_nu(sigma: &SymMatrix) -> Result<f64> {
    Ok(3f64.powf(0.25) * spectral_norm(sigma)?.sqrt())
}

/// `(n⁻¹ Σₖ |vₖ|^r)^{1/r}`.
fn lr_norm<'a>(values: impl Iterator<Item = &'a f64>, count: usize, r: f64) -> f64 {
    let values: Vec<f64> = values.map(|v| v.abs()).collect();
    let top = values.iter().fold(0.0_f64, |a, &v| a.max(v));
    if top == 0.0 {
        return 0.0;
    }
    let mean = values.iter().map(|v| (v / top).powf(r)).sum::<f64>() / count as f64;
    top * mean.powf(1.0 / r)
}

pub fn empirical_mu(s: &SampleSet, r: f64) -> Result<f64> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::invalid(format!(
            "moment order must be >= 1, got {r}"
        )));
    }
    let n = s.n();
    Ok((0..s.p())
        .map(|i| lr_norm(s.data.row(i).iter(), n, r))
        .fold(0.0_f64, f64::max))
}

/// Lower estimate of `ν`: the largest empirical `L₄` norm of `u*x` over
/// `n_directions` random unit vectors and the sample-covariance eigenvectors.
pub fn empirical_nu(s: &SampleSet, n_directions: usize, seed: u64) -> Result<f64> {
    if n_directions < 1 {
        return Err(Error::invalid("empirical_nu needs at least one direction"));
    }
    let p = s.p();
    let n = s.n();
    let mut rng = rng_from_seed(seed);
    let mut directions: Vec<DVector<f64>> = Vec::with_capacity(n_directions + p);
    while directions.len() < n_directions {
        let g = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = g.norm();
        if norm > 0.0 {
            directions.push(g / norm);
        }
    }
    let eig = sample_covariance(s).eigen()?;
    directions.extend(eig.vectors.column_iter().map(|c| c.into_owned()));
    let mut best = 0.0_f64;
    for u in &directions {
        let proj = u.transpose() * &s.data;
        best = best.max(lr_norm(proj.iter(), n, 4.0));
    }
    Ok(best)
}

/// Subtracts the sample mean from every vector.
pub fn center_samples(s: &SampleSet) -> SampleSet {
    let mean = s.data.column_mean();
    let mut data = s.data.clone();
    for mut col in data.column_iter_mut() {
        col -= &mean;
    }
    SampleSet {
        data,
        seed: s.seed,
        model: s.model.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    Empirical,
}

/// `μ_r` at a set of orders plus `ν`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationParams {
    /// `(order, μ_order)` sorted by order.
    pub mu: Vec<(f64, f64)>,
    pub nu: f64,
    pub provenance: Provenance,
}

impl ConcentrationParams {
    pub fn new(mut mu: Vec<(f64, f64)>, nu: f64, provenance: Provenance) -> Result<Self> {
        mu.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(order, value) in &mu {
            if !(order >= 1.0) || !value.is_finite() || value < 0.0 {
                return Err(Error::invalid(format!(
                    "invalid moment entry mu_{order} = {value}"
                )));
            }
        }
        if !nu.is_finite() || nu < 0.0 {
            return Err(Error::invalid(format!(
                "nu must be finite and >= 0, got {nu}"
            )));
        }
        Ok(Self { mu, nu, provenance })
    }

    /// Bound-form Gaussian parameters at the requested orders.
    pub fn gaussian(sigma: &SymMatrix, orders: &[f64]) -> Result<Self> {
        let mu = orders
            .iter()
            .map(|&k| Ok((k, gaussian_mu_at_order(sigma, k)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(mu, gaussian_nu(sigma)?, Provenance::ClosedForm)
    }

    pub fn empirical(
        s: &SampleSet,
        orders: &[f64],
        n_directions: usize,
        seed: u64,
    ) -> Result<Self> {
        let mu = orders
            .iter()
            .map(|&k| Ok((k, empirical_mu(s, k)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            mu,
            empirical_nu(s, n_directions, seed)?,
            Provenance::Empirical,
        )
    }

    pub fn mu(&self, order: f64) -> Option<f64> {
        self.mu
            .iter()
            .find(|(k, _)| (k - order).abs() <= 1e-12 * order.max(1.0))
            .map(|&(_, v)| v)
    }
}
