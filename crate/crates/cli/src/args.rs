use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "maskcov",
    version,
    about = "Masked covariance estimation, bounds and Monte Carlo checks"
)]
pub struct Cli {
    /// Worker threads for Monte Carlo trials (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mask construction.
    Mask {
        #[command(subcommand)]
        action: MaskAction,
    },
    /// Covariance models and sampling.
    Model {
        #[command(subcommand)]
        action: ModelAction,
    },
    /// Masked estimate from a samples file.
    Estimate(EstimateArgs),
    /// Evaluate a closed-form bound and print it as JSON.
    Bound(BoundArgs),
    /// Monte Carlo experiments.
    Experiment {
        #[command(subcommand)]
        action: ExperimentAction,
    },
    /// Empirical checks of the lemmas and matrix inequalities.
    Verify {
        #[command(subcommand)]
        check: VerifyCommand,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum MaskKindArg {
    Banded,
    AllOnes,
    Tapered,
}

#[derive(Debug, Subcommand)]
pub enum MaskAction {
    /// Write a mask in the dense matrix format.
    Gen {
        #[arg(long, value_enum)]
        kind: MaskKindArg,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        bandwidth: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum CovKindArg {
    Identity,
    Ar1,
    Decaying,
    RankOnePlus,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum FamilyArg {
    Gaussian,
    StudentT,
    SphereBounded,
}

/// A population model: a built-in covariance or a `--sigma` file.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub covariance: Option<CovKindArg>,
    /// Dimension for built-in covariances.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Covariance matrix file (dense matrix format).
    #[arg(long, conflicts_with = "covariance")]
    pub sigma: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub family: FamilyArg,
    #[arg(long)]
    pub df: Option<f64>,
}

/// A mask: a file or a built-in kind at the model dimension.
#[derive(Debug, Clone, Args)]
pub struct MaskArgs {
    /// Mask file (dense matrix format).
    #[arg(long, conflicts_with = "mask_kind")]
    pub mask: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mask_kind: Option<MaskKindArg>,
    #[arg(long)]
    pub bandwidth: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum ModelAction {
    /// Draw samples and write them in the samples format.
    Gen {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the population covariance.
        #[arg(long)]
        sigma_out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub centered: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// True covariance; enables the bias/variance report.
    #[arg(long)]
    pub sigma: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
#[value(rename_all = "kebab-case")]
pub enum FormulaArg {
    Main,
    Gaussian,
    ComplexityMasked,
    ComplexityBanded,
    ComplexityLv,
    Classical,
    BiasBanded,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long, value_enum)]
    pub formula: FormulaArg,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub mask: MaskArgs,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Absolute constant for the formulas that leave it unspecified.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// `gaussian`: evaluate the shape bound with constant `--c` instead of
    /// the explicit-constant chain.
    #[arg(long)]
    pub shape: bool,
    #[arg(long = "B")]
    pub big_b: Option<f64>,
    /// Real-valued dimension for `complexity-banded`.
    #[arg(long = "p-real")]
    pub p_real: Option<f64>,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long)]
    pub col_norm_sq: Option<f64>,
    #[arg(long)]
    pub spec_norm: Option<f64>,
    #[arg(long)]
    pub mu4: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub emax_sq_root: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentAction {
    /// Run the experiment (or scaling study) in a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
#[value(rename_all = "snake_case")]
pub enum PartArg {
    Psd,
    Selfadj,
}

#[derive(Debug, Subcommand)]
pub enum VerifyCommand {
    /// Second-moment bound on a single masked rank-one term (Gaussian models).
    VarianceLemma {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mask: MaskArgs,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// ‖M⊙xx*‖ ≤ ‖M‖·‖x‖∞² on random symmetric M and Gaussian x.
    SchurLemma {
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Expected maximum of ‖xᵢ‖∞⁴ against its moment bound.
    ExpectedMax {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Comma-separated orders r ≥ 1.
        #[arg(long, value_delimiter = ',')]
        r_grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Centered sum against twice its Rademacher-symmetrized version.
    Symmetrization {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mask: MaskArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Matrix Khintchine inequality in Schatten r-norm.
    Khintchine {
        /// Summand files; without them, `--k` random symmetric `--p`×`--p` matrices.
        #[arg(long, num_args = 1..)]
        matrices: Vec<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        r: f64,
        /// Enumerate every sign pattern instead of sampling.
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Moment inequality for sums of independent random matrices.
    MomentInequality {
        #[arg(long, value_enum)]
        part: PartArg,
        /// Fixed summand files; otherwise rank-one summands from the model and mask.
        #[arg(long, num_args = 1..)]
        matrices: Vec<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mask: MaskArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}
