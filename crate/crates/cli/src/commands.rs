use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use serde_json::json;

use maskcov::bounds::{
    banded_bias_report, gaussian_bound, main_bound, sample_complexity_banded,
    sample_complexity_classical, sample_complexity_lv, sample_complexity_masked, BoundReport,
    GaussianMode,
};
use maskcov::config::{config_hash, parse_config, resolve_seed, RunManifest, SEED_ENV};
use maskcov::estimator::{decompose_estimate, masked_estimator, sample_covariance};
use maskcov::experiments::{
    default_r_grid, random_symmetric_ensemble, run_variance_experiment, scaling_rows,
    scaling_study, verify_expected_max_lemma, verify_khintchine, verify_moment_inequality,
    verify_schur_norm_lemma, verify_symmetrization, verify_variance_lemma, KhintchineMode,
    MomentEnsemble, MomentPart,
};
use maskcov::io::{emit_csv, read_dense_matrix, read_samples, write_dense_matrix, write_samples};
use maskcov::masks::{load_mask, mask_complexity, Mask, MaskComplexity};
use maskcov::models::{ConcentrationParams, Provenance, Sampler, DEFAULT_DF};
use maskcov::{CovarianceSpec, DistributionSpec, Error, Family, Result, SampleSet, SymMatrix};

use crate::args::{
    BoundArgs, Cli, Command, CovKindArg, EstimateArgs, ExperimentAction, FamilyArg, FormulaArg,
    MaskAction, MaskArgs, MaskKindArg, ModelAction, ModelArgs, PartArg, VerifyCommand,
};
use crate::Outcome;

pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::NotSymmetric { .. } => "not_symmetric",
        Error::NonFinite { .. } => "non_finite",
        Error::NotPsd { .. } => "not_psd",
        Error::EigenFailure { .. } => "eigen_failure",
        Error::InvalidParameter(_) => "invalid_parameter",
        Error::Parse { .. } => "parse",
        Error::Config(_) => "config",
        Error::Io { .. } => "io",
        Error::Csv(_) => "csv",
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("reports serialize")
    );
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn argv_hash() -> u64 {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    config_hash(&json!(argv))
}

fn write_manifest(
    command: &str,
    hash: u64,
    seed: Option<u64>,
    started: String,
    outputs: &[&Path],
) -> Result<()> {
    let primary = outputs.first().expect("at least one output");
    RunManifest {
        command: command.to_string(),
        config_hash: RunManifest::hash_hex(hash),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        started,
        finished: now(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    }
    .write(manifest_path(primary))
}

fn require<T>(v: Option<T>, flag: &str, context: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidParameter(format!("{context} needs --{flag}")))
}

fn covariance_spec(m: &ModelArgs) -> Result<CovarianceSpec> {
    if let Some(path) = &m.sigma {
        return CovarianceSpec::custom(read_dense_matrix(path)?);
    }
    let kind = require(m.covariance, "covariance (or --sigma)", "the model")?;
    let p = require(m.p, "p", "a built-in covariance")?;
    match kind {
        CovKindArg::Identity => CovarianceSpec::identity(p),
        CovKindArg::Ar1 => CovarianceSpec::ar1(p, require(m.rho, "rho", "ar1")?),
        CovKindArg::Decaying => CovarianceSpec::decaying(p, require(m.alpha, "alpha", "decaying")?),
        CovKindArg::RankOnePlus => CovarianceSpec::rank_one_plus(
            p,
            require(m.lambda, "lambda", "rank_one_plus")?,
            require(m.delta, "delta", "rank_one_plus")?,
        ),
    }
}

fn distribution(m: &ModelArgs) -> Result<DistributionSpec> {
    let family = match m.family {
        FamilyArg::Gaussian => Family::Gaussian,
        FamilyArg::SphereBounded => Family::SphereBounded,
        FamilyArg::StudentT => Family::StudentT {
            df: m.df.unwrap_or(DEFAULT_DF),
        },
    };
    if m.df.is_some() && !matches!(family, Family::StudentT { .. }) {
        return Err(Error::InvalidParameter(
            "--df applies only to --family student_t".into(),
        ));
    }
    DistributionSpec::new(covariance_spec(m)?, family)
}

fn built_in_mask(kind: MaskKindArg, p: usize, bandwidth: Option<usize>) -> Result<Mask> {
    match kind {
        MaskKindArg::Banded => Mask::banded(p, require(bandwidth, "bandwidth", "a banded mask")?),
        MaskKindArg::Tapered => {
            Mask::tapered(p, require(bandwidth, "bandwidth", "a tapered mask")?)
        }
        MaskKindArg::AllOnes => Mask::all_ones(p),
    }
}

fn report_range_warnings(mask: &Mask) {
    for w in mask.range_warnings() {
        eprintln!("warning: {w}");
    }
}

fn load_mask_file(path: &Path) -> Result<Mask> {
    let loaded = load_mask(path)?;
    for w in &loaded.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(loaded.mask)
}

fn mask_from(args: &MaskArgs, p: usize) -> Result<Mask> {
    let mask = match (&args.mask, args.mask_kind) {
        (Some(path), _) => load_mask_file(path)?,
        (None, Some(kind)) => built_in_mask(kind, p, args.bandwidth)?,
        (None, None) => {
            return Err(Error::InvalidParameter(
                "a mask needs --mask FILE or --mask-kind".into(),
            ));
        }
    };
    if mask.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: mask.dim(),
        });
    }
    Ok(mask)
}

fn verdict<T: Serialize>(report: &T, holds: bool, what: &str) -> Outcome {
    print_json(report);
    if holds {
        Outcome::Ok
    } else {
        Outcome::VerificationFailed(format!("{what} violated beyond the allowed slack"))
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Mask {
            action:
                MaskAction::Gen {
                    kind,
                    p,
                    bandwidth,
                    out,
                },
        } => {
            let started = now();
            let mask = built_in_mask(kind, p, bandwidth)?;
            write_dense_matrix(&out, mask.matrix())?;
            write_manifest("mask gen", argv_hash(), None, started, &[&out])?;
            print_json(
                &json!({ "kind": mask.kind(), "p": p, "complexity": mask_complexity(&mask)? }),
            );
            Ok(Outcome::Ok)
        }
        Command::Model {
            action:
                ModelAction::Gen {
                    model,
                    n,
                    seed,
                    out,
                    sigma_out,
                },
        } => {
            let started = now();
            let env = std::env::var(SEED_ENV).ok();
            let seed = resolve_seed(0, env.as_deref(), seed)?;
            let sampler = Sampler::new(&distribution(&model)?)?;
            let samples = sampler.draw(n, seed)?;
            write_samples(&out, &samples.to_rows())?;
            let mut outputs: Vec<&Path> = vec![&out];
            if let Some(path) = &sigma_out {
                write_dense_matrix(path, sampler.sigma())?;
                outputs.push(path);
            }
            write_manifest("model gen", argv_hash(), Some(seed), started, &outputs)?;
            Ok(Outcome::Ok)
        }
        Command::Estimate(a) => estimate(a),
        Command::Bound(a) => {
            print_json(&bound(&a)?);
            Ok(Outcome::Ok)
        }
        Command::Experiment {
            action: ExperimentAction::Run { config, out, seed },
        } => experiment(&config, &out, seed),
        Command::Verify { check } => verify(check),
    }
}

fn estimate(a: EstimateArgs) -> Result<Outcome> {
    let started = now();
    let mask = load_mask_file(&a.mask)?;
    let samples = SampleSet::from_rows(&read_samples(&a.samples)?)?;
    let est = masked_estimator(&mask, &samples, a.centered)?;
    write_dense_matrix(&a.out, &est)?;
    write_manifest("estimate", argv_hash(), None, started, &[&a.out])?;
    match &a.sigma {
        Some(path) => {
            let sigma = read_dense_matrix(path)?;
            let cov = if a.centered {
                sample_covariance(&maskcov::models::center_samples(&samples))
            } else {
                sample_covariance(&samples)
            };
            print_json(&decompose_estimate(&mask, &sigma, &cov)?);
        }
        None => eprintln!("note: bias not reported because --sigma was not given"),
    }
    Ok(Outcome::Ok)
}

fn bound(a: &BoundArgs) -> Result<BoundReport> {
    let eps = || require(a.eps, "eps", "this formula");
    match a.formula {
        FormulaArg::Main => {
            let mc = MaskComplexity {
                col_norm_sq: require(a.col_norm_sq, "col-norm-sq", "main")?,
                spec_norm: require(a.spec_norm, "spec-norm", "main")?,
            };
            let cp = ConcentrationParams::new(
                vec![(4.0, require(a.mu4, "mu4", "main")?)],
                require(a.nu, "nu", "main")?,
                Provenance::Empirical,
            )?;
            main_bound(
                &mc,
                &cp,
                require(a.emax_sq_root, "emax-sq-root", "main")?,
                require(a.n, "n", "main")?,
                require(a.model.p, "p", "main")?,
            )
        }
        FormulaArg::Gaussian => {
            let sigma = maskcov::models::materialize(&covariance_spec(&a.model)?)?;
            let mask = mask_from(&a.mask, sigma.dim())?;
            let mode = if a.shape {
                GaussianMode::Shape { c: a.c }
            } else {
                GaussianMode::Explicit
            };
            gaussian_bound(&mask, &sigma, require(a.n, "n", "gaussian")?, mode)
        }
        FormulaArg::ComplexityMasked => {
            let sigma = maskcov::models::materialize(&covariance_spec(&a.model)?)?;
            let mask = mask_from(&a.mask, sigma.dim())?;
            sample_complexity_masked(&mask, &sigma, eps()?, a.c)
        }
        FormulaArg::ComplexityBanded => {
            let p = match (a.p_real, a.model.p) {
                (Some(p), _) => p,
                (None, Some(p)) => p as f64,
                (None, None) => {
                    return Err(Error::InvalidParameter(
                        "complexity-banded needs --p".into(),
                    ))
                }
            };
            sample_complexity_banded(
                require(a.big_b, "B", "complexity-banded")?,
                p,
                a.ratio.unwrap_or(1.0),
                eps()?,
                a.c,
            )
        }
        FormulaArg::ComplexityLv => {
            let p = require(a.model.p, "p", "complexity-lv")?;
            let mask = mask_from(&a.mask, p)?;
            report_range_warnings(&mask);
            sample_complexity_lv(&mask, eps()?, a.c)
        }
        FormulaArg::Classical => {
            sample_complexity_classical(require(a.model.p, "p", "classical")?, eps()?, a.c)
        }
        FormulaArg::BiasBanded => banded_bias_report(
            require(a.model.alpha, "alpha", "bias-banded")?,
            require(a.b, "b", "bias-banded")?,
        ),
    }
}

fn experiment(config: &Path, out: &Path, seed_flag: Option<u64>) -> Result<Outcome> {
    let started = now();
    let mut parsed = parse_config(config)?;
    let env = std::env::var(SEED_ENV).ok();
    parsed.experiment.seed = resolve_seed(parsed.experiment.seed, env.as_deref(), seed_flag)?;
    let cfg = &parsed.experiment;
    let (rows, summary) = match &parsed.scaling {
        Some(s) => {
            let study = scaling_study(cfg, s.axis, &s.values)?;
            let summary: Vec<_> = study
                .iter()
                .map(|r| {
                    json!({
                        "axis_value": r.axis_value,
                        "empirical_rms": r.result.empirical_rms,
                        "theoretical_total": r.result.theoretical.total,
                        "ratio": r.result.ratio,
                    })
                })
                .collect();
            (
                scaling_rows(&study),
                json!({ "axis": s.axis, "rows": summary }),
            )
        }
        None => {
            let result = run_variance_experiment(cfg)?;
            let summary = json!({
                "empirical_rms": result.empirical_rms,
                "std_error": result.std_error,
                "theoretical": result.theoretical,
                "ratio": result.ratio,
                "metadata": result.metadata,
            });
            (vec![result.to_row(cfg.n as f64)], summary)
        }
    };
    emit_csv(&rows, out)?;
    write_manifest(
        "experiment run",
        parsed.hash,
        Some(cfg.seed),
        started,
        &[out],
    )?;
    print_json(&summary);
    Ok(Outcome::Ok)
}

fn read_matrices(paths: &[PathBuf]) -> Result<Vec<SymMatrix>> {
    paths.iter().map(read_dense_matrix).collect()
}

fn verify(check: VerifyCommand) -> Result<Outcome> {
    match check {
        VerifyCommand::VarianceLemma {
            model,
            mask,
            trials,
            seed,
        } => {
            let model = distribution(&model)?;
            let mask = mask_from(&mask, model.dim())?;
            let r = verify_variance_lemma(&model, &mask, trials, seed)?;
            Ok(verdict(&r, r.holds, "variance lemma"))
        }
        VerifyCommand::SchurLemma { p, trials, seed } => {
            let r = verify_schur_norm_lemma(trials, p, seed)?;
            Ok(verdict(&r, r.holds, "Schur product norm bound"))
        }
        VerifyCommand::ExpectedMax {
            model,
            n,
            trials,
            r_grid,
            seed,
        } => {
            let model = distribution(&model)?;
            let grid = r_grid.unwrap_or_else(default_r_grid);
            let r = verify_expected_max_lemma(&model, n, trials, &grid, seed)?;
            Ok(verdict(&r, r.holds, "expected maximum bound"))
        }
        VerifyCommand::Symmetrization {
            model,
            mask,
            n,
            trials,
            seed,
        } => {
            let model = distribution(&model)?;
            let mask = mask_from(&mask, model.dim())?;
            let r = verify_symmetrization(&model, &mask, n, trials, seed)?;
            Ok(verdict(&r, r.holds, "symmetrization inequality"))
        }
        VerifyCommand::Khintchine {
            matrices,
            k,
            p,
            r,
            exact,
            trials,
            seed,
        } => {
            let mats = if matrices.is_empty() {
                random_symmetric_ensemble(
                    require(k, "k", "random summands")?,
                    require(p, "p", "random summands")?,
                    seed,
                )?
            } else {
                read_matrices(&matrices)?
            };
            let mode = if exact {
                KhintchineMode::Exact
            } else {
                KhintchineMode::MonteCarlo { trials, seed }
            };
            let rep = verify_khintchine(&mats, r, mode)?;
            Ok(verdict(&rep, rep.holds, "matrix Khintchine inequality"))
        }
        VerifyCommand::MomentInequality {
            part,
            matrices,
            model,
            mask,
            k,
            q,
            trials,
            seed,
        } => {
            let ensemble = if matrices.is_empty() {
                let model = distribution(&model)?;
                let mask = mask_from(&mask, model.dim())?;
                MomentEnsemble::RankOne {
                    model,
                    mask,
                    scales: vec![1.0; require(k, "k", "rank-one summands")?],
                }
            } else {
                MomentEnsemble::Fixed {
                    matrices: read_matrices(&matrices)?,
                }
            };
            let part = match part {
                PartArg::Psd => MomentPart::Psd,
                PartArg::Selfadj => MomentPart::SelfAdj,
            };
            let rep = verify_moment_inequality(&ensemble, q, part, trials, seed)?;
            Ok(verdict(&rep, rep.holds, "matrix moment inequality"))
        }
    }
}
