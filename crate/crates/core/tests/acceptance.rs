//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed. A criterion also fails when it overruns its
//! runtime budget.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use maskcov::bounds::{
    banded_bias_bound, gaussian_bound, sample_complexity_banded, sample_complexity_lv_from_metrics,
    GaussianMode,
};
use maskcov::experiments::{
    loglog_slope, random_symmetric_ensemble, run_variance_experiment, scaling_rows, scaling_study,
    verify_khintchine, verify_moment_inequality, verify_schur_norm_lemma, verify_variance_lemma,
    Axis, ExperimentConfig, KhintchineMode, MomentEnsemble, MomentPart,
};
use maskcov::io::format_csv;
use maskcov::masks::Mask;
use maskcov::matrix::{schur_product, spectral_norm, SymMatrix};
use maskcov::models::{
    derive_seed, materialize, rng_from_seed, CovarianceSpec, DistributionSpec, Family,
};
use maskcov::MaskComplexity;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

const MC_SLACK_SE: f64 = 3.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Check = fn() -> maskcov::Result<Outcome>;

fn gaussian(spec: CovarianceSpec) -> DistributionSpec {
    DistributionSpec::gaussian(spec)
}

fn c1_schur_identity() -> maskcov::Result<Outcome> {
    let mut worst = 0.0_f64;
    let mut failures = 0;
    for t in 0..10_000u64 {
        let mut rng = rng_from_seed(derive_seed(101, t));
        let p = rng.random_range(1..=64usize);
        let raw = DMatrix::<f64>::from_fn(p, p, |_, _| rng.sample(StandardNormal));
        let m = SymMatrix::new((&raw + raw.transpose()) * 0.5)?;
        let x: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let hadamard = schur_product(&m, &SymMatrix::outer(&x)?)?;
        let congruence = m.congruence_by_diagonal(&x)?;
        let diff = (hadamard.as_matrix() - congruence.as_matrix()).amax();
        worst = worst.max(diff);
        if diff > 1e-12 {
            failures += 1;
        }
    }
    Ok(outcome(
        failures == 0,
        format!("10000 pairs, max entrywise diff {worst:.2e}"),
    ))
}

fn c2_schur_norm_lemma() -> maskcov::Result<Outcome> {
    let r = verify_schur_norm_lemma(10_000, 32, 202)?;
    Ok(outcome(
        r.violations == 0,
        format!("{} violations, max ratio {:.6}", r.violations, r.max_ratio),
    ))
}

fn c3_khintchine_exact() -> maskcov::Result<Outcome> {
    let mut failures = 0;
    let mut worst = 0.0_f64;
    for e in 0..50u64 {
        let k = 2 + (e as usize % 11);
        let p = 2 + (e as usize % 5);
        let matrices = random_symmetric_ensemble(k, p, derive_seed(303, e))?;
        for r in [2.0, 4.0, 8.0] {
            let rep = verify_khintchine(&matrices, r, KhintchineMode::Exact)?;
            worst = worst.max(rep.lhs / rep.rhs);
            if !rep.holds || rep.lhs > rep.rhs {
                failures += 1;
            }
        }
    }
    Ok(outcome(
        failures == 0,
        format!("150 cases, {failures} failures, max lhs/rhs {worst:.4}"),
    ))
}

fn c4_variance_lemma() -> maskcov::Result<Outcome> {
    let p = 8;
    let models = [
        CovarianceSpec::identity(p)?,
        CovarianceSpec::ar1(p, 0.7)?,
        CovarianceSpec::rank_one_plus(p, 3.0, 0.5)?,
        CovarianceSpec::decaying(p, 2.0)?,
    ];
    let masks = [
        Mask::banded(p, 3)?,
        Mask::tapered(p, 5)?,
        Mask::all_ones(p)?,
    ];
    let mut failures = 0;
    let mut worst_se = f64::NEG_INFINITY;
    for (i, spec) in models.iter().enumerate() {
        for (j, mask) in masks.iter().enumerate() {
            let r = verify_variance_lemma(
                &gaussian(spec.clone()),
                mask,
                10_000,
                derive_seed(404, (i * 10 + j) as u64),
            )?;
            if r.std_error > 0.0 {
                worst_se = worst_se.max(r.max_violation / r.std_error);
            }
            if !r.holds {
                failures += 1;
            }
        }
    }
    Ok(outcome(
        failures == 0,
        format!("12 cases, {failures} failures, largest excess {worst_se:.2} SE"),
    ))
}

fn c5_main_theorem() -> maskcov::Result<Outcome> {
    let mut failures = 0;
    let mut worst = 0.0_f64;
    let mut case = 0u64;
    for p in [16, 64] {
        for mask in [Mask::banded(p, 5)?, Mask::banded(p, 1)?, Mask::all_ones(p)?] {
            for n in [128, 1024] {
                let cfg = ExperimentConfig {
                    model: gaussian(CovarianceSpec::ar1(p, 0.5)?),
                    mask: mask.clone(),
                    n,
                    trials: 100,
                    seed: derive_seed(505, case),
                    centered: false,
                    epsilon: None,
                };
                case += 1;
                let r = run_variance_experiment(&cfg)?;
                worst = worst.max(r.empirical_rms / r.theoretical.total);
                if r.empirical_rms > r.theoretical.total + MC_SLACK_SE * r.std_error {
                    failures += 1;
                }
            }
        }
    }
    Ok(outcome(
        failures == 0,
        format!("12 configs, {failures} failures, max rms/bound {worst:.4}"),
    ))
}

fn c6_n_scaling() -> maskcov::Result<Outcome> {
    let p = 64;
    let base = ExperimentConfig {
        model: gaussian(CovarianceSpec::ar1(p, 0.5)?),
        mask: Mask::banded(p, 5)?,
        n: 128,
        trials: 50,
        seed: 606,
        centered: false,
        epsilon: None,
    };
    let ns: Vec<f64> = (7..=13).map(|k| (1u64 << k) as f64).collect();
    let rows = scaling_study(&base, Axis::N, &ns)?;
    let rms: Vec<f64> = rows.iter().map(|r| r.result.empirical_rms).collect();
    let slope = loglog_slope(&ns, &rms)?;
    Ok(outcome(
        (-0.6..=-0.4).contains(&slope),
        format!("slope {slope:.4}"),
    ))
}

fn c7_banded_bias() -> maskcov::Result<Outcome> {
    let alpha = 2.0;
    let p = 512;
    let sigma = materialize(&CovarianceSpec::decaying(p, alpha)?)?;
    let mut failures = 0;
    let mut parts = Vec::new();
    for b in [1usize, 2, 4, 8, 16] {
        let mask = Mask::banded(p, 2 * b + 1)?;
        let bias = spectral_norm(&schur_product(mask.matrix(), &sigma)?.sub(&sigma)?)?;
        let bound = banded_bias_bound(alpha, b)?.bias;
        if bias > bound {
            failures += 1;
        }
        parts.push(format!("b={b}: {bias:.4}<={bound:.4}"));
    }
    Ok(outcome(failures == 0, parts.join(", ")))
}

fn c8_log_factor() -> maskcov::Result<Outcome> {
    let mut failures = 0;
    let mut cases = 0;
    for p in [8usize, 64, 512] {
        for bandwidth in [3usize, 9] {
            let b = bandwidth as f64;
            let mc = MaskComplexity {
                col_norm_sq: b,
                spec_norm: b,
            };
            for eps in [0.1, 0.5] {
                cases += 1;
                let ours = sample_complexity_banded(b, p as f64, 1.0, eps, 1.0)?.samples();
                let earlier = sample_complexity_lv_from_metrics(&mc, p as f64, eps, 1.0)?.samples();
                if earlier < ours {
                    failures += 1;
                }
            }
        }
    }
    Ok(outcome(
        failures == 0,
        format!("{cases} cases, {failures} failures"),
    ))
}

fn c9_correlation_effect() -> maskcov::Result<Outcome> {
    let p = 64;
    let n = 256;
    let mask = Mask::banded(p, 5)?;
    let correlated = CovarianceSpec::rank_one_plus(p, 0.9, 0.1)?;
    let white = CovarianceSpec::identity(p)?;
    let norms = (
        spectral_norm(&materialize(&correlated)?)?,
        spectral_norm(&materialize(&white)?)?,
    );
    let run = |spec: &CovarianceSpec| {
        run_variance_experiment(&ExperimentConfig {
            model: gaussian(spec.clone()),
            mask: mask.clone(),
            n,
            trials: 100,
            seed: 909,
            centered: false,
            epsilon: None,
        })
    };
    let c = run(&correlated)?;
    let w = run(&white)?;
    let bound_c =
        gaussian_bound(&mask, &materialize(&correlated)?, n, GaussianMode::Explicit)?.total;
    let bound_w = gaussian_bound(&mask, &materialize(&white)?, n, GaussianMode::Explicit)?.total;
    let matched = (norms.0 - norms.1).abs() <= 1e-12;
    let se = c.std_error.hypot(w.std_error);
    let pass =
        matched && bound_c < bound_w && c.empirical_rms <= w.empirical_rms + MC_SLACK_SE * se;
    Ok(outcome(
        pass,
        format!(
            "bound {bound_c:.4} vs {bound_w:.4}, rms {:.4} vs {:.4} (se {se:.4})",
            c.empirical_rms, w.empirical_rms
        ),
    ))
}

fn c10_moment_inequality() -> maskcov::Result<Outcome> {
    let p = 8;
    let k = 32;
    let mut failures = 0;
    let mut worst = 0.0_f64;
    for e in 0..20u64 {
        let mut rng = rng_from_seed(derive_seed(1010, e));
        let spec = match e % 4 {
            0 => CovarianceSpec::identity(p)?,
            1 => CovarianceSpec::ar1(p, rng.random_range(-0.9..0.9))?,
            2 => CovarianceSpec::rank_one_plus(
                p,
                rng.random_range(0.5..4.0),
                rng.random_range(0.1..1.0),
            )?,
            _ => CovarianceSpec::decaying(p, rng.random_range(1.5..3.0))?,
        };
        let mask = match e % 3 {
            0 => Mask::all_ones(p)?,
            1 => Mask::tapered(p, [3, 5, 7, 9][rng.random_range(0..4)])?,
            _ => Mask::banded(p, 1)?,
        };
        let family = if e % 2 == 0 {
            Family::Gaussian
        } else {
            Family::StudentT { df: 9.0 }
        };
        let scales: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..2.0)).collect();
        let ensemble = MomentEnsemble::RankOne {
            model: DistributionSpec::new(spec, family)?,
            mask,
            scales,
        };
        for (i, part) in [MomentPart::Psd, MomentPart::SelfAdj]
            .into_iter()
            .enumerate()
        {
            let r = verify_moment_inequality(
                &ensemble,
                2.0,
                part,
                2000,
                derive_seed(1011, 2 * e + i as u64),
            )?;
            worst = worst.max(r.lhs / r.rhs);
            if !r.holds {
                failures += 1;
            }
        }
    }
    Ok(outcome(
        failures == 0,
        format!("40 checks, {failures} failures, max lhs/rhs {worst:.4}"),
    ))
}

fn csv_bytes_with_threads(threads: usize) -> maskcov::Result<Vec<Vec<u8>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| maskcov::Error::InvalidParameter(e.to_string()))?;
    pool.install(|| {
        let p = 16;
        let bases = [
            ExperimentConfig {
                model: gaussian(CovarianceSpec::ar1(p, 0.6)?),
                mask: Mask::banded(p, 5)?,
                n: 64,
                trials: 40,
                seed: 1111,
                centered: false,
                epsilon: Some(0.5),
            },
            ExperimentConfig {
                model: DistributionSpec::new(
                    CovarianceSpec::decaying(p, 2.0)?,
                    Family::StudentT { df: 9.0 },
                )?,
                mask: Mask::tapered(p, 7)?,
                n: 32,
                trials: 40,
                seed: 1112,
                centered: true,
                epsilon: None,
            },
            ExperimentConfig {
                model: DistributionSpec::new(CovarianceSpec::identity(p)?, Family::SphereBounded)?,
                mask: Mask::all_ones(p)?,
                n: 48,
                trials: 40,
                seed: 1113,
                centered: false,
                epsilon: None,
            },
        ];
        let mut out = Vec::new();
        for base in &bases {
            let rows = scaling_study(base, Axis::N, &[32.0, 64.0, 128.0])?;
            out.push(format_csv(&scaling_rows(&rows))?);
            if base.mask.bandwidth().is_some() {
                let rows = scaling_study(base, Axis::Bandwidth, &[1.0, 3.0, 9.0])?;
                out.push(format_csv(&scaling_rows(&rows))?);
            }
            let rows = scaling_study(base, Axis::P, &[8.0, 12.0])?;
            out.push(format_csv(&scaling_rows(&rows))?);
        }
        Ok(out)
    })
}

fn c11_reproducibility() -> maskcov::Result<Outcome> {
    let serial = csv_bytes_with_threads(1)?;
    let parallel = csv_bytes_with_threads(4)?;
    let rerun = csv_bytes_with_threads(4)?;
    let identical = serial == parallel && parallel == rerun;
    Ok(outcome(
        identical,
        format!("{} CSVs compared across 1 and 4 threads", serial.len()),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, Check); 11] = [
        (
            "1 schur identity",
            Duration::from_secs(10),
            c1_schur_identity,
        ),
        (
            "2 schur norm lemma",
            Duration::from_secs(30),
            c2_schur_norm_lemma,
        ),
        (
            "3 khintchine exact",
            Duration::from_secs(120),
            c3_khintchine_exact,
        ),
        (
            "4 variance lemma",
            Duration::from_secs(60),
            c4_variance_lemma,
        ),
        (
            "5 main bound domination",
            Duration::from_secs(300),
            c5_main_theorem,
        ),
        ("6 n-scaling slope", Duration::from_secs(300), c6_n_scaling),
        ("7 banded bias", Duration::from_secs(60), c7_banded_bias),
        (
            "8 log-factor improvement",
            Duration::from_secs(1),
            c8_log_factor,
        ),
        (
            "9 correlation effect",
            Duration::from_secs(120),
            c9_correlation_effect,
        ),
        (
            "10 moment inequality",
            Duration::from_secs(180),
            c10_moment_inequality,
        ),
        (
            "11 reproducibility",
            Duration::from_secs(60),
            c11_reproducibility,
        ),
    ];
    let mut all = true;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = elapsed <= budget;
        let verdict = if pass && in_time { "PASS" } else { "FAIL" };
        let timing = if in_time {
            String::new()
        } else {
            format!(" over budget {budget:?}")
        };
        println!(
            "{verdict} criterion {name}: {detail} [{:.2}s{timing}]",
            elapsed.as_secs_f64()
        );
        all &= pass && in_time;
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
