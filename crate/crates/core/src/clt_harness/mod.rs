//! Seeded Monte Carlo experiments for mesoscopic linear statistics.

mod config;
mod stats;
mod summary;

pub use config::{DiagnoseConfig, ExperimentConfig, GridConfig, MeasureSpec, Tolerances, ValidatedExperiment};
pub use stats::{
    kolmogorov_survival, ks_normality, ks_two_sample, mean, normal_cdf, normal_quantile, sample_variance,
    standardize, KsResult, KS_MIN_SAMPLES,
};
pub use summary::{
    load_summary, persist_summary, write_atomic, CharPoint, DiagnosticsSummary, Estimate, ExperimentSummary,
    Quantiles, SummaryFlags, SCHEMA_VERSION,
};

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::random_matrix::{self, FreeSumSample, LocalLawReport};
use crate::subordination;
use crate::variance_kernel::{self, TestFunction};

/// `Σ_i g((λ_i − E₀)/η₀)`
pub fn linear_statistic(sample: &FreeSumSample, tf: &TestFunction) -> f64 {
    sample
        .eigenvalues
        .iter()
        .map(|&l| tf.g((l - tf.e0) / tf.eta0))
        .sum()
}

/// Moments, normality test and characteristic function of centred statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub mean: Estimate,
    pub variance: Estimate,
    pub ks: Option<KsResult>,
    pub char_function: Vec<CharPoint>,
}

pub fn reduce(centred: &[f64], lambda_grid: &[f64], predicted_variance: f64) -> Reduction {
    let m = centred.len();
    let mf = m as f64;
    let avg = mean(centred);
    let var = sample_variance(centred);
    let sd = var.sqrt();
    let ks = if m >= KS_MIN_SAMPLES {
        standardize(centred).ok().and_then(|z| ks_normality(&z).ok())
    } else {
        None
    };
    let char_function = lambda_grid
        .iter()
        .map(|&lambda| {
            let (mut c, mut s) = (0.0, 0.0);
            let mut cc = Vec::with_capacity(m);
            for &x in centred {
                let (si, ci) = (lambda * (x - avg)).sin_cos();
                c += ci;
                s += si;
                cc.push((ci, si));
            }
            let (c, s) = (c / mf, s / mf);
            let se = (m > 1).then(|| {
                let vc: f64 = cc.iter().map(|p| (p.0 - c).powi(2)).sum::<f64>() / (mf - 1.0);
                let vs: f64 = cc.iter().map(|p| (p.1 - s).powi(2)).sum::<f64>() / (mf - 1.0);
                ((vc + vs) / mf).sqrt()
            });
            CharPoint {
                lambda,
                empirical: Complex64::new(c, s),
                se,
                predicted: variance_kernel::predicted_char_function(predicted_variance, lambda),
            }
        })
        .collect();
    Reduction {
        mean: Estimate {
            value: avg,
            se: (m > 1).then(|| sd / mf.sqrt()),
        },
        variance: Estimate {
            value: var,
            se: (m > 1).then(|| var * (2.0 / (mf - 1.0)).sqrt()),
        },
        ks,
        char_function,
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {workers} workers: {e}")))
}

/// Deterministic predictions for a validated experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Predictions {
    pub centering: f64,
    pub predicted_variance: f64,
    pub universal_variance: f64,
}

pub fn predictions(exp: &ValidatedExperiment) -> Result<Predictions> {
    let cfg = &exp.config;
    Ok(Predictions {
        centering: variance_kernel::expected_statistic(
            &exp.test_function,
            &exp.mu_a,
            &exp.mu_b,
            cfg.n,
            cfg.tolerances.eta_probe,
        )?,
        predicted_variance: variance_kernel::contour_variance(
            &exp.test_function,
            &exp.contour,
            &exp.mu_a,
            &exp.mu_b,
            cfg.beta,
        )?,
        universal_variance: variance_kernel::universal_variance(&exp.test_function.shape, cfg.beta)?,
    })
}

/// Raw output of the sampling stage, in sample order.
pub struct SampleOutput {
    pub statistics: Vec<f64>,
    pub reports: Vec<LocalLawReport>,
    pub samples: Vec<FreeSumSample>,
}

/// Builds every sample of the experiment; `keep` retains the samples themselves.
pub fn draw_samples(exp: &ValidatedExperiment, keep: bool) -> Result<SampleOutput> {
    let cfg = &exp.config;
    faer::set_global_parallelism(faer::Par::Seq);
    let a = exp.mu_a.atoms().to_vec();
    let b = exp.mu_b.atoms().to_vec();
    let state = if cfg.diagnostics {
        Some(subordination::solve(
            &exp.mu_a,
            &exp.mu_b,
            Complex64::new(cfg.e0, exp.eta0()),
            &cfg.tolerances.solver(),
        )?)
    } else {
        None
    };
    let results: Vec<Result<(f64, Option<LocalLawReport>, Option<FreeSumSample>)>> = pool(cfg.workers)?.install(|| {
        (0..cfg.n_samples)
            .into_par_iter()
            .map(|k| {
                let seed = random_matrix::sample_seed(cfg.master_seed, k as u64);
                let wrap = |e: Error| Error::InSample {
                    index: k,
                    source: Box::new(e),
                };
                let mut sample = random_matrix::build_sample(&a, &b, cfg.beta, seed, cfg.diagnostics).map_err(wrap)?;
                let stat = linear_statistic(&sample, &exp.test_function);
                let report = match &state {
                    Some(s) => Some(random_matrix::green_diagnostics(&sample, s).map_err(wrap)?),
                    None => None,
                };
                sample.conjugator = None;
                Ok((stat, report, keep.then_some(sample)))
            })
            .collect()
    });
    let mut out = SampleOutput {
        statistics: Vec::with_capacity(cfg.n_samples),
        reports: Vec::new(),
        samples: Vec::new(),
    };
    for r in results {
        let (stat, report, sample) = r?;
        out.statistics.push(stat);
        out.reports.extend(report);
        out.samples.extend(sample);
    }
    Ok(out)
}

pub fn assemble_summary(exp: &ValidatedExperiment, pred: &Predictions, raw: &SampleOutput) -> Result<ExperimentSummary> {
    let cfg = &exp.config;
    let centred: Vec<f64> = raw.statistics.iter().map(|s| s - pred.centering).collect();
    let red = reduce(&centred, &cfg.lambda_grid, pred.predicted_variance);
    // drop the worker count
    let mut config = serde_json::to_value(cfg)?;
    if let Some(map) = config.as_object_mut() {
        map.remove("workers");
    }
    Ok(ExperimentSummary {
        schema_version: SCHEMA_VERSION,
        config,
        n: cfg.n,
        beta: cfg.beta,
        n_samples: cfg.n_samples,
        eta0: exp.eta0(),
        contour: exp.contour,
        per_sample_statistics: centred,
        centering: pred.centering,
        empirical_mean: red.mean,
        empirical_variance: red.variance,
        predicted_variance: pred.predicted_variance,
        universal_variance: pred.universal_variance,
        ks: red.ks,
        char_function: red.char_function,
        diagnostics: DiagnosticsSummary::from_reports(&raw.reports),
        flags: SummaryFlags::default(),
        extra: BTreeMap::new(),
    })
}

/// Validates, predicts, samples and reduces.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    let exp = cfg.validate()?;
    let pred = predictions(&exp)?;
    let raw = draw_samples(&exp, false)?;
    assemble_summary(&exp, &pred, &raw)
}

pub const STATISTICS_CSV_HEADER: &str = "sample_index,statistic";

pub fn statistics_csv(summary: &ExperimentSummary) -> String {
    let mut s = format!("{STATISTICS_CSV_HEADER}\n");
    for (i, v) in summary.per_sample_statistics.iter().enumerate() {
        s.push_str(&format!("{i},{v}\n"));
    }
    s
}

/// Histogram of the centred statistics with counts expected under `N(0, V)`.
pub fn histogram_csv(summary: &ExperimentSummary, bins: usize) -> String {
    let x = &summary.per_sample_statistics;
    let mut s = String::from("bin_lo,bin_hi,count,expected\n");
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        s.push_str(&format!("{lo},{hi},{},{}\n", x.len(), x.len()));
        return s;
    }
    let w = (hi - lo) / bins as f64;
    let sd = summary.predicted_variance.sqrt();
    for k in 0..bins {
        let (a, b) = (lo + k as f64 * w, lo + (k + 1) as f64 * w);
        let count = x.iter().filter(|&&v| (v >= a && v < b) || (k == bins - 1 && v == hi)).count();
        let expected = if sd > 0.0 {
            x.len() as f64 * (normal_cdf(b / sd) - normal_cdf(a / sd))
        } else {
            0.0
        };
        s.push_str(&format!("{a},{b},{count},{expected}\n"));
    }
    s
}

/// Sorted standardised statistics against normal quantiles.
pub fn qq_csv(summary: &ExperimentSummary) -> String {
    let mut s = String::from("rank,standardized,normal_quantile\n");
    if let Ok(mut z) = standardize(&summary.per_sample_statistics) {
        z.sort_by(f64::total_cmp);
        let m = z.len() as f64;
        for (i, v) in z.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", i + 1, v, normal_quantile((i as f64 + 0.5) / m)));
        }
    }
    s
}

/// Writes summary, statistics, histogram and QQ tables into `dir`.
pub fn write_experiment(dir: &Path, summary: &ExperimentSummary) -> Result<()> {
    persist_summary(summary, &dir.join("summary.json"))?;
    write_atomic(&dir.join("statistics.csv"), statistics_csv(summary).as_bytes())?;
    write_atomic(&dir.join("histogram.csv"), histogram_csv(summary, 20).as_bytes())?;
    write_atomic(&dir.join("qq.csv"), qq_csv(summary).as_bytes())
}
