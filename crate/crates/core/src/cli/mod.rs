//! Command line front end: configuration loading, subcommand dispatch and exit codes.

mod overrides;

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;

use crate::clt_harness::{self, write_atomic, ExperimentConfig, ExperimentSummary};
use crate::error::{Error, Result};
use crate::random_matrix::{self, DIAGNOSTICS_CSV_HEADER};
use crate::subordination::{self, GRID_CSV_HEADER};
use crate::variance_kernel::{self, ContourSpec, TestFunction};

pub use overrides::{apply as apply_overrides, valid_keys};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "freesum", version, about = "Free additive convolution and mesoscopic CLT checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one configuration field by dotted path.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory (the experiment directory for `report`).
    #[arg(long, global = true, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// Allow writing into a non-empty output directory.
    #[arg(long, global = true)]
    pub force: bool,
    /// Worker threads for Monte Carlo sampling.
    #[arg(long, global = true, value_name = "INT")]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Density and subordination functions of μ_A ⊞ μ_B on an energy grid.
    Convolve,
    /// Regular bulk intervals of μ_A ⊞ μ_B.
    BulkScan,
    /// Contour-integral variance V(f) and its universal limit.
    PredictVariance,
    /// Bias function b(E + iη) on the grid.
    PredictBias,
    /// Monte Carlo experiment for the linear statistic.
    Simulate,
    /// Local law diagnostics of sampled resolvents.
    Diagnose,
    /// Human readable report of an existing experiment directory.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Convolve => "convolve",
            Command::BulkScan => "bulk-scan",
            Command::PredictVariance => "predict-variance",
            Command::PredictBias => "predict-bias",
            Command::Simulate => "simulate",
            Command::Diagnose => "diagnose",
            Command::Report => "report",
        }
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ConfigInvalid { .. } | Error::Schema(_) | Error::InvalidMeasure(_) | Error::InvalidArgument(_) => {
            EXIT_CONFIG
        }
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_FAILURE,
    }
}

/// One-line JSON error record.
pub fn error_record(e: &Error) -> String {
    let mut rec = json!({
        "level": "error",
        "kind": e.kind(),
        "message": e.to_string(),
        "exit_code": exit_code(e),
    });
    if let Error::ConfigInvalid { field, .. } = e {
        rec["field"] = json!(field);
    }
    if let Error::InSample { index, .. } = e {
        rec["sample_index"] = json!(index);
    }
    rec.to_string()
}

pub fn main_from_env() -> i32 {
    run_args(std::env::args_os())
}

/// Parses arguments, runs the command and reports errors on stderr.
pub fn run_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let err = Error::config("arguments", e.to_string().trim().to_string());
            eprintln!("{}", error_record(&err));
            return EXIT_CONFIG;
        }
    };
    let level = if cli.verbose { "debug" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}", error_record(&e));
            exit_code(&e)
        }
    }
}

/// Reads the configuration file (if any) and applies overrides.
pub fn load_config(path: Option<&Path>, set: &[String], workers: Option<usize>) -> Result<ExperimentConfig> {
    let base = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::config("config", format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::config("config", format!("{}: {e}", p.display())))?
        }
        None => ExperimentConfig::default(),
    };
    let mut cfg = overrides::apply(base, set)?;
    if let Some(w) = workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

/// Creates `dir`, refusing a non-empty one unless `force`.
pub fn prepare_output(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(Error::config("output", format!("{} is not a directory", dir.display())));
        }
        let occupied = std::fs::read_dir(dir)?.next().is_some();
        if occupied && !force {
            return Err(Error::config(
                "output",
                format!("{} is not empty; pass --force to overwrite", dir.display()),
            ));
        }
    } else {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    let cmd = cli.command;
    if cmd == Command::Report {
        let dir = cli
            .output
            .clone()
            .ok_or_else(|| Error::config("output", "report needs --output pointing at an experiment directory"))?;
        return report(&dir);
    }
    let cfg = load_config(cli.config.as_deref(), &cli.set, cli.workers)?;
    cfg.validate_static()?;
    let dir = cli.output.clone().unwrap_or_else(|| PathBuf::from("freesum-output").join(cmd.name()));
    prepare_output(&dir, cli.force)?;
    log::info!("{} -> {}", cmd.name(), dir.display());
    match cmd {
        Command::Convolve => convolve(&cfg, &dir)?,
        Command::BulkScan => bulk_scan(&cfg, &dir)?,
        Command::PredictVariance => predict_variance(&cfg, &dir)?,
        Command::PredictBias => predict_bias(&cfg, &dir)?,
        Command::Simulate => simulate(&cfg, &dir)?,
        Command::Diagnose => diagnose(&cfg, &dir)?,
        Command::Report => unreachable!(),
    }
    write_metadata(&dir, cmd, &cfg)
}

fn write_metadata(dir: &Path, cmd: Command, cfg: &ExperimentConfig) -> Result<()> {
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = json!({
        "subcommand": cmd.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "created_unix": created,
        "config": cfg,
    });
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    write_atomic(&dir.join("run_metadata.json"), text.as_bytes())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn convolve(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let (mu_a, mu_b) = cfg.measures()?;
    let g = &cfg.grid;
    let states = subordination::grid(&mu_a, &mu_b, (g.e_min, g.e_max), g.step, g.eta, &cfg.tolerances.solver())?;
    let mut csv = format!("{GRID_CSV_HEADER}\n");
    for s in &states {
        csv.push_str(&subordination::grid_csv_row(s));
        csv.push('\n');
    }
    write_atomic(&dir.join("density.csv"), csv.as_bytes())?;
    if let Some(s) = states.iter().min_by(|x, y| (x.z.re - cfg.e0).abs().total_cmp(&(y.z.re - cfg.e0).abs())) {
        println!("{} grid points, density({}) = {:.6}", states.len(), s.z.re, s.density());
    }
    Ok(())
}

fn bulk_scan(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let (mu_a, mu_b) = cfg.measures()?;
    let g = &cfg.grid;
    let scan = subordination::bulk_scan(&mu_a, &mu_b, (g.e_min, g.e_max), g.step, &cfg.tolerances.bulk())?;
    let mut csv = String::from("E,density,abs_f,abs_delta,abs_m_prime,in_bulk\n");
    for p in &scan.points {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.energy, p.density, p.abs_f, p.abs_delta, p.abs_m_prime, p.in_bulk as u8
        ));
    }
    write_atomic(&dir.join("bulk_scan.csv"), csv.as_bytes())?;
    let intervals: Vec<_> = scan.intervals.iter().map(|&(a, b)| json!({"lo": a, "hi": b})).collect();
    write_json(&dir.join("bulk_intervals.json"), &json!({ "intervals": intervals }))?;
    for (a, b) in &scan.intervals {
        println!("bulk [{a}, {b}]");
    }
    Ok(())
}

fn predict_variance(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let exp = cfg.validate()?;
    let v = variance_kernel::contour_variance(&exp.test_function, &exp.contour, &exp.mu_a, &exp.mu_b, cfg.beta)?;
    let u = variance_kernel::universal_variance(&exp.test_function.shape, cfg.beta)?;
    println!("V(f) = {v:.10}");
    println!("universal = {u:.10}");
    write_json(
        &dir.join("variance.json"),
        &json!({
            "n": cfg.n,
            "beta": cfg.beta,
            "eta0": exp.eta0(),
            "contour": exp.contour,
            "predicted_variance": v,
            "universal_variance": u,
            "variance_bound_certified": false,
        }),
    )?;
    if !cfg.n_sweep.is_empty() {
        let mut csv = String::from("n,eta0,gamma1_height,predicted_variance,universal_variance,relative_gap\n");
        for &m in &cfg.n_sweep {
            let mut c = cfg.clone();
            c.n = m;
            let (mu_a, mu_b) = c.measures()?;
            let tf = TestFunction::new(c.test_function.clone(), c.e0, c.eta0())?;
            let contour = ContourSpec::new(m, &tf, c.tau, c.contour_points)?;
            let vm = variance_kernel::contour_variance(&tf, &contour, &mu_a, &mu_b, c.beta)?;
            csv.push_str(&format!(
                "{m},{},{},{vm},{u},{}\n",
                tf.eta0,
                contour.gamma1_height,
                (vm - u).abs() / u.abs().max(f64::MIN_POSITIVE)
            ));
        }
        write_atomic(&dir.join("variance_sweep.csv"), csv.as_bytes())?;
    }
    Ok(())
}

fn predict_bias(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let (mu_a, mu_b) = cfg.measures()?;
    let g = &cfg.grid;
    let states = subordination::grid(&mu_a, &mu_b, (g.e_min, g.e_max), g.step, g.eta, &cfg.tolerances.solver())?;
    let mut csv = String::from("E,eta,re_b,im_b\n");
    let mut skipped = 0;
    for s in &states {
        match variance_kernel::bias_b(s, cfg.beta, &mu_a, &mu_b) {
            Ok(b) => csv.push_str(&format!("{},{},{},{}\n", s.z.re, s.z.im, b.re, b.im)),
            Err(Error::DegenerateJacobian { .. }) => {
                skipped += 1;
                csv.push_str(&format!("{},{},NaN,NaN\n", s.z.re, s.z.im));
            }
            Err(e) => return Err(e),
        }
    }
    write_atomic(&dir.join("bias.csv"), csv.as_bytes())?;
    println!("{} grid points, {skipped} with degenerate Jacobian", states.len());
    Ok(())
}

fn simulate(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let exp = cfg.validate()?;
    let pred = clt_harness::predictions(&exp)?;
    let raw = clt_harness::draw_samples(&exp, cfg.save_eigenvalues)?;
    let summary = clt_harness::assemble_summary(&exp, &pred, &raw)?;
    clt_harness::write_experiment(dir, &summary)?;
    if cfg.save_eigenvalues {
        let eig = dir.join("eigenvalues");
        std::fs::create_dir_all(&eig)?;
        for (k, s) in raw.samples.iter().enumerate() {
            random_matrix::dump_eigenvalues(&eig, &format!("sample_{k:05}"), s)?;
        }
    }
    print!("{}", render_report(&summary));
    Ok(())
}

fn diagnose(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let (mu_a, mu_b) = cfg.measures()?;
    for (field, mu) in [("mu_a", &mu_a), ("mu_b", &mu_b)] {
        if mu.len() != cfg.n || !mu.is_uniform() {
            return Err(Error::config(field, format!("matrix spectra need {} atoms of weight 1/n", cfg.n)));
        }
    }
    let d = &cfg.diagnose;
    let opts = cfg.tolerances.solver();
    let mut states = Vec::new();
    for &e in &d.energies {
        for &eta in &d.etas {
            states.push(subordination::solve(&mu_a, &mu_b, Complex64::new(e, eta), &opts)?);
        }
    }
    let mut csv = format!("{DIAGNOSTICS_CSV_HEADER}\n");
    let mut tp_csv = String::from("seed,re_z1,im_z1,re_z2,im_z2,max_error,xi1,xi2\n");
    for k in 0..d.seeds {
        let seed = random_matrix::sample_seed(cfg.master_seed, k as u64);
        let sample = random_matrix::build_sample(mu_a.atoms(), mu_b.atoms(), cfg.beta, seed, true)?;
        for s1 in &states {
            let report = random_matrix::green_diagnostics(&sample, s1)?;
            csv.push_str(&report.csv_row(seed));
            csv.push('\n');
            for &off in &d.two_point_offsets {
                let z2 = s1.z.conj() + off;
                let s2 = subordination::solve(&mu_a, &mu_b, z2, &opts)?;
                let tp = subordination::two_point(&mu_a, &mu_b, s1, &s2);
                let err = random_matrix::two_point_diagnostic(&sample, s1, &s2, &tp)?;
                let (xi1, xi2) = random_matrix::xi_controls(cfg.n, s1.z.im, z2.im);
                tp_csv.push_str(&format!(
                    "{seed},{},{},{},{},{err},{xi1},{xi2}\n",
                    s1.z.re, s1.z.im, z2.re, z2.im
                ));
            }
        }
    }
    write_atomic(&dir.join("diagnostics.csv"), csv.as_bytes())?;
    write_atomic(&dir.join("two_point.csv"), tp_csv.as_bytes())?;
    println!("{} seeds x {} spectral points", d.seeds, states.len());
    Ok(())
}

/// Plain text summary of an experiment.
pub fn render_report(s: &ExperimentSummary) -> String {
    let mut out = String::new();
    let se = |e: &clt_harness::Estimate| e.se.map(|x| format!(" ± {x:.3e}")).unwrap_or_default();
    out.push_str(&format!("N = {}, beta = {}, samples = {}\n", s.n, s.beta.value(), s.n_samples));
    out.push_str(&format!("eta0 = {:.6e}, contour heights = {:.6e}, {:.6e}\n", s.eta0, s.contour.gamma1_height, s.contour.gamma2_height));
    out.push_str(&format!("centering = {:.10}\n", s.centering));
    out.push_str(&format!("empirical mean = {:.6e}{}\n", s.empirical_mean.value, se(&s.empirical_mean)));
    out.push_str(&format!("empirical variance = {:.6e}{}\n", s.empirical_variance.value, se(&s.empirical_variance)));
    out.push_str(&format!("predicted variance V(f) = {:.6e}\n", s.predicted_variance));
    out.push_str(&format!("universal variance = {:.6e}\n", s.universal_variance));
    match &s.ks {
        Some(ks) => out.push_str(&format!("KS statistic = {:.4}, p = {:.4}\n", ks.statistic, ks.p_value)),
        None => out.push_str("KS test skipped (too few samples)\n"),
    }
    for c in &s.char_function {
        out.push_str(&format!(
            "lambda = {}: empirical = {:.4}{:+.4}i, predicted = {:.4}\n",
            c.lambda, c.empirical.re, c.empirical.im, c.predicted.re
        ));
    }
    if let Some(d) = &s.diagnostics {
        out.push_str(&format!("diagnostics: {}\n", serde_json::to_string(d).unwrap_or_default()));
    }
    out
}

fn report(dir: &Path) -> Result<()> {
    let path = dir.join("summary.json");
    if !path.exists() {
        return Err(Error::config("output", format!("{} does not exist", path.display())));
    }
    let summary = clt_harness::load_summary(&path)?;
    let text = render_report(&summary);
    print!("{text}");
    write_atomic(&dir.join("report.txt"), text.as_bytes())
}
