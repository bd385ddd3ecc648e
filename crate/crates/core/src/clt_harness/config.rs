use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{quantile_discretize, EmpiricalMeasure, Family};
use crate::subordination::{self, BulkCriteria, SolverOptions};
use crate::variance_kernel::{ContourSpec, Profile, Shape, TestFunction};
use crate::Beta;

/// A spectrum given by a reference law or by explicit atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, try_from = "RawMeasureSpec")]
pub enum MeasureSpec {
    Family { family: Family, params: Vec<f64> },
    Atoms {
        atoms: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasureSpec {
    family: Option<Family>,
    params: Option<Vec<f64>>,
    atoms: Option<Vec<f64>>,
    weights: Option<Vec<f64>>,
}

impl TryFrom<RawMeasureSpec> for MeasureSpec {
    type Error = String;

    fn try_from(r: RawMeasureSpec) -> std::result::Result<Self, String> {
        match r {
            RawMeasureSpec {
                family: Some(family),
                params,
                atoms: None,
                weights: None,
            } => Ok(MeasureSpec::Family {
                family,
                params: params.unwrap_or_default(),
            }),
            RawMeasureSpec {
                family: None,
                params: None,
                atoms: Some(atoms),
                weights,
            } => Ok(MeasureSpec::Atoms { atoms, weights }),
            _ => Err("a measure is either {family, params} or {atoms, weights}".into()),
        }
    }
}

impl MeasureSpec {
    pub fn semicircle(variance: f64) -> Self {
        MeasureSpec::Family {
            family: Family::Semicircle,
            params: vec![variance],
        }
    }

    pub fn resolve(&self, n: usize) -> Result<EmpiricalMeasure> {
        match self {
            MeasureSpec::Family { family, params } => quantile_discretize(*family, params, n),
            MeasureSpec::Atoms { atoms, weights: None } => EmpiricalMeasure::from_spectrum(atoms),
            MeasureSpec::Atoms {
                atoms,
                weights: Some(w),
            } => EmpiricalMeasure::new(atoms.clone(), w.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub solver_tol: f64,
    pub max_iter: usize,
    pub eta_probe: f64,
    pub rho_min: f64,
    pub f_min: f64,
    pub delta_min: f64,
    pub m_prime_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            solver_tol: subordination::DEFAULT_TOL,
            max_iter: subordination::DEFAULT_MAX_ITER,
            eta_probe: subordination::DEFAULT_ETA_PROBE,
            rho_min: 1e-3,
            f_min: 1e-3,
            delta_min: 1e-4,
            m_prime_min: 1e-3,
        }
    }
}

impl Tolerances {
    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver_tol,
            max_iter: self.max_iter,
        }
    }

    pub fn bulk(&self) -> BulkCriteria {
        BulkCriteria {
            rho_min: self.rho_min,
            f_min: self.f_min,
            delta_min: self.delta_min,
            eta_probe: self.eta_probe,
        }
    }
}

/// Energy grid used by `convolve`, `bulk-scan` and `predict-bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub e_min: f64,
    pub e_max: f64,
    pub step: f64,
    pub eta: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            e_min: -3.0,
            e_max: 3.0,
            step: 0.01,
            eta: subordination::DEFAULT_ETA_PROBE,
        }
    }
}

/// Settings for the `diagnose` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub seeds: usize,
    pub etas: Vec<f64>,
    pub energies: Vec<f64>,
    /// Real shifts `d` giving second points `z̄₁ + d` for the two point check.
    pub two_point_offsets: Vec<f64>,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        Self {
            seeds: 5,
            etas: vec![0.05, 0.1, 0.2],
            energies: vec![0.0],
            two_point_offsets: vec![0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub beta: Beta,
    pub mu_a: MeasureSpec,
    pub mu_b: MeasureSpec,
    pub test_function: Shape,
    pub e0: f64,
    pub eta0_exponent: f64,
    pub tau: f64,
    pub n_samples: usize,
    pub master_seed: u64,
    pub lambda_grid: Vec<f64>,
    pub diagnostics: bool,
    pub workers: usize,
    pub contour_points: usize,
    pub save_eigenvalues: bool,
    /// Extra sizes for a convergence sweep of the contour variance.
    pub n_sweep: Vec<usize>,
    pub tolerances: Tolerances,
    pub grid: GridConfig,
    pub diagnose: DiagnoseConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            beta: Beta::Unitary,
            mu_a: MeasureSpec::semicircle(1.0),
            mu_b: MeasureSpec::semicircle(1.0),
            test_function: Shape::from(Profile::gaussian()),
            e0: 0.0,
            eta0_exponent: 0.3,
            tau: crate::variance_kernel::DEFAULT_TAU,
            n_samples: 400,
            master_seed: 1,
            lambda_grid: vec![0.5, 1.0, 2.0],
            diagnostics: false,
            workers: 1,
            contour_points: crate::variance_kernel::DEFAULT_CONTOUR_POINTS,
            save_eigenvalues: false,
            n_sweep: Vec::new(),
            tolerances: Tolerances::default(),
            grid: GridConfig::default(),
            diagnose: DiagnoseConfig::default(),
        }
    }
}

/// A configuration whose measures, test function and contour have been built and checked.
#[derive(Debug, Clone)]
pub struct ValidatedExperiment {
    pub config: ExperimentConfig,
    pub mu_a: EmpiricalMeasure,
    pub mu_b: EmpiricalMeasure,
    pub test_function: TestFunction,
    pub contour: ContourSpec,
}

impl ValidatedExperiment {
    pub fn eta0(&self) -> f64 {
        self.test_function.eta0
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn eta0(&self) -> f64 {
        (self.n as f64).powf(-self.eta0_exponent)
    }

    /// Resolves both measures at size `n` without any further checks.
    pub fn measures(&self) -> Result<(EmpiricalMeasure, EmpiricalMeasure)> {
        let a = self.mu_a.resolve(self.n).map_err(|e| Error::config("mu_a", e.to_string()))?;
        let b = self.mu_b.resolve(self.n).map_err(|e| Error::config("mu_b", e.to_string()))?;
        Ok((a, b))
    }

    /// Checks the structural constraints that do not need the subordination solver.
    pub fn validate_static(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config("n", "must be at least 2"));
        }
        if self.n_samples == 0 {
            return Err(Error::config("n_samples", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        if self.contour_points < 2 {
            return Err(Error::config("contour_points", "must be at least 2"));
        }
        if !(self.eta0_exponent > 0.0 && self.eta0_exponent < 1.0) {
            return Err(Error::config(
                "eta0_exponent",
                format!("need N^-1 << eta0 << 1, i.e. 0 < c0 < 1; got {}", self.eta0_exponent),
            ));
        }
        if !(self.tau > 0.0 && self.tau <= self.eta0_exponent / 6.0 + 1e-12) {
            return Err(Error::config(
                "tau",
                format!(
                    "need 0 < tau < c0/6 = {}; got tau = {}",
                    self.eta0_exponent / 6.0,
                    self.tau
                ),
            ));
        }
        if !self.e0.is_finite() {
            return Err(Error::config("e0", "must be finite"));
        }
        if self.lambda_grid.iter().any(|l| !l.is_finite()) {
            return Err(Error::config("lambda_grid", "entries must be finite"));
        }
        let t = &self.tolerances;
        positive("tolerances.solver_tol", t.solver_tol)?;
        positive("tolerances.eta_probe", t.eta_probe)?;
        if t.max_iter == 0 {
            return Err(Error::config("tolerances.max_iter", "must be at least 1"));
        }
        for (f, v) in [
            ("tolerances.rho_min", t.rho_min),
            ("tolerances.f_min", t.f_min),
            ("tolerances.delta_min", t.delta_min),
            ("tolerances.m_prime_min", t.m_prime_min),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(f, format!("must be nonnegative, got {v}")));
            }
        }
        positive("grid.step", self.grid.step)?;
        positive("grid.eta", self.grid.eta)?;
        if !(self.grid.e_max >= self.grid.e_min) {
            return Err(Error::config("grid.e_max", "must be at least grid.e_min"));
        }
        if self.diagnose.etas.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::config("diagnose.etas", "entries must be positive"));
        }
        if let Some(bad) = self.n_sweep.iter().find(|&&m| m < 2) {
            return Err(Error::config("n_sweep", format!("sizes must be at least 2, got {bad}")));
        }
        self.test_function.validate()
    }

    /// Full validation, including the bulk conditions at `E₀`.
    pub fn validate(&self) -> Result<ValidatedExperiment> {
        self.validate_static()?;
        let (mu_a, mu_b) = self.measures()?;
        for (field, mu) in [("mu_a", &mu_a), ("mu_b", &mu_b)] {
            if mu.len() != self.n || !mu.is_uniform() {
                return Err(Error::config(
                    field,
                    format!("matrix spectra need {} atoms of weight 1/n, got {} atoms", self.n, mu.len()),
                ));
            }
        }
        let tf = TestFunction::new(self.test_function.clone(), self.e0, self.eta0())
            .map_err(|e| Error::config("test_function", e.to_string()))?;
        let contour = ContourSpec::new(self.n, &tf, self.tau, self.contour_points)?;
        self.check_bulk(&mu_a, &mu_b, tf.eta0)?;
        Ok(ValidatedExperiment {
            config: self.clone(),
            mu_a,
            mu_b,
            test_function: tf,
            contour,
        })
    }

    fn check_bulk(&self, mu_a: &EmpiricalMeasure, mu_b: &EmpiricalMeasure, eta0: f64) -> Result<()> {
        let t = &self.tolerances;
        let scan = subordination::bulk_scan(mu_a, mu_b, (self.e0, self.e0), 1.0, &t.bulk())?;
        let p = scan.points[0];
        if !scan.contains(self.e0) {
            return Err(Error::config(
                "e0",
                format!(
                    "E0 = {} is outside the regular bulk (density {:.3e} vs rho_min {}, |F| {:.3e} vs f_min {}, |Delta| {:.3e} vs {})",
                    self.e0, p.density, t.rho_min, p.abs_f, t.f_min, p.abs_delta, t.delta_min
                ),
            ));
        }
        let s = subordination::solve(mu_a, mu_b, Complex64::new(self.e0, eta0), &t.solver())?;
        let mp = s.m_fc_prime.norm();
        if !(mp > t.m_prime_min) {
            return Err(Error::config(
                "e0",
                format!("|m'_fc(E0 + i eta0)| = {mp:.3e} is not above tolerances.m_prime_min = {}", t.m_prime_min),
            ));
        }
        Ok(())
    }
}
