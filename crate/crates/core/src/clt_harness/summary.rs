use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::stats::KsResult;
use crate::error::{Error, Result};
use crate::random_matrix::LocalLawReport;
use crate::variance_kernel::ContourSpec;
use crate::Beta;

pub const SCHEMA_VERSION: u64 = 1;

/// A point estimate with its standard error, absent when undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharPoint {
    pub lambda: f64,
    pub empirical: Complex64,
    pub se: Option<f64>,
    pub predicted: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub median: f64,
    pub p90: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |q: f64| {
            let pos = q * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Self {
            median: at(0.5),
            p90: at(0.9),
            max: v[v.len() - 1],
        }
    }
}

/// Local law errors aggregated over samples at `z = E₀ + iη₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub z: Complex64,
    pub psi: f64,
    pub max_diag_error: Quantiles,
    pub trace_error: Quantiles,
    pub bg_trace_error: Quantiles,
    pub y_identity: Quantiles,
    pub two_point_max_error: Quantiles,
}

impl DiagnosticsSummary {
    pub fn from_reports(reports: &[LocalLawReport]) -> Option<Self> {
        let first = reports.first()?;
        let q = |f: fn(&LocalLawReport) -> f64| Quantiles::of(&reports.iter().map(f).collect::<Vec<_>>());
        Some(Self {
            z: first.z,
            psi: first.psi,
            max_diag_error: q(|r| r.max_diag_error),
            trace_error: q(|r| r.trace_error),
            bg_trace_error: q(|r| r.bg_trace_error),
            y_identity: q(|r| r.y_identity),
            two_point_max_error: q(|r| r.two_point_max_error),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFlags {
    /// No a priori certificate that `V(f)` stays of order one is available.
    pub variance_bound_certified: bool,
    /// KS p-values use estimated mean and variance and are approximate.
    pub ks_p_value_approximate: bool,
    /// The empirical characteristic function is centred at the sample mean.
    pub char_centering: String,
}

impl Default for SummaryFlags {
    fn default() -> Self {
        Self {
            variance_bound_certified: false,
            ks_p_value_approximate: true,
            char_centering: "sample_mean".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub schema_version: u64,
    pub config: Value,
    pub n: usize,
    pub beta: Beta,
    pub n_samples: usize,
    pub eta0: f64,
    pub contour: ContourSpec,
    /// Centred statistics `Σ g((λ_i − E₀)/η₀) − centering`, in sample order.
    pub per_sample_statistics: Vec<f64>,
    pub centering: f64,
    pub empirical_mean: Estimate,
    pub empirical_variance: Estimate,
    pub predicted_variance: f64,
    pub universal_variance: f64,
    pub ks: Option<KsResult>,
    pub char_function: Vec<CharPoint>,
    pub diagnostics: Option<DiagnosticsSummary>,
    pub flags: SummaryFlags,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl ExperimentSummary {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        match value.get("schema_version") {
            None => Err(Error::Schema("summary has no schema_version".into())),
            Some(v) if v.as_u64() == Some(SCHEMA_VERSION) => Ok(serde_json::from_value(value)?),
            Some(v) => Err(Error::Schema(format!(
                "summary schema_version {v} is not supported (expected {SCHEMA_VERSION})"
            ))),
        }
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn persist_summary(summary: &ExperimentSummary, path: &Path) -> Result<()> {
    write_atomic(path, summary.to_json()?.as_bytes())
}

pub fn load_summary(path: &Path) -> Result<ExperimentSummary> {
    ExperimentSummary::from_json(&std::fs::read_to_string(path)?)
}
