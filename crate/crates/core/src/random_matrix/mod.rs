//! Samples of `H = A + U B U*` (or `A + O B Oᵀ`) and Green function diagnostics.

mod haar;

pub use haar::{
    decompose_haar, orthogonality_defect, rng, sample_haar_orthogonal, sample_haar_unitary, sample_seed, to_complex,
    unitarity_defect, HaarDecomposition,
};

use std::io::Write;
use std::path::Path;

use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::subordination::{SubordinationState, TwoPointState};
use crate::Beta;

#[derive(Debug, Clone)]
pub enum Conjugator {
    Unitary(Mat<c64>),
    Orthogonal(Mat<f64>),
}

impl Conjugator {
    pub fn as_complex(&self) -> Mat<c64> {
        match self {
            Conjugator::Unitary(u) => u.clone(),
            Conjugator::Orthogonal(o) => to_complex(o),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FreeSumSample {
    pub n: usize,
    pub beta: Beta,
    pub a_diag: Vec<f64>,
    pub b_diag: Vec<f64>,
    pub conjugator_seed: u64,
    pub eigenvalues: Vec<f64>,
    pub conjugator: Option<Conjugator>,
}

fn conjugated_complex(u: &Mat<c64>, b: &[f64]) -> Mat<c64> {
    let n = u.nrows();
    let ub = Mat::<c64>::from_fn(n, n, |i, j| u[(i, j)] * b[j]);
    &ub * u.adjoint()
}

fn conjugated_real(o: &Mat<f64>, b: &[f64]) -> Mat<f64> {
    let n = o.nrows();
    let ob = Mat::<f64>::from_fn(n, n, |i, j| o[(i, j)] * b[j]);
    &ob * o.transpose()
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Draws the conjugation from `seed`, forms `H` and its sorted spectrum.
pub fn build_sample(a: &[f64], b: &[f64], beta: Beta, seed: u64, keep_conjugator: bool) -> Result<FreeSumSample> {
    let n = a.len();
    if n == 0 || b.len() != n {
        return Err(Error::InvalidArgument(format!("need equal nonzero lengths, got {} and {}", n, b.len())));
    }
    let (conj, eigenvalues) = match beta {
        Beta::Unitary => {
            let u = sample_haar_unitary(n, seed);
            let eig = if b.iter().all(|&x| x == 0.0) {
                sorted(a)
            } else if a.iter().all(|&x| x == 0.0) {
                sorted(b)
            } else {
                let mut h = conjugated_complex(&u, b);
                for i in 0..n {
                    h[(i, i)] += a[i];
                }
                h.self_adjoint_eigenvalues(Side::Lower)
                    .map_err(|e| Error::SolverError(format!("hermitian eigensolver failed at n = {n}: {e:?}")))?
            };
            (Conjugator::Unitary(u), eig)
        }
        Beta::Orthogonal => {
            let o = sample_haar_orthogonal(n, seed);
            let eig = if b.iter().all(|&x| x == 0.0) {
                sorted(a)
            } else if a.iter().all(|&x| x == 0.0) {
                sorted(b)
            } else {
                let mut h = conjugated_real(&o, b);
                for i in 0..n {
                    h[(i, i)] += a[i];
                }
                h.self_adjoint_eigenvalues(Side::Lower)
                    .map_err(|e| Error::SolverError(format!("symmetric eigensolver failed at n = {n}: {e:?}")))?
            };
            (Conjugator::Orthogonal(o), eig)
        }
    };
    Ok(FreeSumSample {
        n,
        beta,
        a_diag: a.to_vec(),
        b_diag: b.to_vec(),
        conjugator_seed: seed,
        eigenvalues: sorted(&eigenvalues),
        conjugator: keep_conjugator.then_some(conj),
    })
}

impl FreeSumSample {
    fn conjugator(&self) -> Result<&Conjugator> {
        self.conjugator
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("sample was built without its conjugation matrix".into()))
    }

    /// `B̃ = U B U*` (or `O B Oᵀ`) as a complex matrix.
    pub fn b_tilde(&self) -> Result<Mat<c64>> {
        Ok(match self.conjugator()? {
            Conjugator::Unitary(u) => conjugated_complex(u, &self.b_diag),
            Conjugator::Orthogonal(o) => to_complex(&conjugated_real(o, &self.b_diag)),
        })
    }

    pub fn hamiltonian(&self) -> Result<Mat<c64>> {
        let mut h = self.b_tilde()?;
        for i in 0..self.n {
            h[(i, i)] += self.a_diag[i];
        }
        Ok(h)
    }

    /// `(H − z)⁻¹`
    pub fn resolvent(&self, z: Complex64) -> Result<Mat<c64>> {
        let mut h = self.hamiltonian()?;
        for i in 0..self.n {
            h[(i, i)] -= z;
        }
        let g = h.partial_piv_lu().inverse();
        if (0..self.n).any(|i| !g[(i, i)].re.is_finite() || !g[(i, i)].im.is_finite()) {
            return Err(Error::SolverError(format!("resolvent at {z} is not finite")));
        }
        Ok(g)
    }

    pub fn trace_defect(&self) -> f64 {
        let s: f64 = self.eigenvalues.iter().sum();
        let t: f64 = self.a_diag.iter().sum::<f64>() + self.b_diag.iter().sum::<f64>();
        (s - t).abs()
    }
}

/// Green function errors against the deterministic targets at one `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalLawReport {
    pub z: Complex64,
    pub psi: f64,
    pub max_diag_error: f64,
    pub trace_error: f64,
    pub bg_trace_error: f64,
    pub y_identity: f64,
    /// Equal-point form of the two point law at `z₁ = z₂ = z`.
    pub two_point_max_error: f64,
}

pub const DIAGNOSTICS_CSV_HEADER: &str =
    "seed,re_z,im_z,psi,max_diag_error,trace_error,bg_trace_error,y_identity,two_point_max_error";

impl LocalLawReport {
    pub fn csv_row(&self, seed: u64) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            seed,
            self.z.re,
            self.z.im,
            self.psi,
            self.max_diag_error,
            self.trace_error,
            self.bg_trace_error,
            self.y_identity,
            self.two_point_max_error
        )
    }
}

/// `Ψ = (N|η|)^{−1/2}`
pub fn psi(n: usize, eta: f64) -> f64 {
    1.0 / (n as f64 * eta.abs()).sqrt()
}

/// Normalised traces of `G`, `B̃G` and `B̃GB̃`, using `B̃G = I − (A − z)G`.
fn traces(sample: &FreeSumSample, g: &Mat<c64>, z: Complex64) -> (Complex64, Complex64, Complex64) {
    let n = sample.n as f64;
    let mut tg = Complex64::new(0.0, 0.0);
    let mut tbg = Complex64::new(0.0, 0.0);
    let mut tbgb = Complex64::new(0.0, 0.0);
    for i in 0..sample.n {
        let gii = g[(i, i)];
        let ai = sample.a_diag[i] - z;
        tg += gii;
        tbg += 1.0 - ai * gii;
        tbgb += sample.b_diag[i] - ai + ai * ai * gii;
    }
    (tg / n, tbg / n, tbgb / n)
}

/// `max_j |(G B̃ G)_jj − [(z − ω_B) m_fc]' / ((a_j − ω_B)² L_B)|` with `L_B = m'_A(ω_B)`.
fn equal_point_error(sample: &FreeSumSample, g: &Mat<c64>, s: &SubordinationState) -> Result<f64> {
    if !s.has_derivatives() {
        return Err(Error::InvalidArgument("state lacks derivatives".into()));
    }
    let mu_a = EmpiricalMeasure::from_spectrum(&sample.a_diag)?;
    let l_b = mu_a.resolvent_sums::<2>(s.omega_b)[1];
    if l_b.norm() < 1e-8 {
        return Err(Error::DegenerateTwoPoint(format!("|L_B| = {:e}", l_b.norm())));
    }
    let num = (1.0 - s.omega_b_prime) * s.m_fc + (s.z - s.omega_b) * s.m_fc_prime;
    let mut worst: f64 = 0.0;
    for j in 0..sample.n {
        let lhs = gbg_diag(sample, g, g, s.z, j);
        let d = sample.a_diag[j] - s.omega_b;
        worst = worst.max((lhs - num / (d * d * l_b)).norm());
    }
    Ok(worst)
}

/// `(G₂ B̃ G₁)_jj = (G₂)_jj − Σ_k (G₂)_jk (a_k − z₁) (G₁)_kj`
fn gbg_diag(sample: &FreeSumSample, g2: &Mat<c64>, g1: &Mat<c64>, z1: Complex64, j: usize) -> Complex64 {
    let mut acc = g2[(j, j)];
    for k in 0..sample.n {
        acc -= g2[(j, k)] * (sample.a_diag[k] - z1) * g1[(k, j)];
    }
    acc
}

pub fn green_diagnostics(sample: &FreeSumSample, state: &SubordinationState) -> Result<LocalLawReport> {
    let z = state.z;
    let g = sample.resolvent(z)?;
    report_from_resolvent(sample, state, &g)
}

pub fn report_from_resolvent(
    sample: &FreeSumSample,
    state: &SubordinationState,
    g: &Mat<c64>,
) -> Result<LocalLawReport> {
    let z = state.z;
    let mut max_diag: f64 = 0.0;
    for i in 0..sample.n {
        let target = (sample.a_diag[i] - state.omega_b).inv();
        max_diag = max_diag.max((g[(i, i)] - target).norm());
    }
    let (tg, tbg, tbgb) = traces(sample, g, z);
    let two_point_max_error = if state.has_derivatives() {
        equal_point_error(sample, g, state).unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    };
    Ok(LocalLawReport {
        z,
        psi: psi(sample.n, z.im),
        max_diag_error: max_diag,
        trace_error: (tg - state.m_fc).norm(),
        bg_trace_error: (tbg - (z - state.omega_b) * state.m_fc).norm(),
        y_identity: (tbg - tbg * tbg + tbgb * tg).norm(),
        two_point_max_error,
    })
}

/// Largest deviation of `(G(z₂) B̃ G(z₁))_jj` from its two point target.
/// When `z₁ = z₂` the equal-point form is used instead.
pub fn two_point_diagnostic(
    sample: &FreeSumSample,
    s1: &SubordinationState,
    s2: &SubordinationState,
    tp: &TwoPointState,
) -> Result<f64> {
    if tp.l_b.norm() < 1e-8 {
        return Err(Error::DegenerateTwoPoint(format!("|L_B| = {:e}", tp.l_b.norm())));
    }
    let g1 = sample.resolvent(s1.z)?;
    if s1.z == s2.z {
        return equal_point_error(sample, &g1, s1);
    }
    let g2 = if s2.z == s1.z.conj() {
        g1.adjoint().to_owned()
    } else {
        sample.resolvent(s2.z)?
    };
    let scale = tp.t_b / ((s1.z - s2.z) * tp.l_b);
    let mut worst: f64 = 0.0;
    for j in 0..sample.n {
        let lhs = gbg_diag(sample, &g2, &g1, s1.z, j);
        let a = sample.a_diag[j];
        let target = scale / ((a - s1.omega_b) * (a - s2.omega_b));
        worst = worst.max((lhs - target).norm());
    }
    Ok(worst)
}

/// `Ξ₁ = 1/(√(N|η₁|)|η₂|) + 1/(√(N|η₂|)|η₁|)`, `Ξ₂ = 1/(Nη₁²) + 1/(N|η₁η₂|)`.
pub fn xi_controls(n: usize, eta1: f64, eta2: f64) -> (f64, f64) {
    let n = n as f64;
    let (e1, e2) = (eta1.abs(), eta2.abs());
    (
        1.0 / ((n * e1).sqrt() * e2) + 1.0 / ((n * e2).sqrt() * e1),
        1.0 / (n * e1 * e1) + 1.0 / (n * e1 * e2),
    )
}

/// SHA-256 of a measure's atoms and weights as little-endian bytes.
pub fn measure_hash(mu: &EmpiricalMeasure) -> String {
    let mut h = Sha256::new();
    for x in mu.atoms().iter().chain(mu.weights()) {
        h.update(x.to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueSidecar {
    pub n: usize,
    pub beta: Beta,
    pub seed: u64,
    pub mu_a_sha256: String,
    pub mu_b_sha256: String,
}

/// Writes `<stem>.f64` (little-endian) and `<stem>.json`.
pub fn dump_eigenvalues(dir: &Path, stem: &str, sample: &FreeSumSample) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 * sample.n);
    for x in &sample.eigenvalues {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    crate::clt_harness::write_atomic(&dir.join(format!("{stem}.f64")), &bytes)?;
    let side = EigenvalueSidecar {
        n: sample.n,
        beta: sample.beta,
        seed: sample.conjugator_seed,
        mu_a_sha256: measure_hash(&EmpiricalMeasure::from_spectrum(&sample.a_diag)?),
        mu_b_sha256: measure_hash(&EmpiricalMeasure::from_spectrum(&sample.b_diag)?),
    };
    let mut json = serde_json::to_vec_pretty(&side)?;
    json.write_all(b"\n")?;
    crate::clt_harness::write_atomic(&dir.join(format!("{stem}.json")), &json)
}

pub fn load_eigenvalues(path: &Path) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Schema(format!("{} is not a whole number of f64 values", path.display())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
