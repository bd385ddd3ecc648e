//! Subordination functions of `μ_A ⊞ μ_B` and the quantities derived from them.
//!
//! The pair `(ω_A, ω_B)` solves
//! `F_A(ω_B) = F_B(ω_A) = ω_A + ω_B − z`, and `m_fc(z) = m_A(ω_B) = m_B(ω_A)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::quadrature;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_ETA_PROBE: f64 = 1e-7;
/// Smallest admissible `|Δ|` for the derivative system.
pub const DELTA_FLOOR: f64 = 1e-8;

const FIRST_BUDGET: usize = 500;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Bound on the defect relative to `max(1, |ω_A|, |ω_B|)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Solution of the subordination system at one spectral parameter.
///
/// The derivative fields are NaN until [`derivatives`] has run;
/// [`solve`] runs it whenever `|Δ|` permits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubordinationState {
    pub z: Complex64,
    pub omega_a: Complex64,
    pub omega_b: Complex64,
    pub m_fc: Complex64,
    pub delta: Complex64,
    pub omega_a_prime: Complex64,
    pub omega_b_prime: Complex64,
    pub m_fc_prime: Complex64,
    pub residual: f64,
    pub iterations: usize,
}

impl SubordinationState {
    pub fn has_derivatives(&self) -> bool {
        !self.m_fc_prime.re.is_nan()
    }

    /// `F_fc = −1/m_fc`
    pub fn f_fc(&self) -> Complex64 {
        -self.m_fc.inv()
    }

    pub fn density(&self) -> f64 {
        self.m_fc.im.abs() / std::f64::consts::PI
    }

    pub fn conj(&self) -> Self {
        Self {
            z: self.z.conj(),
            omega_a: self.omega_a.conj(),
            omega_b: self.omega_b.conj(),
            m_fc: self.m_fc.conj(),
            delta: self.delta.conj(),
            omega_a_prime: self.omega_a_prime.conj(),
            omega_b_prime: self.omega_b_prime.conj(),
            m_fc_prime: self.m_fc_prime.conj(),
            residual: self.residual,
            iterations: self.iterations,
        }
    }
}

/// Quantities depending on two spectral parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointState {
    pub z1: Complex64,
    pub z2: Complex64,
    pub l_a: Complex64,
    pub l_b: Complex64,
    pub delta2: Complex64,
    pub t_a: Complex64,
    pub t_b: Complex64,
}

struct Eval {
    wa: Complex64,
    wb: Complex64,
    phi: Complex64,
    r: f64,
    dfa: Complex64,
    dfb: Complex64,
}

/// `h(w) = F(w) − w = −Σ p a/(a − w) / m(w)` and `F'(w)`.
fn h_and_prime(mu: &EmpiricalMeasure, w: Complex64) -> (Complex64, Complex64) {
    let mut m = Complex64::new(0.0, 0.0);
    let mut dm = Complex64::new(0.0, 0.0);
    let mut first = Complex64::new(0.0, 0.0);
    for (&a, &p) in mu.atoms().iter().zip(mu.weights()) {
        let r = Complex64::new(a - w.re, -w.im).inv();
        m += p * r;
        dm += p * r * r;
        first += p * a * r;
    }
    (-first / m, dm / (m * m))
}

/// `max(1, |ω_A|, |ω_B|)`
fn scale(wa: Complex64, wb: Complex64) -> f64 {
    1f64.max(wa.norm()).max(wb.norm())
}

fn eval(a: &EmpiricalMeasure, b: &EmpiricalMeasure, z: Complex64, wa: Complex64) -> Eval {
    let (hb, dfb) = h_and_prime(b, wa);
    let wb = z + hb;
    let (ha, dfa) = h_and_prime(a, wb);
    let phi = z + ha - wa;
    Eval {
        wa,
        wb,
        phi,
        r: if phi.re.is_finite() && phi.im.is_finite() {
            phi.norm() / scale(wa, wb)
        } else {
            f64::INFINITY
        },
        dfa,
        dfb,
    }
}

/// Solves at `z` from a cold start.
pub fn solve_subordination(
    mu_a: &EmpiricalMeasure,
    mu_b: &EmpiricalMeasure,
    z: Complex64,
    opts: &SolverOptions,
) -> Result<SubordinationState> {
    solve_from(mu_a, mu_b, z, None, opts)
}

/// Solves at `z` and fills the derivative fields.
pub fn solve(
    mu_a: &EmpiricalMeasure,
    mu_b: &EmpiricalMeasure,
    z: Complex64,
    opts: &SolverOptions,
) -> Result<SubordinationState> {
    let s = solve_subordination(mu_a, mu_b, z, opts)?;
    derivatives(&s, mu_a, mu_b)
}

/// Solves at `z`, optionally warm started from a nearby `ω_A`.
///
/// The iteration is `ω_A ← z + h_A(z + h_B(ω_A))` with `h = F − id`,
/// Each step takes the better of the iteration step, halved while the defect
/// grows, and a backtracked Newton step on the eliminated equation. If that
/// stalls the roles of the two measures are exchanged and the solve restarts.
pub fn solve_from(
    mu_a: &EmpiricalMeasure,
    mu_b: &EmpiricalMeasure,
    z: Complex64,
    guess: Option<Complex64>,
    opts: &SolverOptions,
) -> Result<SubordinationState> {
    if z.im == 0.0 || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidArgument(format!("spectral parameter {z} must be off the real axis")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    if mu_a.is_empty() || mu_b.is_empty() {
        return Err(Error::InvalidMeasure("empty measure".into()));
    }
    if z.im < 0.0 {
        let g = guess.map(|w| w.conj());
        return solve_from(mu_a, mu_b, z.conj(), g, opts).map(|s| s.conj());
    }

    let start = match guess {
        Some(w) if w.im >= z.im && w.re.is_finite() => w,
        _ => cold_start(mu_a, mu_b, z),
    };
    let first = opts.max_iter.min(FIRST_BUDGET);
    let (cur, iterations) = match iterate(mu_a, mu_b, z, eval(mu_a, mu_b, z, start), first, opts.tol) {
        Ok(done) => done,
        Err((stalled, n)) => {
            let rest = opts.max_iter - n;
            let swapped = eval(mu_b, mu_a, z, cold_start(mu_a, mu_b, z));
            match iterate(mu_b, mu_a, z, swapped, rest.min(FIRST_BUDGET), opts.tol) {
                Ok((e, k)) => (
                    Eval { wa: e.wb, wb: e.wa, phi: e.phi, r: e.r, dfa: e.dfb, dfb: e.dfa },
                    n + k,
                ),
                Err((_, k)) => match iterate(mu_a, mu_b, z, stalled, rest - k, opts.tol) {
                    Ok((e, j)) => (e, n + k + j),
                    Err((e, j)) => {
                        return Err(Error::NonConvergence {
                            iterations: n + k + j,
                            residual: e.r,
                        })
                    }
                },
            }
        }
    };

    let m_fc = mu_a.resolvent_sums::<1>(cur.wb)[0];
    let delta = 1.0 - (cur.dfa - 1.0) * (cur.dfb - 1.0);
    let nan = Complex64::new(f64::NAN, f64::NAN);
    Ok(SubordinationState {
        z,
        omega_a: cur.wa,
        omega_b: cur.wb,
        m_fc,
        delta,
        omega_a_prime: nan,
        omega_b_prime: nan,
        m_fc_prime: nan,
        residual: residual(mu_a, mu_b, z, cur.wa, cur.wb),
        iterations,
    })
}

/// Runs the eliminated iteration in `ω_A` for at most `budget` steps.
fn iterate(
    mu_a: &EmpiricalMeasure,
    mu_b: &EmpiricalMeasure,
    z: Complex64,
    mut cur: Eval,
    budget: usize,
    tol: f64,
) -> std::result::Result<(Eval, usize), (Eval, usize)> {
    let mut iterations = 0;
    while cur.r > tol {
        if iterations >= budget {
            return Err((cur, iterations));
        }
        iterations += 1;
        let step = cur.phi;
        let mut t = 1.0;
        let mut next = eval(mu_a, mu_b, z, cur.wa + step);
        let mut halvings = 0;
        while !(next.r <= cur.r) && halvings < MAX_HALVINGS {
            t *= 0.5;
            halvings += 1;
            next = eval(mu_a, mu_b, z, cur.wa + step * t);
        }
        if let Some(e) = newton_step(mu_a, mu_b, z, &cur) {
            if !(next.r <= e.r) {
                next = e;
            }
        }
        cur = next;
    }
    Ok((cur, iterations))
}

/// `z + iσ` with `σ² = Var μ_A + Var μ_B`, away from the poles of both transforms.
fn cold_start(mu_a: &EmpiricalMeasure, mu_b: &EmpiricalMeasure, z: Complex64) -> Complex64 {
    let var = |mu: &EmpiricalMeasure| {
        let c = mu.mean();
        mu.atoms().iter().zip(mu.weights()).map(|(a, w)| w * (a - c) * (a - c)).sum::<f64>()
    };
    let sigma = (var(mu_a) + var(mu_b)).sqrt();
    z + Complex64::new(0.0, if sigma > 0.0 { sigma } else { 1.0 })
}

/// Newton on `Φ(ω_A) = F_A(ω_B) − F_B(ω_A)` with `Φ' = −Δ`, backtracking until the defect drops.
fn newton_step(mu_a: &EmpiricalMeasure, mu_b: &EmpiricalMeasure, z: Complex64, cur: &Eval) -> Option<Eval> {
    let delta = 1.0 - (cur.dfa - 1.0) * (cur.dfb - 1.0);
    let dir = cur.phi / delta;
    if !(dir.re.is_finite() && dir.im.is_finite()) {
        return None;
    }
    let mut t = 1.0;
    for _ in 0..=MAX_HALVINGS {
        let cand = cur.wa + dir * t;
        if cand.im >= z.im {
            let e = eval(mu_a, mu_b, z, cand);
            if e.wb.im >= z.im && e.r < cur.r {
                return Some(e);
            }
        }
        t *= 0.5;
    }
    None
}

/// `max(|F_A(ω_B) − F_B(ω_A)|, |ω_A + ω_B − z − F_A(ω_B)|) / max(1, |ω_A|, |ω_B|)`, recomputed from scratch.
pub fn residual(
    mu_a: &EmpiricalMeasure,
    mu_b: &EmpiricalMeasure,
    z: Complex64,
    omega_a: Complex64,
    omega_b: Complex64,
) -> f64 {
    let fa = -mu_a.resolvent_sums::<1>(omega_b)[0].inv();
    let fb = -mu_b.resolvent_sums::<1>(omega_a)[0].inv();
    (fa - fb).norm().max((omega_a + omega_b - z - fa).norm()) / scale(omega_a, omega_b)
}

/// Fills `ω'_A`, `ω'_B` and `m'_fc` from the linearised system.
pub fn derivatives(
    state: &SubordinationState,
    mu_a: &EmpiricalMeasure,
    mu_b: &EmpiricalMeasure,
) -> Result<SubordinationState> {
    let delta = state.delta;
    if !(delta.norm() >= DELTA_FLOOR) {
        return Err(Error::DegenerateJacobian { delta: delta.norm() });
    }
    let dma = mu_a.resolvent_sums::<2>(state.omega_b)[1];
    let dmb = mu_b.resolvent_sums::<2>(state.omega_a)[1];
    let scale = (delta * state.m_fc * state.m_fc).inv();
    let mut out = *state;
    out.omega_a_prime = dma * scale;
    out.omega_b_prime = dmb * scale;
    out.m_fc_prime = out.omega_b_prime * dma;
    Ok(out)
}

/// `Σ w/((x − u)^p (x − v)^q)` for `(p, q)` in `(1,1), (2,1), (1,2), (2,2)`.
pub fn pair_sums(mu: &EmpiricalMeasure, u: Complex64, v: Complex64) -> [Complex64; 4] {
    let mut out = [Complex64::new(0.0, 0.0); 4];
    for (&x, &w) in mu.atoms().iter().zip(mu.weights()) {
        let du = Complex64::new(x - u.re, -u.im).inv();
        let dv = Complex64::new(x - v.re, -v.im).inv();
        let s11 = du * dv * w;
        out[0] += s11;
        out[1] += s11 * du;
        out[2] += s11 * dv;
        out[3] += s11 * du * dv;
    }
    out
}

pub fn two_point(
    mu_a: &EmpiricalMeasure,
    mu_b: &EmpiricalMeasure,
    s1: &SubordinationState,
    s2: &SubordinationState,
) -> TwoPointState {
    let l_a = pair_sums(mu_b, s1.omega_a, s2.omega_a)[0];
    let l_b = pair_sums(mu_a, s1.omega_b, s2.omega_b)[0];
    let mm = s1.m_fc * s2.m_fc;
    TwoPointState {
        z1: s1.z,
        z2: s2.z,
        l_a,
        l_b,
        delta2: 1.0 - (l_a / mm - 1.0) * (l_b / mm - 1.0),
        t_a: (s1.z - s1.omega_a) * s1.m_fc - (s2.z - s2.omega_a) * s2.m_fc,
        t_b: (s1.z - s1.omega_b) * s1.m_fc - (s2.z - s2.omega_b) * s2.m_fc,
    }
}

/// `Im m_fc(E + iη)/π`
pub fn density(mu_a: &EmpiricalMeasure, mu_b: &EmpiricalMeasure, energy: f64, eta_probe: f64) -> Result<f64> {
    if !(eta_probe > 0.0) {
        return Err(Error::InvalidArgument("eta_probe must be positive".into()));
    }
    let s = solve_subordination(mu_a, mu_b, Complex64::new(energy, eta_probe), &SolverOptions::default())?;
    Ok(s.density())
}

/// `∫ ρ_fc` over `interval` by adaptive Gauss-Kronrod.
pub fn density_mass(
    mu_a: &EmpiricalMeasure,
    mu_b: &EmpiricalMeasure,
    interval: (f64, f64),
    eta_probe: f64,
    tol: f64,
) -> Result<f64> {
    let mut err = None;
    let cells = ((interval.1 - interval.0) / 0.05).ceil().max(1.0) as usize;
    let breaks: Vec<f64> = (0..=cells)
        .map(|k| interval.0 + (interval.1 - interval.0) * k as f64 / cells as f64)
        .collect();
    let (v, _) = quadrature::adaptive(
        |e| match density(mu_a, mu_b, e, eta_probe) {
            Ok(d) => d,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        &breaks,
        tol,
        0.0,
        200_000,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// One row of a bulk scan or grid export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub energy: f64,
    pub eta: f64,
    pub state: SubordinationState,
    pub density: f64,
    pub abs_f: f64,
    pub abs_delta: f64,
    pub abs_m_prime: f64,
    pub in_bulk: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkScan {
    pub intervals: Vec<(f64, f64)>,
    pub points: Vec<GridPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BulkCriteria {
    pub rho_min: f64,
    pub f_min: f64,
    pub delta_min: f64,
    pub eta_probe: f64,
}

impl Default for BulkCriteria {
    fn default() -> Self {
        Self {
            rho_min: 1e-3,
            f_min: 1e-3,
            delta_min: 1e-4,
            eta_probe: DEFAULT_ETA_PROBE,
        }
    }
}

/// Evaluates the state along `E + iη` for `E` on a uniform grid, warm starting each point.
pub fn grid(
    mu_a: &EmpiricalMeasure,
    mu_b: &EmpiricalMeasure,
    interval: (f64, f64),
    step: f64,
    eta: f64,
    opts: &SolverOptions,
) -> Result<Vec<SubordinationState>> {
    if !(step > 0.0) || !(interval.1 >= interval.0) {
        return Err(Error::InvalidArgument("grid needs step > 0 and lo <= hi".into()));
    }
    let count = ((interval.1 - interval.0) / step + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(count);
    let mut guess = None;
    for k in 0..count {
        let z = Complex64::new(interval.0 + k as f64 * step, eta);
        let s = solve_from(mu_a, mu_b, z, guess, opts)
            .or_else(|_| solve_from(mu_a, mu_b, z, None, opts))?;
        guess = Some(s.omega_a);
        out.push(derivatives(&s, mu_a, mu_b).unwrap_or(s));
    }
    Ok(out)
}

/// Maximal grid intervals where density, `|F_fc|` and `|Δ|` clear their thresholds.
pub fn bulk_scan(
    mu_a: &EmpiricalMeasure,
    mu_b: &EmpiricalMeasure,
    interval: (f64, f64),
    grid_step: f64,
    criteria: &BulkCriteria,
) -> Result<BulkScan> {
    let states = grid(mu_a, mu_b, interval, grid_step, criteria.eta_probe, &SolverOptions::default())?;
    let points: Vec<GridPoint> = states
        .into_iter()
        .map(|s| {
            let density = s.density();
            let abs_f = s.f_fc().norm();
            let abs_delta = s.delta.norm();
            GridPoint {
                energy: s.z.re,
                eta: s.z.im,
                state: s,
                density,
                abs_f,
                abs_delta,
                abs_m_prime: s.m_fc_prime.norm(),
                in_bulk: density >= criteria.rho_min && abs_f >= criteria.f_min && abs_delta >= criteria.delta_min,
            }
        })
        .collect();
    let mut intervals = Vec::new();
    let mut open: Option<f64> = None;
    let mut last = 0.0;
    for p in &points {
        match (p.in_bulk, open) {
            (true, None) => open = Some(p.energy),
            (false, Some(s)) => {
                intervals.push((s, last));
                open = None;
            }
            _ => {}
        }
        last = p.energy;
    }
    if let Some(s) = open {
        intervals.push((s, last));
    }
    Ok(BulkScan { intervals, points })
}

impl BulkScan {
    pub fn contains(&self, e: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= e && e <= b)
    }
}

pub const GRID_CSV_HEADER: &str =
    "E,eta,re_omega_a,im_omega_a,re_omega_b,im_omega_b,re_m_fc,im_m_fc,re_delta,im_delta,density";

pub fn grid_csv_row(s: &SubordinationState) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        s.z.re,
        s.z.im,
        s.omega_a.re,
        s.omega_a.im,
        s.omega_b.re,
        s.omega_b.im,
        s.m_fc.re,
        s.m_fc.im,
        s.delta.re,
        s.delta.im,
        s.density()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{quantile_discretize, Family};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn semi(n: usize) -> EmpiricalMeasure {
        quantile_discretize(Family::Semicircle, &[1.0], n).unwrap()
    }

    #[test]
    fn identity_summand() {
        let b = semi(50);
        let d0 = EmpiricalMeasure::point_mass(0.0);
        let z = c(0.0, 1.0);
        let s = solve(&d0, &b, z, &SolverOptions::default()).unwrap();
        assert!((s.omega_a - z).norm() < 1e-12);
        assert!((s.omega_b - b.f_transform(z).unwrap()).norm() < 1e-12);
        assert!((s.m_fc - b.stieltjes_transform(z).unwrap()).norm() < 1e-12);
        assert!((s.delta - 1.0).norm() < 1e-12);
        assert!((s.omega_a_prime - 1.0).norm() < 1e-10);
    }

    #[test]
    fn shifted_summand() {
        let b = semi(40);
        let cshift = 0.7;
        let a = EmpiricalMeasure::point_mass(cshift);
        let z = c(0.2, 0.5);
        let s = solve_subordination(&a, &b, z, &SolverOptions::default()).unwrap();
        assert!((s.omega_a - (z - cshift)).norm() < 1e-12);
        assert!((s.m_fc - b.stieltjes_transform(z - cshift).unwrap()).norm() < 1e-12);
        let s = solve_subordination(&b, &a, z, &SolverOptions::default()).unwrap();
        assert!((s.omega_b - (z - cshift)).norm() < 1e-12);
    }

    #[test]
    fn arcsine_at_i() {
        let b = EmpiricalMeasure::bernoulli();
        let s = solve(&b, &b, c(0.0, 1.0), &SolverOptions::default()).unwrap();
        assert!((s.m_fc - c(0.0, 1.0 / 5f64.sqrt())).norm() < 1e-12);
        assert!(s.residual <= 1e-12);
    }

    #[test]
    fn lower_half_plane_is_conjugate() {
        let a = semi(30);
        let b = quantile_discretize(Family::UniformInterval, &[-1.0, 1.0], 30).unwrap();
        let z = c(0.4, 0.2);
        let up = solve(&a, &b, z, &SolverOptions::default()).unwrap();
        let down = solve(&a, &b, z.conj(), &SolverOptions::default()).unwrap();
        assert_eq!(down, up.conj());
    }

    #[test]
    fn nonconvergence_reported() {
        let a = semi(30);
        let opts = SolverOptions { tol: 1e-12, max_iter: 1 };
        match solve_subordination(&a, &a, c(0.1, 0.01), &opts) {
            Err(Error::NonConvergence { iterations, .. }) => assert_eq!(iterations, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_point_diagonal() {
        let a = semi(60);
        let b = semi(60);
        let s = solve(&a, &b, c(0.3, 0.05), &SolverOptions::default()).unwrap();
        let tp = two_point(&a, &b, &s, &s);
        assert!((tp.delta2 - s.delta).norm() < 1e-12);
        assert!((tp.l_b - a.stieltjes_derivative(s.omega_b).unwrap()).norm() < 1e-12);
        let sc = s.conj();
        let tp = two_point(&a, &b, &s, &sc);
        assert!(tp.l_b.im.abs() < 1e-14 && tp.l_b.re > 0.0);
    }

    #[test]
    fn arcsine_density() {
        let b = EmpiricalMeasure::bernoulli();
        let rho = density(&b, &b, 0.0, DEFAULT_ETA_PROBE).unwrap();
        assert!((rho - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-7);
    }

    #[test]
    fn identity_density_vanishes_outside() {
        let b = semi(20);
        let d0 = EmpiricalMeasure::point_mass(0.0);
        assert!(density(&d0, &b, 5.0, 1e-7).unwrap() < 1e-7);
    }
}
