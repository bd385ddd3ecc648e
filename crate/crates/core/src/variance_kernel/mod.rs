//! Deterministic predictions for mesoscopic linear statistics: the covariance
//! kernel, the contour variance, the universal limit, the bias and the
//! deterministic centring.

mod test_function;
mod universal;

pub use test_function::{chi, Profile, Shape, Spline, TestFunction};
pub use universal::{universal_forms, universal_variance, UniversalForms};

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::quadrature;
use crate::subordination::{self, pair_sums, SolverOptions, SubordinationState, TwoPointState};
use crate::Beta;

pub const DEFAULT_TAU: f64 = 0.05;
pub const DEFAULT_CONTOUR_POINTS: usize = 4096;
const ROUTE_GAP: f64 = 1e-8;
const DELTA2_FLOOR: f64 = 1e-10;

/// `(f(x) + i y f'(x)) χ(y)` at `z = x + iy`.
pub fn almost_analytic(tf: &TestFunction, z: Complex64) -> Complex64 {
    let c = chi(z.im);
    if c == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let (f, df) = tf.f(z.re);
    Complex64::new(f, z.im * df) * c
}

/// Kernel `K(z₁, z₂)`, choosing the explicit four-term form when its
/// denominators are safe and `−∂₁∂₂ log Δ(z₁, z₂)` otherwise.
pub fn kernel_k(
    mu_a: &EmpiricalMeasure,
    mu_b: &EmpiricalMeasure,
    tp: &TwoPointState,
    s1: &SubordinationState,
    s2: &SubordinationState,
) -> Result<Complex64> {
    let gaps = [
        (s1.omega_a - s2.omega_a).norm(),
        (s1.omega_b - s2.omega_b).norm(),
        (s1.m_fc - s2.m_fc).norm(),
        (s1.z - s2.z).norm(),
    ];
    if gaps.iter().all(|&g| g > ROUTE_GAP) {
        let k = kernel_four_term(s1, s2);
        if k.re.is_finite() && k.im.is_finite() {
            return Ok(k);
        }
    }
    if tp.delta2.norm() > DELTA2_FLOOR {
        let k = kernel_log_delta(mu_a, mu_b, s1, s2);
        if k.re.is_finite() && k.im.is_finite() {
            return Ok(k);
        }
    }
    Err(Error::DegenerateKernel {
        z1: s1.z.to_string(),
        z2: s2.z.to_string(),
    })
}

/// `ω'_A₁ω'_A₂/(Δω_A)² + ω'_B₁ω'_B₂/(Δω_B)² − 1/(Δz)² − m'₁m'₂/(Δm)²`
pub fn kernel_four_term(s1: &SubordinationState, s2: &SubordinationState) -> Complex64 {
    let sq = |d: Complex64| (d * d).inv();
    s1.omega_a_prime * s2.omega_a_prime * sq(s1.omega_a - s2.omega_a)
        + s1.omega_b_prime * s2.omega_b_prime * sq(s1.omega_b - s2.omega_b)
        - sq(s1.z - s2.z)
        - s1.m_fc_prime * s2.m_fc_prime * sq(s1.m_fc - s2.m_fc)
}

/// `−∂₁∂₂ log Δ(z₁, z₂)` from exact atom sums.
pub fn kernel_log_delta(
    mu_a: &EmpiricalMeasure,
    mu_b: &EmpiricalMeasure,
    s1: &SubordinationState,
    s2: &SubordinationState,
) -> Complex64 {
    let (m1, m2) = (s1.m_fc, s2.m_fc);
    let (d1, d2) = (s1.m_fc_prime, s2.m_fc_prime);
    let r = (m1 * m2).inv();
    let r1 = -d1 * r / m1;
    let r2 = -d2 * r / m2;
    let r12 = d1 * d2 * r * r;

    let factor = |sums: [Complex64; 4], w1: Complex64, w2: Complex64| {
        let l = sums[0];
        let l1 = w1 * sums[1];
        let l2 = w2 * sums[2];
        let l12 = w1 * w2 * sums[3];
        (
            l * r - 1.0,
            l1 * r + l * r1,
            l2 * r + l * r2,
            l12 * r + l1 * r2 + l2 * r1 + l * r12,
        )
    };
    let (p, p1, p2, p12) = factor(
        pair_sums(mu_b, s1.omega_a, s2.omega_a),
        s1.omega_a_prime,
        s2.omega_a_prime,
    );
    let (q, q1, q2, q12) = factor(
        pair_sums(mu_a, s1.omega_b, s2.omega_b),
        s1.omega_b_prime,
        s2.omega_b_prime,
    );
    let delta = 1.0 - p * q;
    let delta1 = -(p1 * q + p * q1);
    let delta2 = -(p2 * q + p * q2);
    let delta12 = -(p12 * q + p1 * q2 + p2 * q1 + p * q12);
    -(delta12 * delta - delta1 * delta2) / (delta * delta)
}

/// Horizontal contour lines `|Im z| = h₁` and `|Im z| = h₂ = h₁/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub tau: f64,
    pub n_points: usize,
    pub gamma1_height: f64,
    pub gamma2_height: f64,
    pub x_range: (f64, f64),
}

impl ContourSpec {
    /// Heights `N^{−τ}η₀` and half that, over the energy support of `tf`.
    ///
    /// Requires `0 < τ ≤ c₀/6` where `η₀ = N^{−c₀}`; equality is admitted
    /// up to `1e-12` so that `c₀ = 0.3, τ = 0.05` validates.
    pub fn new(n: usize, tf: &TestFunction, tau: f64, n_points: usize) -> Result<Self> {
        let c0 = inferred_c0(n, tf.eta0);
        if !(c0 > 0.0 && c0 < 1.0) {
            return Err(Error::config(
                "eta0_exponent",
                format!("need N^-1 << eta0 << 1, i.e. 0 < c0 < 1; got c0 = {c0}"),
            ));
        }
        if !(tau > 0.0 && tau <= c0 / 6.0 + 1e-12) {
            return Err(Error::config(
                "tau",
                format!("need 0 < tau < c0/6 = {}; got tau = {tau}", c0 / 6.0),
            ));
        }
        Ok(Self::with_height(tf, (n as f64).powf(-tau) * tf.eta0, tau, n_points))
    }

    /// Contour with an explicit outer height, no validation of `τ`.
    pub fn with_height(tf: &TestFunction, gamma1_height: f64, tau: f64, n_points: usize) -> Self {
        Self {
            tau,
            n_points,
            gamma1_height,
            gamma2_height: 0.5 * gamma1_height,
            x_range: tf.energy_support(),
        }
    }
}

/// `c₀` with `η₀ = N^{−c₀}`.
pub fn inferred_c0(n: usize, eta0: f64) -> f64 {
    -eta0.ln() / (n as f64).ln()
}

/// States along one horizontal line, warm started left to right.
pub fn line_states(
    mu_a: &EmpiricalMeasure,
    mu_b: &EmpiricalMeasure,
    xs: &[f64],
    height: f64,
) -> Result<Vec<SubordinationState>> {
    let opts = SolverOptions::default();
    let mut out = Vec::with_capacity(xs.len());
    let mut guess = None;
    for &x in xs {
        let z = Complex64::new(x, height);
        let s = subordination::solve_from(mu_a, mu_b, z, guess, &opts)
            .or_else(|_| subordination::solve_from(mu_a, mu_b, z, None, &opts))?;
        guess = Some(s.omega_a);
        out.push(subordination::derivatives(&s, mu_a, mu_b)?);
    }
    Ok(out)
}

/// `V(f) = −(1/(2βπ²)) ∮_{Γ₁}∮_{Γ₂} f̃(z₁) f̃(z₂) K(z₁, z₂) dz₁ dz₂` by the trapezoid rule.
///
/// Both contours run counterclockwise: the upper line right to left, the
/// lower line left to right. Lower line states are conjugates of upper ones.
pub fn contour_variance(
    tf: &TestFunction,
    contour: &ContourSpec,
    mu_a: &EmpiricalMeasure,
    mu_b: &EmpiricalMeasure,
    beta: Beta,
) -> Result<f64> {
    if tf.shape.profile.is_zero() {
        return Ok(0.0);
    }
    if !(contour.gamma1_height > 0.0 && contour.gamma2_height > 0.0) || contour.n_points < 2 {
        return Err(Error::InvalidArgument("contour heights must be positive with at least 2 points".into()));
    }
    let (lo, hi) = contour.x_range;
    let n = contour.n_points;
    let dx = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|k| lo + k as f64 * dx).collect();
    let weight = |k: usize| if k == 0 || k == n - 1 { 0.5 * dx } else { dx };

    let up1 = line_states(mu_a, mu_b, &xs, contour.gamma1_height)?;
    let up2 = line_states(mu_a, mu_b, &xs, contour.gamma2_height)?;
    let f1: Vec<Complex64> = up1.iter().map(|s| almost_analytic(tf, s.z)).collect();
    let f2: Vec<Complex64> = up2.iter().map(|s| almost_analytic(tf, s.z)).collect();
    let low2: Vec<SubordinationState> = up2.iter().map(|s| s.conj()).collect();

    let rows: Vec<Result<(Complex64, Complex64)>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut same = Complex64::new(0.0, 0.0);
            let mut cross = Complex64::new(0.0, 0.0);
            if f1[j] == Complex64::new(0.0, 0.0) {
                return Ok((same, cross));
            }
            let s1 = &up1[j];
            for k in 0..n {
                if f2[k] == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let w = weight(k);
                let kuu = pair_kernel(mu_a, mu_b, s1, &up2[k])?;
                let kul = pair_kernel(mu_a, mu_b, s1, &low2[k])?;
                same += kuu * f2[k] * w;
                cross += kul * f2[k].conj() * w;
            }
            let w = weight(j);
            Ok((same * f1[j] * w, cross * f1[j] * w))
        })
        .collect();

    let mut same = Complex64::new(0.0, 0.0);
    let mut cross = Complex64::new(0.0, 0.0);
    for r in rows {
        let (s, c) = r?;
        same += s;
        cross += c;
    }
    // dz signs: upper line −dx, lower line +dx
    let total = same + same.conj() - cross - cross.conj();
    let v = -total / (2.0 * beta.value() * PI * PI);
    if v.im.abs() > 1e-6 * v.re.abs() {
        return Err(Error::ImaginaryResidue { re: v.re, im: v.im });
    }
    Ok(v.re)
}

fn pair_kernel(
    mu_a: &EmpiricalMeasure,
    mu_b: &EmpiricalMeasure,
    s1: &SubordinationState,
    s2: &SubordinationState,
) -> Result<Complex64> {
    let k = kernel_four_term(s1, s2);
    if k.re.is_finite() && k.im.is_finite() && (s1.omega_a - s2.omega_a).norm() > ROUTE_GAP
        && (s1.omega_b - s2.omega_b).norm() > ROUTE_GAP
        && (s1.m_fc - s2.m_fc).norm() > ROUTE_GAP
    {
        return Ok(k);
    }
    let tp = subordination::two_point(mu_a, mu_b, s1, s2);
    kernel_k(mu_a, mu_b, &tp, s1, s2)
}

/// `b(z) = −½(2/β − 1) Δ'(z)/Δ(z)`.
pub fn bias_b(
    s: &SubordinationState,
    beta: Beta,
    mu_a: &EmpiricalMeasure,
    mu_b: &EmpiricalMeasure,
) -> Result<Complex64> {
    if s.delta.norm() < subordination::DELTA_FLOOR {
        return Err(Error::DegenerateJacobian { delta: s.delta.norm() });
    }
    let s = if s.has_derivatives() { *s } else { subordination::derivatives(s, mu_a, mu_b)? };
    let prefactor = 2.0 / beta.value() - 1.0;
    if prefactor == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let f_derivs = |mu: &EmpiricalMeasure, w: Complex64| {
        let [m, d1, d2] = mu.resolvent_sums::<3>(w);
        let (m1, m2) = (d1, 2.0 * d2);
        let fp = m1 / (m * m);
        let fpp = m2 / (m * m) - 2.0 * m1 * m1 / (m * m * m);
        (fp, fpp)
    };
    let (fa1, fa2) = f_derivs(mu_a, s.omega_b);
    let (fb1, fb2) = f_derivs(mu_b, s.omega_a);
    let ddelta = -(fa2 * s.omega_b_prime * (fb1 - 1.0) + (fa1 - 1.0) * fb2 * s.omega_a_prime);
    Ok(-0.5 * prefactor * ddelta / s.delta)
}

/// `N ∫ g((E − E₀)/η₀) ρ_fc(E) dE` by adaptive Gauss-Kronrod, relative tolerance `1e-8`.
pub fn expected_statistic(
    tf: &TestFunction,
    mu_a: &EmpiricalMeasure,
    mu_b: &EmpiricalMeasure,
    n: usize,
    eta_probe: f64,
) -> Result<f64> {
    if tf.shape.profile.is_zero() {
        return Ok(0.0);
    }
    let mut breaks = tf.energy_breakpoints();
    let (lo, hi) = tf.energy_support();
    let cells = 16;
    for k in 1..cells {
        breaks.push(lo + (hi - lo) * k as f64 / cells as f64);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut err = None;
    let (v, _) = quadrature::adaptive(
        |e| {
            let g = tf.g((e - tf.e0) / tf.eta0);
            if g == 0.0 {
                return 0.0;
            }
            match subordination::density(mu_a, mu_b, e, eta_probe) {
                Ok(rho) => g * rho,
                Err(x) => {
                    err.get_or_insert(x);
                    0.0
                }
            }
        },
        &breaks,
        1e-15,
        1e-8,
        20_000,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(n as f64 * v),
    }
}

/// Gaussian characteristic function `exp(−λ² v/2)`.
pub fn predicted_char_function(v: f64, lambda: f64) -> Complex64 {
    Complex64::new((-0.5 * lambda * lambda * v).exp(), 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{quantile_discretize, Family};

    fn semi(n: usize) -> EmpiricalMeasure {
        quantile_discretize(Family::Semicircle, &[1.0], n).unwrap()
    }

    fn state(a: &EmpiricalMeasure, b: &EmpiricalMeasure, z: Complex64) -> SubordinationState {
        subordination::solve(a, b, z, &SolverOptions::default()).unwrap()
    }

    #[test]
    fn almost_analytic_examples() {
        let tf = TestFunction::new(Profile::gaussian(), 0.0, 0.1).unwrap();
        let v = almost_analytic(&tf, Complex64::new(0.05, 0.0));
        assert_eq!(v.im, 0.0);
        assert!((v.re - (-0.125f64).exp()).abs() < 1e-15);
        assert_eq!(almost_analytic(&tf, Complex64::new(0.0, 2.0)), Complex64::new(0.0, 0.0));
        assert_eq!(almost_analytic(&tf, Complex64::new(0.9, 0.01)), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn identity_summand_kernel_vanishes() {
        let b = semi(80);
        let d0 = EmpiricalMeasure::point_mass(0.0);
        let s1 = state(&d0, &b, Complex64::new(0.1, 0.2));
        let s2 = state(&d0, &b, Complex64::new(-0.3, -0.1));
        let tp = subordination::two_point(&d0, &b, &s1, &s2);
        let k = kernel_k(&d0, &b, &tp, &s1, &s2).unwrap();
        assert!(k.norm() < 1e-9, "{k}");
    }

    #[test]
    fn routes_agree() {
        let a = semi(100);
        let b = semi(100);
        let s1 = state(&a, &b, Complex64::new(0.2, 0.1));
        let s2 = s1.conj();
        let four = kernel_four_term(&s1, &s2);
        let logd = kernel_log_delta(&a, &b, &s1, &s2);
        assert!((four - logd).norm() <= 1e-6 * four.norm(), "{four} {logd}");
    }

    #[test]
    fn bias_examples() {
        let a = semi(60);
        let s = state(&a, &a, Complex64::new(0.1, 0.1));
        assert_eq!(bias_b(&s, Beta::Unitary, &a, &a).unwrap(), Complex64::new(0.0, 0.0));
        let d0 = EmpiricalMeasure::point_mass(0.0);
        let s = state(&d0, &a, Complex64::new(0.1, 0.1));
        assert!(bias_b(&s, Beta::Orthogonal, &d0, &a).unwrap().norm() < 1e-12);
    }

    #[test]
    fn char_function() {
        assert_eq!(predicted_char_function(0.3, 0.0), Complex64::new(1.0, 0.0));
        assert_eq!(predicted_char_function(0.0, 5.0), Complex64::new(1.0, 0.0));
        let v = predicted_char_function(1.0 / (2.0 * PI), 2.0);
        assert!((v.re - (-1.0 / PI).exp()).abs() < 1e-15);
        assert!((v.re - 0.72738).abs() < 1e-5);
    }

    #[test]
    fn zero_profile_gives_zero() {
        let a = semi(50);
        let tf = TestFunction::new(Profile::Zero, 0.0, 0.2).unwrap();
        let contour = ContourSpec::new(1000, &tf, 0.02, 64).unwrap();
        assert_eq!(contour_variance(&tf, &contour, &a, &a, Beta::Unitary).unwrap(), 0.0);
        assert_eq!(expected_statistic(&tf, &a, &a, 50, 1e-7).unwrap(), 0.0);
    }

    #[test]
    fn tau_rule() {
        let n = 1000usize;
        let eta0 = (n as f64).powf(-0.3);
        let tf = TestFunction::new(Profile::gaussian(), 0.0, eta0).unwrap();
        assert!(ContourSpec::new(n, &tf, 0.05, 64).is_ok());
        assert!(matches!(ContourSpec::new(n, &tf, 0.06, 64), Err(Error::ConfigInvalid { .. })));
        assert!(ContourSpec::new(n, &tf, 0.0, 64).is_err());
    }
}
