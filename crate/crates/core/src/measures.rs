//! Atomic spectral measures and their transforms.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// A finitely supported probability measure `Σ w_i δ_{a_i}`, atoms sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct EmpiricalMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawMeasure> for EmpiricalMeasure {
    type Error = Error;
    fn try_from(raw: RawMeasure) -> Result<Self> {
        EmpiricalMeasure::new(raw.atoms, raw.weights)
    }
}

impl EmpiricalMeasure {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidMeasure("atoms must be finite".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidMeasure("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).collect();
        if pairs.windows(2).any(|p| p[0].0 > p[1].0) {
            pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        }
        let (atoms, weights) = pairs.into_iter().unzip();
        Ok(Self { atoms, weights })
    }

    /// Uniform weights `1/N` on a matrix spectrum.
    pub fn from_spectrum(values: &[f64]) -> Result<Self> {
        let w = 1.0 / values.len() as f64;
        let mut atoms = values.to_vec();
        atoms.sort_by(f64::total_cmp);
        if atoms.is_empty() || atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidMeasure("spectrum must be nonempty and finite".into()));
        }
        Ok(Self {
            weights: vec![w; atoms.len()],
            atoms,
        })
    }

    pub fn point_mass(c: f64) -> Self {
        Self {
            atoms: vec![c],
            weights: vec![1.0],
        }
    }

    /// `½(δ_{-1} + δ_{1})`
    pub fn bernoulli() -> Self {
        Self {
            atoms: vec![-1.0, 1.0],
            weights: vec![0.5, 0.5],
        }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|&x| x == w)
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    /// `|Σ w_i a_i|`, reported for user supplied measures that are not centred.
    pub fn centering_defect(&self) -> f64 {
        self.mean().abs()
    }

    pub fn support(&self) -> (f64, f64) {
        (self.atoms[0], self.atoms[self.atoms.len() - 1])
    }

    pub fn max_abs(&self) -> f64 {
        self.atoms[0].abs().max(self.atoms[self.len() - 1].abs())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.atoms.partition_point(|&a| a <= x);
        self.weights[..k].iter().sum::<f64>().min(1.0)
    }

    /// Returns `Σ w/(a−z)^(k+1)` for `k = 0..=order`, no argument checks.
    pub fn resolvent_sums<const K: usize>(&self, z: Complex64) -> [Complex64; K] {
        let mut out = [Complex64::new(0.0, 0.0); K];
        for (&a, &w) in self.atoms.iter().zip(&self.weights) {
            let d = Complex64::new(a - z.re, -z.im);
            let inv = d.inv();
            let mut p = inv * w;
            for o in out.iter_mut() {
                *o += p;
                p *= inv;
            }
        }
        out
    }

    /// `m(z) = Σ w_i/(a_i − z)`
    pub fn stieltjes_transform(&self, z: Complex64) -> Result<Complex64> {
        check_off_axis(z)?;
        Ok(self.resolvent_sums::<1>(z)[0])
    }

    /// `m'(z) = Σ w_i/(a_i − z)²`
    pub fn stieltjes_derivative(&self, z: Complex64) -> Result<Complex64> {
        check_off_axis(z)?;
        Ok(self.resolvent_sums::<2>(z)[1])
    }

    /// `F(z) = −1/m(z)`
    pub fn f_transform(&self, z: Complex64) -> Result<Complex64> {
        Ok(-self.stieltjes_transform(z)?.inv())
    }

    /// Serialises as `{"atoms":[...],"weights":[...]}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("measure serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn check_off_axis(z: Complex64) -> Result<()> {
    if z.im == 0.0 || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "spectral parameter {z} must be finite and off the real axis"
        )));
    }
    Ok(())
}

/// Reference laws available for quantile discretisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// params: `[variance]`
    Semicircle,
    /// params: `[ratio, scale]`, ratio in (0, 1]
    MarchenkoPastur,
    /// params: `[lo, hi]`
    UniformInterval,
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "semicircle" => Ok(Family::Semicircle),
            "marchenko_pastur" => Ok(Family::MarchenkoPastur),
            "uniform_interval" => Ok(Family::UniformInterval),
            other => Err(Error::InvalidArgument(format!("unknown family `{other}`"))),
        }
    }
}

/// Atoms at the `(i − ½)/n` quantiles of the named law, uniform weights, shifted to mean zero.
pub fn quantile_discretize(family: Family, params: &[f64], n: usize) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let quantile: Box<dyn Fn(f64) -> f64> = match family {
        Family::Semicircle => {
            let &[var] = params else {
                return Err(Error::InvalidArgument("semicircle takes [variance]".into()));
            };
            if !(var > 0.0 && var.is_finite()) {
                return Err(Error::InvalidArgument(format!("semicircle variance {var} must be positive")));
            }
            let r = 2.0 * var.sqrt();
            Box::new(move |p| {
                bisect(
                    |x| {
                        let t = (x / r).clamp(-1.0, 1.0);
                        0.5 + (t * (1.0 - t * t).sqrt() + t.asin()) / PI
                    },
                    -r,
                    r,
                    p,
                )
            })
        }
        Family::MarchenkoPastur => {
            let &[y, s] = params else {
                return Err(Error::InvalidArgument("marchenko_pastur takes [ratio, scale]".into()));
            };
            if !(y > 0.0 && y <= 1.0) || !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "marchenko_pastur needs 0 < ratio <= 1 and scale > 0, got [{y}, {s}]"
                )));
            }
            let mp = MarchenkoPastur::new(y, s);
            Box::new(move |p| {
                let theta = bisect(|t| mp.cdf_theta(t), 0.0, PI, p);
                mp.x(theta)
            })
        }
        Family::UniformInterval => {
            let &[lo, hi] = params else {
                return Err(Error::InvalidArgument("uniform_interval takes [lo, hi]".into()));
            };
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::InvalidArgument(format!("uniform_interval needs lo < hi, got [{lo}, {hi}]")));
            }
            Box::new(move |p| lo + (hi - lo) * p)
        }
    };
    let mut atoms: Vec<f64> = (0..n)
        .map(|i| quantile((i as f64 + 0.5) / n as f64))
        .collect();
    let mean = atoms.iter().sum::<f64>() / n as f64;
    for a in atoms.iter_mut() {
        *a -= mean;
    }
    EmpiricalMeasure::from_spectrum(&atoms)
}

fn bisect<F: Fn(f64) -> f64>(cdf: F, mut lo: f64, mut hi: f64, p: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// MP law parametrised by `x = c − h cos θ` on its support.
struct MarchenkoPastur {
    c: f64,
    h: f64,
    norm: f64,
    nodes: (Vec<f64>, Vec<f64>),
}

impl MarchenkoPastur {
    fn new(y: f64, s: f64) -> Self {
        let lo = s * (1.0 - y.sqrt()).powi(2);
        let hi = s * (1.0 + y.sqrt()).powi(2);
        Self {
            c: 0.5 * (lo + hi),
            h: 0.5 * (hi - lo),
            norm: 2.0 * PI * s * y,
            nodes: gauss_legendre(32),
        }
    }

    fn x(&self, theta: f64) -> f64 {
        self.c - self.h * theta.cos()
    }

    fn cdf_theta(&self, theta: f64) -> f64 {
        let (gx, gw) = &self.nodes;
        let panels = 8;
        let step = theta / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * step;
            for (x, w) in gx.iter().zip(gw) {
                let t = mid + 0.5 * step * x;
                let s = t.sin();
                acc += w * 0.5 * step * self.h * self.h * s * s / (self.norm * self.x(t));
            }
        }
        acc
    }
}

struct Steps {
    xs: Vec<f64>,
    cs: Vec<f64>,
}

impl Steps {
    fn new(mu: &EmpiricalMeasure) -> Self {
        let mut xs: Vec<f64> = Vec::with_capacity(mu.len());
        let mut cs: Vec<f64> = Vec::with_capacity(mu.len());
        let mut acc = 0.0;
        for (&a, &w) in mu.atoms.iter().zip(&mu.weights) {
            acc += w;
            if xs.last() == Some(&a) {
                *cs.last_mut().unwrap() = acc;
            } else {
                xs.push(a);
                cs.push(acc);
            }
        }
        *cs.last_mut().unwrap() = 1.0;
        Self { xs, cs }
    }

    fn cum(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.cs[k - 1]
        }
    }

    /// Smallest ε ≥ 0 with `F(y + ε) + ε ≥ p`.
    fn min_eps(&self, y: f64, p: f64) -> f64 {
        let s = self.xs.partition_point(|&x| x <= y);
        if self.cum(s) >= p {
            return 0.0;
        }
        let n = self.xs.len();
        let k = s + self.xs[s..n].partition_point(|&x| self.cum_before(x, s) + (x - y) <= p);
        let lo = if k == s { 0.0 } else { self.xs[k - 1] - y };
        lo.max(p - self.cum(k))
    }

    fn cum_before(&self, x: f64, s: usize) -> f64 {
        let k = s + self.xs[s..].partition_point(|&v| v < x);
        self.cum(k)
    }
}

/// Lévy distance between two atomic measures, exact over their jump sets.
pub fn levy_distance(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
    let sm = Steps::new(mu);
    let sn = Steps::new(nu);
    let one_way = |from: &Steps, to: &Steps| {
        from.xs
            .iter()
            .zip(&from.cs)
            .map(|(&y, &p)| to.min_eps(y, p))
            .fold(0.0, f64::max)
    };
    one_way(&sn, &sm).max(one_way(&sm, &sn))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn point_mass_transforms() {
        let d0 = EmpiricalMeasure::point_mass(0.0);
        assert_eq!(d0.stieltjes_transform(c(0.0, 1.0)).unwrap(), c(0.0, 1.0));
        let z = c(0.3, -0.7);
        assert!((d0.f_transform(z).unwrap() - z).norm() < 1e-15);
        let da = EmpiricalMeasure::point_mass(1.5);
        assert!((da.f_transform(z).unwrap() - (z - 1.5)).norm() < 1e-15);
    }

    #[test]
    fn bernoulli_at_2i() {
        let b = EmpiricalMeasure::bernoulli();
        assert!((b.stieltjes_transform(c(0.0, 2.0)).unwrap() - c(0.0, 0.4)).norm() < 1e-15);
        assert!((b.f_transform(c(0.0, 2.0)).unwrap() - c(0.0, 2.5)).norm() < 1e-14);
    }

    #[test]
    fn real_axis_rejected() {
        let b = EmpiricalMeasure::bernoulli();
        assert!(b.stieltjes_transform(c(0.5, 0.0)).is_err());
    }

    #[test]
    fn invalid_measures() {
        assert!(EmpiricalMeasure::new(vec![], vec![]).is_err());
        assert!(EmpiricalMeasure::new(vec![0.0], vec![0.9]).is_err());
        assert!(EmpiricalMeasure::new(vec![f64::NAN], vec![1.0]).is_err());
        assert!(EmpiricalMeasure::new(vec![0.0, 1.0], vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn sorted_on_construction() {
        let m = EmpiricalMeasure::new(vec![2.0, -1.0, 0.5], vec![0.5, 0.25, 0.25]).unwrap();
        assert_eq!(m.atoms(), &[-1.0, 0.5, 2.0]);
        assert_eq!(m.weights(), &[0.25, 0.25, 0.5]);
    }

    #[test]
    fn uniform_quantiles() {
        let m = quantile_discretize(Family::UniformInterval, &[-1.0, 1.0], 2).unwrap();
        assert_eq!(m.atoms(), &[-0.5, 0.5]);
        let s = quantile_discretize(Family::Semicircle, &[1.0], 1).unwrap();
        assert!(s.atoms()[0].abs() < 1e-15);
    }

    #[test]
    fn bad_family_params() {
        assert!(quantile_discretize(Family::Semicircle, &[0.0], 4).is_err());
        assert!(quantile_discretize(Family::Semicircle, &[1.0, 2.0], 4).is_err());
        assert!(quantile_discretize(Family::MarchenkoPastur, &[1.5, 1.0], 4).is_err());
        assert!(quantile_discretize(Family::UniformInterval, &[1.0, 1.0], 4).is_err());
        assert!("cauchy".parse::<Family>().is_err());
    }

    #[test]
    fn levy_examples() {
        let d0 = EmpiricalMeasure::point_mass(0.0);
        assert_eq!(levy_distance(&d0, &d0), 0.0);
        let dt = EmpiricalMeasure::point_mass(0.3);
        assert!((levy_distance(&d0, &dt) - 0.3).abs() < 1e-15);
        assert!((levy_distance(&d0, &EmpiricalMeasure::point_mass(4.0)) - 1.0).abs() < 1e-15);
        let half = EmpiricalMeasure::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert!((levy_distance(&half, &d0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let m = quantile_discretize(Family::Semicircle, &[1.0], 7).unwrap();
        let back = EmpiricalMeasure::from_json(&m.to_json()).unwrap();
        assert_eq!(m, back);
        assert!(EmpiricalMeasure::from_json(r#"{"atoms":[0.0],"weights":[0.5]}"#).is_err());
    }
}
