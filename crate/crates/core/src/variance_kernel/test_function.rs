use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn smoothstep(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let t2 = t * t;
        (
            t2 * t * (10.0 - 15.0 * t + 6.0 * t2),
            30.0 * t2 * (1.0 - t) * (1.0 - t),
            60.0 * t * (1.0 - t) * (1.0 - 2.0 * t),
        )
    }
}

/// Cutoff in the imaginary direction: 1 on `|y| ≤ 1`, 0 on `|y| ≥ 2`.
pub fn chi(y: f64) -> f64 {
    1.0 - smoothstep(y.abs() - 1.0).0
}

/// Natural cubic spline through tabulated points, zero outside the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Table", into = "Table")]
pub struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Table {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl TryFrom<Table> for Spline {
    type Error = Error;
    fn try_from(t: Table) -> Result<Self> {
        Spline::new(t.x, t.y)
    }
}

impl From<Spline> for Table {
    fn from(s: Spline) -> Table {
        Table { x: s.x, y: s.y }
    }
}

impl Spline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 3 || y.len() != n {
            return Err(Error::InvalidArgument("spline needs at least 3 matching points".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("spline abscissae must increase strictly".into()));
        }
        // tridiagonal solve for second derivatives, natural end conditions
        let mut m = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let rhs = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            let diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
            c[i] = h1 / diag;
            d[i] = (rhs - h0 * d[i - 1]) / diag;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        Ok(Self { x, y, m })
    }

    fn eval(&self, t: f64) -> (f64, f64, f64) {
        let n = self.x.len();
        if t < self.x[0] || t > self.x[n - 1] {
            return (0.0, 0.0, 0.0);
        }
        let i = self.x.partition_point(|&v| v <= t).clamp(1, n - 1) - 1;
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let v = a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 = (self.y[i + 1] - self.y[i]) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let d2 = a * m0 + b * m1;
        (v, d1, d2)
    }
}

/// Built-in profiles `g` before dilation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `e^{−x²/2}` truncated at `|x| = cutoff`
    Gaussian {
        #[serde(default = "default_cutoff")]
        cutoff: f64,
    },
    /// `exp(1 − 1/(1 − x²))` on `(−1, 1)`
    Bump,
    /// `(1 − x²)⁴` on `[−1, 1]`
    Polynomial,
    /// 1 on `|x| ≤ inner`, quintic roll-off to 0 at `|x| = outer`
    Plateau { inner: f64, outer: f64 },
    Zero,
    Tabulated(Spline),
}

fn default_cutoff() -> f64 {
    8.0
}

impl Profile {
    pub fn gaussian() -> Self {
        Profile::Gaussian { cutoff: 8.0 }
    }

    /// Value, first and second derivative.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        match self {
            Profile::Gaussian { cutoff } => {
                if x.abs() > *cutoff {
                    return (0.0, 0.0, 0.0);
                }
                let g = (-0.5 * x * x).exp();
                (g, -x * g, (x * x - 1.0) * g)
            }
            Profile::Bump => {
                if x.abs() >= 1.0 {
                    return (0.0, 0.0, 0.0);
                }
                let u = 1.0 - x * x;
                let g = (1.0 - 1.0 / u).exp();
                let p1 = -2.0 * x / (u * u);
                let p2 = -2.0 / (u * u) - 8.0 * x * x / (u * u * u);
                (g, g * p1, g * (p1 * p1 + p2))
            }
            Profile::Polynomial => {
                if x.abs() >= 1.0 {
                    return (0.0, 0.0, 0.0);
                }
                let u = 1.0 - x * x;
                (u.powi(4), -8.0 * x * u.powi(3), -8.0 * u.powi(3) + 48.0 * x * x * u * u)
            }
            Profile::Plateau { inner, outer } => {
                let w = outer - inner;
                let (s, s1, s2) = smoothstep((x.abs() - inner) / w);
                let sign = x.signum();
                (1.0 - s, -sign * s1 / w, -s2 / (w * w))
            }
            Profile::Zero => (0.0, 0.0, 0.0),
            Profile::Tabulated(s) => s.eval(x),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            Profile::Gaussian { cutoff } => (-cutoff, *cutoff),
            Profile::Bump | Profile::Polynomial => (-1.0, 1.0),
            Profile::Plateau { outer, .. } => (-outer, *outer),
            Profile::Zero => (-1.0, 1.0),
            Profile::Tabulated(s) => (s.x[0], s.x[s.x.len() - 1]),
        }
    }

    /// Points where the profile is least smooth, for aligning quadrature panels.
    pub fn breakpoints(&self) -> Vec<f64> {
        let (lo, hi) = self.support();
        let mut b = vec![lo, hi];
        match self {
            Profile::Plateau { inner, .. } => b.extend([-inner, *inner]),
            Profile::Polynomial | Profile::Bump | Profile::Gaussian { .. } => b.push(0.0),
            Profile::Tabulated(s) => b.extend(s.x.iter().copied()),
            Profile::Zero => {}
        }
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Profile::Zero)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Profile::Gaussian { cutoff } if !(*cutoff > 0.0 && cutoff.is_finite()) => {
                Err(Error::config("test_function.cutoff", "must be positive and finite"))
            }
            Profile::Plateau { inner, outer } if !(*inner >= 0.0 && outer > inner && outer.is_finite()) => {
                Err(Error::config("test_function", "plateau needs 0 <= inner < outer"))
            }
            _ => Ok(()),
        }
    }
}

/// `g(x/s)` for a profile `g` and dilation `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    #[serde(flatten)]
    pub profile: Profile,
    #[serde(default = "one")]
    pub dilation: f64,
}

fn one() -> f64 {
    1.0
}

impl From<Profile> for Shape {
    fn from(profile: Profile) -> Self {
        Shape { profile, dilation: 1.0 }
    }
}

impl Shape {
    pub fn new(profile: Profile, dilation: f64) -> Self {
        Shape { profile, dilation }
    }

    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let s = self.dilation;
        let (g, g1, g2) = self.profile.eval(x / s);
        (g, g1 / s, g2 / (s * s))
    }

    pub fn g(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    pub fn support(&self) -> (f64, f64) {
        let (lo, hi) = self.profile.support();
        (lo * self.dilation, hi * self.dilation)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.profile.breakpoints().into_iter().map(|b| b * self.dilation).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dilation > 0.0 && self.dilation.is_finite()) {
            return Err(Error::config("test_function.dilation", "must be positive"));
        }
        self.profile.validate()
    }
}

/// Mesoscopic test function `f(x) = g((x − E₀)/η₀)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub shape: Shape,
    pub e0: f64,
    pub eta0: f64,
}

impl TestFunction {
    pub fn new(shape: impl Into<Shape>, e0: f64, eta0: f64) -> Result<Self> {
        let shape = shape.into();
        shape.validate()?;
        if !(eta0 > 0.0 && eta0.is_finite() && e0.is_finite()) {
            return Err(Error::InvalidArgument(format!("need finite e0 and eta0 > 0, got {e0}, {eta0}")));
        }
        Ok(Self { shape, e0, eta0 })
    }

    /// `g` at the rescaled argument.
    pub fn g(&self, x: f64) -> f64 {
        self.shape.g(x)
    }

    /// `(f(x), f'(x))`
    pub fn f(&self, x: f64) -> (f64, f64) {
        let (g, g1, _) = self.shape.eval((x - self.e0) / self.eta0);
        (g, g1 / self.eta0)
    }

    /// Support of `f` in energy units.
    pub fn energy_support(&self) -> (f64, f64) {
        let (lo, hi) = self.shape.support();
        (self.e0 + self.eta0 * lo, self.e0 + self.eta0 * hi)
    }

    pub fn energy_breakpoints(&self) -> Vec<f64> {
        self.shape.breakpoints().into_iter().map(|b| self.e0 + self.eta0 * b).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(p: &Profile, xs: &[f64]) {
        let h = 1e-5;
        for &x in xs {
            let (_, d1, d2) = p.eval(x);
            let fd1 = (p.eval(x + h).0 - p.eval(x - h).0) / (2.0 * h);
            let fd2 = (p.eval(x + h).1 - p.eval(x - h).1) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-7, "{p:?} g' at {x}");
            assert!((d2 - fd2).abs() < 1e-6, "{p:?} g'' at {x}");
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let xs = [-0.9, -0.4, 0.1, 0.55, 0.95, 1.3, 1.7];
        fd_check(&Profile::gaussian(), &xs);
        fd_check(&Profile::Bump, &xs);
        fd_check(&Profile::Polynomial, &xs);
        fd_check(&Profile::Plateau { inner: 1.0, outer: 2.0 }, &xs);
    }

    #[test]
    fn chi_support() {
        assert_eq!(chi(0.0), 1.0);
        assert_eq!(chi(-1.0), 1.0);
        assert_eq!(chi(2.0), 0.0);
        assert_eq!(chi(-3.5), 0.0);
        assert!((chi(1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn spline_reproduces_cubic_interior() {
        let x: Vec<f64> = (0..41).map(|i| -1.0 + i as f64 * 0.05).collect();
        let y: Vec<f64> = x.iter().map(|t| (1.0 - t * t).powi(3)).collect();
        let s = Spline::new(x, y).unwrap();
        let (v, d1, _) = s.eval(0.33);
        assert!((v - (1.0f64 - 0.33 * 0.33).powi(3)).abs() < 1e-4);
        assert!((d1 - (-6.0 * 0.33 * (1.0f64 - 0.33 * 0.33).powi(2))).abs() < 1e-2);
        assert_eq!(s.eval(1.5), (0.0, 0.0, 0.0));
    }

    #[test]
    fn profile_json() {
        let s: Shape = serde_json::from_str(r#"{"kind":"gaussian"}"#).unwrap();
        assert_eq!(s, Shape::from(Profile::gaussian()));
        let s: Shape = serde_json::from_str(r#"{"kind":"plateau","inner":1,"outer":2,"dilation":0.5}"#).unwrap();
        assert_eq!(s.support(), (-1.0, 1.0));
    }
}
