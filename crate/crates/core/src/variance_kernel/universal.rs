use std::f64::consts::PI;

use rustfft::{num_complex::Complex as FftComplex, FftPlanner};

use super::test_function::Shape;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::Beta;

const FFT_LEN: usize = 1 << 20;
const SAMPLES: usize = 4096;
const GL_ORDER: usize = 20;

/// Limiting variance from both the double integral and the Fourier form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniversalForms {
    pub double_integral: f64,
    pub fourier: f64,
}

impl UniversalForms {
    pub fn relative_gap(&self) -> f64 {
        let scale = self.fourier.abs().max(self.double_integral.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.fourier - self.double_integral).abs() / scale
        }
    }
}

/// Returns the Fourier value, failing if the double integral disagrees beyond `1e-4`.
pub fn universal_variance(g: &Shape, beta: Beta) -> Result<f64> {
    let forms = universal_forms(g, beta);
    if forms.relative_gap() > 1e-4 {
        return Err(Error::FormulaMismatch {
            double_integral: forms.double_integral,
            fourier: forms.fourier,
        });
    }
    Ok(forms.fourier)
}

pub fn universal_forms(g: &Shape, beta: Beta) -> UniversalForms {
    if g.profile.is_zero() {
        return UniversalForms {
            double_integral: 0.0,
            fourier: 0.0,
        };
    }
    let b = beta.value();
    UniversalForms {
        double_integral: double_integral(g) / (2.0 * b * PI * PI),
        fourier: abs_xi_energy(g) / (b * PI),
    }
}

fn panel_nodes(breaks: &[f64], max_width: f64) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(GL_ORDER);
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for w in breaks.windows(2) {
        let panels = ((w[1] - w[0]) / max_width).ceil().max(1.0) as usize;
        let h = (w[1] - w[0]) / panels as f64;
        for p in 0..panels {
            let mid = w[0] + (p as f64 + 0.5) * h;
            for (x, wt) in gx.iter().zip(&gw) {
                xs.push(mid + 0.5 * h * x);
                ws.push(0.5 * h * wt);
            }
        }
    }
    (xs, ws)
}

/// `∬ (g(x)−g(y))²/(x−y)² dx dy` over the plane.
fn double_integral(g: &Shape) -> f64 {
    let (lo, hi) = g.support();
    let margin = 0.5 * (hi - lo);
    let (l, r) = (lo - margin, hi + margin);
    let mut breaks = g.breakpoints();
    breaks.insert(0, l);
    breaks.push(r);
    let (xs, ws) = panel_nodes(&breaks, (hi - lo) / 64.0);
    let vals: Vec<(f64, f64)> = xs.iter().map(|&x| {
        let (v, d, _) = g.eval(x);
        (v, d)
    }).collect();

    let mut inside = 0.0;
    for i in 0..xs.len() {
        let mut row = 0.0;
        for j in 0..xs.len() {
            let dx = xs[i] - xs[j];
            let q = if dx.abs() < 1e-9 {
                let d = 0.5 * (vals[i].1 + vals[j].1);
                d * d
            } else {
                let q = (vals[i].0 - vals[j].0) / dx;
                q * q
            };
            row += ws[j] * q;
        }
        inside += ws[i] * row;
    }
    let outside: f64 = xs
        .iter()
        .zip(&ws)
        .zip(&vals)
        .map(|((&x, &w), &(v, _))| w * v * v * (1.0 / (r - x) + 1.0 / (x - l)))
        .sum();
    inside + 2.0 * outside
}

/// `∫ |ξ| |ĝ(ξ)|² dξ` with `ĝ(ξ) = (2π)^{-1/2} ∫ g e^{−iξx} dx`, via a padded FFT.
fn abs_xi_energy(g: &Shape) -> f64 {
    let (lo, hi) = g.support();
    let dx = (hi - lo) / SAMPLES as f64;
    let mut buf: Vec<FftComplex<f64>> = vec![FftComplex::new(0.0, 0.0); FFT_LEN];
    for (j, slot) in buf.iter_mut().take(SAMPLES + 1).enumerate() {
        *slot = FftComplex::new(g.g(lo + j as f64 * dx), 0.0);
    }
    FftPlanner::new().plan_fft_forward(FFT_LEN).process(&mut buf);
    let scale = dx * dx / (2.0 * PI);
    let power: Vec<f64> = buf[..=FFT_LEN / 2].iter().map(|c| c.norm_sqr() * scale).collect();
    let dxi = 2.0 * PI / (FFT_LEN as f64 * dx);
    let mut half: f64 = power.iter().enumerate().skip(1).map(|(k, p)| k as f64 * dxi * p).sum::<f64>() * dxi;
    // endpoint corrections for the kink of |ξ| at the origin
    let g0 = power[0];
    let g2 = 2.0 * (power[1] - power[0]) / (dxi * dxi);
    half += dxi * dxi * g0 / 12.0 - dxi.powi(4) * 3.0 * g2 / 720.0;
    2.0 * half
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variance_kernel::test_function::Profile;

    #[test]
    fn gaussian_closed_form() {
        let g = Shape::from(Profile::gaussian());
        let f = universal_forms(&g, Beta::Unitary);
        assert!((f.fourier - 1.0 / (2.0 * PI)).abs() < 1e-6, "{f:?}");
        assert!(f.relative_gap() < 1e-6, "{f:?}");
        let f1 = universal_forms(&g, Beta::Orthogonal);
        assert_eq!(f1.fourier, 2.0 * f.fourier);
    }

    #[test]
    fn zero_profile() {
        assert_eq!(universal_variance(&Shape::from(Profile::Zero), Beta::Unitary).unwrap(), 0.0);
    }
}
