use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const KS_MIN_SAMPLES: usize = 20;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn sample_variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Centres by the sample mean and scales by the sample standard deviation.
pub fn standardize(x: &[f64]) -> Result<Vec<f64>> {
    let sd = sample_variance(x).sqrt();
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let m = mean(x);
    Ok(x.iter().map(|v| (v - m) / sd).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.18 {
        let c = -PI * PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=20).map(|k| ((2 * k - 1) as f64).powi(2) * c).map(f64::exp).sum();
        1.0 - (2.0 * PI).sqrt() / lambda * s
    } else {
        2.0 * (1..=20)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
            })
            .sum::<f64>()
    };
    q.clamp(0.0, 1.0)
}

/// One-sample KS test of already standardised values against `N(0, 1)`.
pub fn ks_normality(standardized: &[f64]) -> Result<KsResult> {
    let n = standardized.len();
    if n < KS_MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: KS_MIN_SAMPLES,
            got: n,
        });
    }
    let mut x = standardized.to_vec();
    x.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = normal_cdf(v);
            ((i + 1) as f64 / nf - f).max(f - i as f64 / nf)
        })
        .fold(0.0, f64::max);
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival(nf.sqrt() * d),
    })
}

/// Two-sample KS test.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> KsResult {
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    KsResult {
        statistic: d,
        p_value: kolmogorov_survival((n * m / (n + m)).sqrt() * d),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_normal_points() {
        let m = 100;
        let x: Vec<f64> = (0..m).map(|i| normal_quantile((i as f64 + 0.5) / m as f64)).collect();
        let r = ks_normality(&x).unwrap();
        assert!(r.statistic <= 0.01, "{r:?}");
        assert!(r.p_value > 0.999);
    }

    #[test]
    fn constant_input() {
        assert!(matches!(standardize(&[3.0; 40]), Err(Error::ZeroVariance)));
        let r = ks_normality(&[0.0; 40]).unwrap();
        assert_eq!(r.statistic, 0.5);
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn too_few() {
        assert!(matches!(ks_normality(&[0.0; 19]), Err(Error::TooFewSamples { needed: 20, got: 19 })));
    }

    #[test]
    fn survival_branches_join() {
        let lo = kolmogorov_survival(1.18 - 1e-9);
        let hi = kolmogorov_survival(1.18 + 1e-9);
        assert!((lo - hi).abs() < 1e-8);
        // tabulated: P(K > 1.36) ≈ 0.0494
        assert!((kolmogorov_survival(1.36) - 0.0494).abs() < 5e-4);
    }
}
