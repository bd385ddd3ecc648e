use freesum::measures::{levy_distance, quantile_discretize, EmpiricalMeasure, Family};
use freesum::{Complex64, Error};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn measure() -> impl Strategy<Value = EmpiricalMeasure> {
    prop::collection::vec((-5.0f64..5.0, 0.05f64..1.0), 1..12).prop_map(|pairs| {
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let (a, w): (Vec<f64>, Vec<f64>) = pairs.into_iter().map(|(a, w)| (a, w / total)).unzip();
        EmpiricalMeasure::new(a, w).unwrap()
    })
}

/// Twice-compensated sum of `w / (a − z)`.
fn compensated_stieltjes(mu: &EmpiricalMeasure, z: Complex64) -> Complex64 {
    let mut sum = [0.0f64; 2];
    let mut comp = [0.0f64; 2];
    for (&a, &w) in mu.atoms().iter().zip(mu.weights()) {
        let d = c(a - z.re, -z.im);
        let t = d.inv() * w;
        for (k, v) in [t.re, t.im].into_iter().enumerate() {
            let y = v - comp[k];
            let s = sum[k] + y;
            comp[k] = (s - sum[k]) - y;
            sum[k] = s;
        }
    }
    c(sum[0], sum[1])
}

fn semicircle_cdf(x: f64) -> f64 {
    let x = x.clamp(-2.0, 2.0);
    0.5 + x * (4.0 - x * x).sqrt() / (4.0 * std::f64::consts::PI) + (x / 2.0).asin() / std::f64::consts::PI
}

fn bisect(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest `ε` on a grid with `F(x − ε) − ε ≤ G(x) ≤ F(x + ε) + ε` at every probe point, both ways.
fn brute_force_levy(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, step: f64) -> f64 {
    let mut probes: Vec<f64> = Vec::new();
    for &a in mu.atoms().iter().chain(nu.atoms()) {
        for k in -2000..=2000 {
            probes.push(a + k as f64 * 1e-3);
        }
    }
    let ok = |eps: f64| {
        probes.iter().all(|&x| {
            let (f, g) = (mu.cdf(x), nu.cdf(x));
            mu.cdf(x - eps) - eps <= g + 1e-12
                && g <= mu.cdf(x + eps) + eps + 1e-12
                && nu.cdf(x - eps) - eps <= f + 1e-12
                && f <= nu.cdf(x + eps) + eps + 1e-12
        })
    };
    let mut eps = 0.0;
    while !ok(eps) {
        eps += step;
    }
    eps
}

#[test]
fn point_mass_and_bernoulli_transforms() {
    let d0 = EmpiricalMeasure::point_mass(0.0);
    assert!((d0.stieltjes_transform(c(0.0, 1.0)).unwrap() - c(0.0, 1.0)).norm() < 1e-15);
    let z = c(0.7, -1.3);
    assert!((d0.f_transform(z).unwrap() - z).norm() < 1e-15);
    let da = EmpiricalMeasure::point_mass(2.5);
    assert!((da.f_transform(z).unwrap() - (z - 2.5)).norm() < 1e-14);

    let b = EmpiricalMeasure::bernoulli();
    assert!((b.stieltjes_transform(c(0.0, 2.0)).unwrap() - c(0.0, 0.4)).norm() < 1e-15);
    assert!((b.f_transform(c(0.0, 2.0)).unwrap() - c(0.0, 2.5)).norm() < 1e-14);
}

#[test]
fn real_axis_rejected() {
    let b = EmpiricalMeasure::bernoulli();
    assert!(matches!(b.stieltjes_transform(c(0.3, 0.0)), Err(Error::InvalidArgument(_))));
}

#[test]
fn stieltjes_matches_compensated_summation() {
    let mu = quantile_discretize(Family::Semicircle, &[1.0], 100).unwrap();
    let z = c(0.0, 1.0);
    let m = mu.stieltjes_transform(z).unwrap();
    assert!((m - compensated_stieltjes(&mu, z)).norm() < 1e-14);
}

#[test]
fn quantile_examples() {
    let u = quantile_discretize(Family::UniformInterval, &[-1.0, 1.0], 2).unwrap();
    assert_eq!(u.atoms().len(), 2);
    assert!((u.atoms()[0] + 0.5).abs() < 1e-12 && (u.atoms()[1] - 0.5).abs() < 1e-12);

    let s1 = quantile_discretize(Family::Semicircle, &[1.0], 1).unwrap();
    assert!(s1.atoms()[0].abs() < 1e-12);

    let s4 = quantile_discretize(Family::Semicircle, &[1.0], 4).unwrap();
    for (k, &a) in s4.atoms().iter().enumerate() {
        let q = bisect(semicircle_cdf, (2 * k + 1) as f64 / 8.0, -2.0, 2.0);
        assert!((a - q).abs() < 1e-9, "atom {k}: {a} vs {q}");
    }
}

#[test]
fn marchenko_pastur_mean_shift() {
    // ratio 1/2, scale 1: mean 1, support [(1 − 1/√2)², (1 + 1/√2)²] before centring
    let mu = quantile_discretize(Family::MarchenkoPastur, &[0.5, 1.0], 2000).unwrap();
    assert!(mu.mean().abs() < 1e-12);
    let (lo, hi) = mu.support();
    let r = 0.5f64.sqrt();
    assert!(lo > (1.0 - r).powi(2) - 1.0 - 1e-9);
    assert!(hi < (1.0 + r).powi(2) - 1.0 + 1e-9);
    assert!(hi - lo > 0.95 * 4.0 * r);
}

#[test]
fn discretisations_converge_in_levy_distance() {
    for (family, params) in [
        (Family::Semicircle, vec![1.0]),
        (Family::MarchenkoPastur, vec![0.5, 1.0]),
        (Family::UniformInterval, vec![-1.0, 1.0]),
    ] {
        let d: Vec<f64> = [25, 50, 100, 200, 400]
            .iter()
            .map(|&n| {
                let a = quantile_discretize(family, &params, n).unwrap();
                let b = quantile_discretize(family, &params, 2 * n).unwrap();
                levy_distance(&a, &b)
            })
            .collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]), "{family:?}: {d:?}");
    }
}

#[test]
fn levy_examples() {
    let d0 = EmpiricalMeasure::point_mass(0.0);
    let dt = EmpiricalMeasure::point_mass(0.3);
    assert!((levy_distance(&d0, &dt) - 0.3).abs() < 1e-12);
    assert!((brute_force_levy(&d0, &dt, 1e-4) - 0.3).abs() < 2e-4);
    assert!((levy_distance(&d0, &EmpiricalMeasure::point_mass(4.0)) - 1.0).abs() < 1e-12);
    let half = EmpiricalMeasure::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
    assert!((levy_distance(&half, &d0) - 0.5).abs() < 1e-12);
    assert!((brute_force_levy(&half, &d0, 1e-4) - 0.5).abs() < 2e-4);
}

#[test]
fn json_round_trip_and_validation() {
    let mu = EmpiricalMeasure::new(vec![2.0, -1.0, 0.5], vec![0.2, 0.3, 0.5]).unwrap();
    let back = EmpiricalMeasure::from_json(&mu.to_json()).unwrap();
    assert_eq!(mu, back);
    assert_eq!(back.atoms(), &[-1.0, 0.5, 2.0]);
    assert!(EmpiricalMeasure::from_json(r#"{"atoms":[0,1],"weights":[0.5,0.6]}"#).is_err());
    assert!(EmpiricalMeasure::from_json(r#"{"atoms":[0,1],"weights":[1.5,-0.5]}"#).is_err());
    assert!(EmpiricalMeasure::from_json(r#"{"atoms":[0,1],"weights":[1.0]}"#).is_err());
    assert!(EmpiricalMeasure::from_json(r#"{"atoms":[],"weights":[]}"#).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn herglotz(mu in measure(), x in -8.0f64..8.0, y in 1e-3f64..10.0) {
        let z = c(x, y);
        prop_assert!(mu.stieltjes_transform(z).unwrap().im > 0.0);
        prop_assert!(mu.f_transform(z).unwrap().im >= y * (1.0 - 1e-12));
    }
}

proptest! {
    #[test]
    fn large_eta_asymptotics(mu in measure(), eta in 100.0f64..1e6) {
        let z = c(0.0, eta);
        let m = mu.stieltjes_transform(z).unwrap();
        prop_assert!((z * m + 1.0).norm() <= mu.max_abs() / eta + 1e-12);
    }

    #[test]
    fn levy_is_a_metric(a in measure(), b in measure(), c3 in measure()) {
        let (ab, ba) = (levy_distance(&a, &b), levy_distance(&b, &a));
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert!(levy_distance(&a, &a) <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!(ab <= levy_distance(&a, &c3) + levy_distance(&c3, &b) + 1e-12);
    }

    #[test]
    fn json_round_trip(mu in measure()) {
        prop_assert_eq!(EmpiricalMeasure::from_json(&mu.to_json()).unwrap(), mu);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn levy_matches_brute_force(a in measure(), b in measure()) {
        let exact = levy_distance(&a, &b);
        let brute = brute_force_levy(&a, &b, 5e-4);
        prop_assert!((exact - brute).abs() <= 1.5e-3, "{} vs {}", exact, brute);
    }
}
