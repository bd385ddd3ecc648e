use std::collections::HashSet;

use faer::{c64, Mat, Side};
use freesum::clt_harness::ks_two_sample;
use freesum::measures::{quantile_discretize, EmpiricalMeasure, Family};
use freesum::random_matrix::{
    build_sample, decompose_haar, dump_eigenvalues, green_diagnostics, load_eigenvalues, orthogonality_defect, psi,
    sample_haar_orthogonal, sample_haar_unitary, sample_seed, unitarity_defect, Conjugator, EigenvalueSidecar,
};
use freesum::subordination::{solve, SolverOptions};
use freesum::{Beta, Complex64, Error};
use proptest::prelude::*;

fn semi(n: usize) -> Vec<f64> {
    quantile_discretize(Family::Semicircle, &[1.0], n).unwrap().atoms().to_vec()
}

fn unif(n: usize) -> Vec<f64> {
    quantile_discretize(Family::UniformInterval, &[-1.0, 1.0], n).unwrap().atoms().to_vec()
}

fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn one_by_one_haar_matrices() {
    for seed in 0..20 {
        let u = sample_haar_unitary(1, seed);
        assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-15);
        let o = sample_haar_orthogonal(1, seed);
        assert!(o[(0, 0)] == 1.0 || o[(0, 0)] == -1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn haar_matrices_are_unitary(n in 1usize..60, seed in any::<u64>()) {
        prop_assert!(unitarity_defect(&sample_haar_unitary(n, seed)) <= 1e-12);
        let o = sample_haar_orthogonal(n, seed);
        prop_assert!(orthogonality_defect(&o) <= 1e-12);
        let det = o.determinant();
        prop_assert!((det.abs() - 1.0).abs() <= 1e-10, "det {}", det);
    }

    #[test]
    fn sample_invariants(n in 2usize..40, seed in any::<u64>(), unitary in any::<bool>()) {
        let beta = if unitary { Beta::Unitary } else { Beta::Orthogonal };
        let (a, b) = (semi(n), unif(n));
        let s = build_sample(&a, &b, beta, seed, true).unwrap();
        prop_assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let trace: f64 = s.eigenvalues.iter().sum();
        let want: f64 = a.iter().sum::<f64>() + b.iter().sum::<f64>();
        prop_assert!((trace - want).abs() <= 1e-8 * n as f64);
        let bound = a.iter().fold(0f64, |m, x| m.max(x.abs())) + b.iter().fold(0f64, |m, x| m.max(x.abs()));
        prop_assert!(s.eigenvalues.iter().all(|x| x.abs() <= bound + 1e-12));
        let bt = s.b_tilde().unwrap();
        let cross: f64 = (0..n).map(|i| a[i] * bt[(i, i)].re).sum();
        let sq: f64 = s.eigenvalues.iter().map(|x| x * x).sum();
        let want_sq = a.iter().map(|x| x * x).sum::<f64>() + b.iter().map(|x| x * x).sum::<f64>() + 2.0 * cross;
        prop_assert!((sq - want_sq).abs() <= 1e-8 * n as f64);
    }

    #[test]
    fn decomposition_identities(n in 2usize..24, seed in any::<u64>()) {
        let u = sample_haar_unitary(n, seed);
        for i in 0..n {
            let d = decompose_haar(&u, i).unwrap();
            let norm: f64 = d.v_i.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() <= 1e-12);
            prop_assert!((0.0..std::f64::consts::TAU).contains(&d.theta_i));
            let r = d.reconstruct();
            for p in 0..n {
                for q in 0..n {
                    prop_assert!((r[(p, q)] - u[(p, q)]).norm() <= 1e-10);
                }
                let target = if p == i { 1.0 } else { 0.0 };
                prop_assert!((d.u_minor[(p, i)] - c64::new(target, 0.0)).norm() <= 1e-12);
            }
        }
    }
}

#[test]
fn unitary_entry_second_moment() {
    let n = 16;
    let x: Vec<f64> = (0..10_000).map(|s| sample_haar_unitary(n, sample_seed(1, s))[(0, 0)].norm_sqr()).collect();
    let (m, se) = mean_and_se(&x);
    assert!((m - 1.0 / 16.0).abs() <= 3.0 * se, "{m} ± {se}");
}

#[test]
fn orthogonal_entry_second_moment() {
    let n = 16;
    let x: Vec<f64> = (0..10_000).map(|s| sample_haar_orthogonal(n, sample_seed(2, s))[(0, 0)].powi(2)).collect();
    let (m, se) = mean_and_se(&x);
    assert!((m - 1.0 / 16.0).abs() <= 3.0 * se, "{m} ± {se}");
}

#[test]
fn first_column_is_uniform_on_the_sphere() {
    // |v₁|² of a uniform unit vector in ℂᴺ has CDF 1 − (1 − x)^{N−1}
    let n = 16;
    let mut x: Vec<f64> = (0..10_000).map(|s| sample_haar_unitary(n, sample_seed(3, s))[(0, 0)].norm_sqr()).collect();
    x.sort_by(f64::total_cmp);
    let m = x.len() as f64;
    let cdf = |t: f64| 1.0 - (1.0 - t).powi(n as i32 - 1);
    let d = x
        .iter()
        .enumerate()
        .map(|(k, &t)| (cdf(t) - k as f64 / m).abs().max(((k + 1) as f64 / m - cdf(t)).abs()))
        .fold(0f64, f64::max);
    assert!(d <= 0.02, "KS distance {d}");
}

#[test]
fn minor_is_haar_on_the_complement() {
    let n = 8;
    let i = 3;
    let mut x = Vec::new();
    for s in 0..1000 {
        let d = decompose_haar(&sample_haar_unitary(n, sample_seed(4, s)), i).unwrap();
        x.push(d.u_minor[(0, 1)].norm_sqr());
        x.push(d.u_minor[(5, 6)].norm_sqr());
    }
    let (m, se) = mean_and_se(&x);
    assert!((m - 1.0 / (n - 1) as f64).abs() <= 3.0 * se, "{m} ± {se}");
}

#[test]
fn degenerate_phase_is_rejected() {
    let mut p = Mat::<c64>::zeros(3, 3);
    p[(1, 0)] = c64::new(1.0, 0.0);
    p[(0, 1)] = c64::new(1.0, 0.0);
    p[(2, 2)] = c64::new(1.0, 0.0);
    assert!(matches!(decompose_haar(&p, 0), Err(Error::PhaseDegenerate(_))));
}

#[test]
fn trivial_summands_give_exact_spectra() {
    let a = vec![0.3, -1.0, 2.0, 0.3, 0.5];
    let zero = vec![0.0; 5];
    let mut sorted = a.clone();
    sorted.sort_by(f64::total_cmp);
    for beta in [Beta::Unitary, Beta::Orthogonal] {
        assert_eq!(build_sample(&a, &zero, beta, 9, false).unwrap().eigenvalues, sorted);
        assert_eq!(build_sample(&zero, &a, beta, 9, false).unwrap().eigenvalues, sorted);
    }
}

#[test]
fn two_by_two_matches_closed_form() {
    let a = [-1.0, 1.0];
    for seed in 0..50 {
        let s = build_sample(&a, &a, Beta::Unitary, seed, true).unwrap();
        let Some(Conjugator::Unitary(u)) = &s.conjugator else { panic!("unitary conjugator expected") };
        let ub = |i: usize, j: usize| -> Complex64 {
            let v = -u[(i, 0)] * u[(j, 0)].conj() + u[(i, 1)] * u[(j, 1)].conj();
            Complex64::new(v.re, v.im)
        };
        let h11 = -1.0 + ub(0, 0).re;
        let h22 = 1.0 + ub(1, 1).re;
        let h12 = ub(0, 1);
        let mid = 0.5 * (h11 + h22);
        let rad = (0.25 * (h11 - h22).powi(2) + h12.norm_sqr()).sqrt();
        assert!((s.eigenvalues[0] - (mid - rad)).abs() < 1e-12);
        assert!((s.eigenvalues[1] - (mid + rad)).abs() < 1e-12);
        // overlap t = 2|U₁₁|² − 1 gives ±√(2 + 2t)
        let t = 2.0 * u[(0, 0)].norm_sqr() - 1.0;
        assert!((s.eigenvalues[1] - (2.0 + 2.0 * t).sqrt()).abs() < 1e-10);
    }
}

#[test]
fn samples_are_deterministic() {
    let (a, b) = (semi(30), unif(30));
    for beta in [Beta::Unitary, Beta::Orthogonal] {
        let x = build_sample(&a, &b, beta, 77, false).unwrap().eigenvalues;
        let y = build_sample(&a, &b, beta, 77, false).unwrap().eigenvalues;
        assert_eq!(x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), y.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let z = build_sample(&a, &b, beta, 78, false).unwrap().eigenvalues;
        assert_ne!(x, z);
    }
}

#[test]
fn sample_seeds_are_distinct() {
    for master in [0u64, 1, 20240601] {
        let seeds: HashSet<u64> = (0..10_000).map(|i| sample_seed(master, i)).collect();
        assert_eq!(seeds.len(), 10_000);
    }
}

#[test]
fn zero_b_gives_exact_green_function() {
    let n = 40;
    let (a, b) = (semi(n), vec![0.0; n]);
    let mu_a = EmpiricalMeasure::from_spectrum(&a).unwrap();
    let mu_b = EmpiricalMeasure::from_spectrum(&b).unwrap();
    let z = Complex64::new(0.1, 0.05);
    let state = solve(&mu_a, &mu_b, z, &SolverOptions::default()).unwrap();
    assert!((state.omega_b - z).norm() < 1e-12);
    let s = build_sample(&a, &b, Beta::Unitary, 5, true).unwrap();
    let r = green_diagnostics(&s, &state).unwrap();
    assert!(r.max_diag_error < 1e-10, "{}", r.max_diag_error);
    assert!(r.trace_error < 1e-10);
    assert_eq!(r.psi, 1.0 / (n as f64 * 0.05).sqrt());
    assert_eq!(r.psi, psi(n, 0.05));
    for v in [r.max_diag_error, r.trace_error, r.bg_trace_error, r.y_identity] {
        assert!(v >= 0.0);
    }
}

#[test]
fn diagonal_error_follows_square_root_rate() {
    let n = 400;
    let (a, b) = (semi(n), unif(n));
    let mu_a = EmpiricalMeasure::from_spectrum(&a).unwrap();
    let mu_b = EmpiricalMeasure::from_spectrum(&b).unwrap();
    let eta = 0.2;
    let states: Vec<_> = [eta, eta / 4.0]
        .iter()
        .map(|&h| solve(&mu_a, &mu_b, Complex64::new(0.2, h), &SolverOptions::default()).unwrap())
        .collect();
    let mut ratios = Vec::new();
    for seed in 0..9 {
        let s = build_sample(&a, &b, Beta::Unitary, sample_seed(11, seed), true).unwrap();
        let hi = green_diagnostics(&s, &states[0]).unwrap().max_diag_error;
        let lo = green_diagnostics(&s, &states[1]).unwrap().max_diag_error;
        ratios.push(lo / hi);
    }
    ratios.sort_by(f64::total_cmp);
    let median = ratios[ratios.len() / 2];
    assert!((1.3..=3.0).contains(&median), "median ratio {median}");
}

#[test]
fn eigenvalue_dump_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (semi(25), unif(25));
    let s = build_sample(&a, &b, Beta::Orthogonal, 123, false).unwrap();
    dump_eigenvalues(dir.path(), "sample_00000", &s).unwrap();
    let back = load_eigenvalues(&dir.path().join("sample_00000.f64")).unwrap();
    assert_eq!(back, s.eigenvalues);
    let side: EigenvalueSidecar =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sample_00000.json")).unwrap()).unwrap();
    assert_eq!((side.n, side.beta, side.seed), (25, Beta::Orthogonal, 123));
    assert_eq!(side.mu_a_sha256.len(), 64);
    assert_ne!(side.mu_a_sha256, side.mu_b_sha256);
    std::fs::write(dir.path().join("bad.f64"), [0u8; 12]).unwrap();
    assert!(matches!(load_eigenvalues(&dir.path().join("bad.f64")), Err(Error::Schema(_))));
}

#[test]
fn spectrum_is_invariant_under_left_rotation() {
    let n = 10;
    let (a, b) = (semi(n), unif(n));
    let v = sample_haar_unitary(n, 999);
    let eig = |u: &Mat<c64>| -> Vec<f64> {
        let ub = Mat::<c64>::from_fn(n, n, |i, j| u[(i, j)] * b[j]);
        let mut h = &ub * u.adjoint();
        for i in 0..n {
            h[(i, i)] += a[i];
        }
        h.self_adjoint_eigenvalues(Side::Lower).unwrap()
    };
    let mut plain = Vec::new();
    let mut rotated = Vec::new();
    for s in 0..200 {
        plain.extend(eig(&sample_haar_unitary(n, sample_seed(21, s))));
        rotated.extend(eig(&(&v * sample_haar_unitary(n, sample_seed(22, s)))));
    }
    let ks = ks_two_sample(&plain, &rotated);
    assert!(ks.p_value >= 0.01, "{ks:?}");
}
