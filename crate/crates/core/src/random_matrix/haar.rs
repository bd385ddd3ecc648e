use faer::{c64, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Per-sample seed derived from a master seed, independent of scheduling.
pub fn sample_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Haar unitary from the QR factorisation of a complex Ginibre matrix,
/// columns rotated by the phases of `diag(R)`.
pub fn sample_haar_unitary(n: usize, seed: u64) -> Mat<c64> {
    let mut rng = rng(seed);
    let g = Mat::<c64>::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        c64::new(re, im)
    });
    let qr = g.qr();
    let mut q = qr.compute_Q();
    let r = qr.R();
    for k in 0..n {
        let d = r[(k, k)];
        let nd = d.norm();
        let phase = if nd > 0.0 { d / nd } else { c64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, k)] *= phase;
        }
    }
    q
}

/// Haar orthogonal matrix, real analogue of [`sample_haar_unitary`] with sign correction.
pub fn sample_haar_orthogonal(n: usize, seed: u64) -> Mat<f64> {
    let mut rng = rng(seed);
    let g = Mat::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let mut q = qr.compute_Q();
    let r = qr.R();
    for k in 0..n {
        if r[(k, k)] < 0.0 {
            for i in 0..n {
                q[(i, k)] = -q[(i, k)];
            }
        }
    }
    q
}

/// `max |U*U − I|` entrywise.
pub fn unitarity_defect(u: &Mat<c64>) -> f64 {
    let p = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for j in 0..p.ncols() {
        for i in 0..p.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((p[(i, j)] - c64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// `max |OᵀO − I|` entrywise.
pub fn orthogonality_defect(o: &Mat<f64>) -> f64 {
    let p = o.transpose() * o;
    let mut worst: f64 = 0.0;
    for j in 0..p.ncols() {
        for i in 0..p.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((p[(i, j)] - target).abs());
        }
    }
    worst
}

pub fn to_complex(o: &Mat<f64>) -> Mat<c64> {
    Mat::from_fn(o.nrows(), o.ncols(), |i, j| c64::new(o[(i, j)], 0.0))
}

/// `U = −e^{iθ} (I − r r*) U⁽ⁱ⁾` splitting off column `i`.
#[derive(Debug, Clone)]
pub struct HaarDecomposition {
    pub i: usize,
    pub v_i: Vec<c64>,
    pub theta_i: f64,
    pub r_i: Vec<c64>,
    pub u_minor: Mat<c64>,
}

impl HaarDecomposition {
    /// `−e^{iθ}(I − r r*) U⁽ⁱ⁾`
    pub fn reconstruct(&self) -> Mat<c64> {
        let phase = -c64::from_polar(1.0, self.theta_i);
        let mut out = reflect(&self.r_i, &self.u_minor);
        for x in out.col_iter_mut() {
            for v in x.iter_mut() {
                *v *= phase;
            }
        }
        out
    }
}

/// `(I − r r*) M`
fn reflect(r: &[c64], m: &Mat<c64>) -> Mat<c64> {
    let n = m.nrows();
    let mut out = m.clone();
    for j in 0..m.ncols() {
        let mut dot = c64::new(0.0, 0.0);
        for k in 0..n {
            dot += r[k].conj() * m[(k, j)];
        }
        for k in 0..n {
            out[(k, j)] -= r[k] * dot;
        }
    }
    out
}

pub fn decompose_haar(u: &Mat<c64>, i: usize) -> Result<HaarDecomposition> {
    let n = u.nrows();
    if u.ncols() != n || i >= n {
        return Err(Error::InvalidArgument(format!("index {i} outside a {n}x{} matrix", u.ncols())));
    }
    let v_i: Vec<c64> = (0..n).map(|k| u[(k, i)]).collect();
    let vii = v_i[i];
    if vii.norm() < 1e-14 {
        return Err(Error::PhaseDegenerate(vii.norm()));
    }
    let theta_i = vii.arg().rem_euclid(std::f64::consts::TAU);
    let rot = c64::from_polar(1.0, -theta_i);
    let mut r_i: Vec<c64> = v_i.iter().map(|v| v * rot).collect();
    r_i[i] += 1.0;
    let norm = r_i.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let s = std::f64::consts::SQRT_2 / norm;
    for x in r_i.iter_mut() {
        *x *= s;
    }
    let mut u_minor = reflect(&r_i, u);
    let phase = -rot;
    for x in u_minor.col_iter_mut() {
        for v in x.iter_mut() {
            *v *= phase;
        }
    }
    Ok(HaarDecomposition {
        i,
        v_i,
        theta_i,
        r_i,
        u_minor,
    })
}
