//! Haar unitary and orthogonal sampling and the one-column decomposition.

use freesum::random_matrix::{
    decompose_haar, orthogonality_defect, sample_haar_orthogonal, sample_haar_unitary, unitarity_defect,
};
use freesum::Result;

fn main() -> Result<()> {
    let n = 64;
    let u = sample_haar_unitary(n, 11);
    let o = sample_haar_orthogonal(n, 11);
    println!("unitarity defect {:.2e}, orthogonality defect {:.2e}", unitarity_defect(&u), orthogonality_defect(&o));

    let mut worst: f64 = 0.0;
    for i in 0..n {
        let d = decompose_haar(&u, i)?;
        let r = d.reconstruct();
        for p in 0..n {
            for q in 0..n {
                worst = worst.max((r[(p, q)] - u[(p, q)]).norm());
            }
        }
    }
    println!("worst reconstruction error over all columns: {worst:.2e}");

    let samples = 2000;
    let mean: f64 = (0..samples)
        .map(|s| sample_haar_unitary(8, s as u64)[(2, 5)].norm_sqr())
        .sum::<f64>()
        / samples as f64;
    println!("mean |U_25|^2 at N = 8 over {samples} samples: {mean:.4} (1/N = 0.125)");
    Ok(())
}
