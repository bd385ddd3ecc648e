//! Quantile discretisation of reference laws and the Lévy distance.

use freesum::measures::{levy_distance, quantile_discretize, EmpiricalMeasure, Family};
use freesum::Result;

fn main() -> Result<()> {
    for (family, params) in [
        (Family::Semicircle, vec![1.0]),
        (Family::MarchenkoPastur, vec![0.5, 1.0]),
        (Family::UniformInterval, vec![-1.0, 1.0]),
    ] {
        let coarse = quantile_discretize(family, &params, 100)?;
        let fine = quantile_discretize(family, &params, 1600)?;
        println!(
            "{family:?}: support {:?}, mean {:.1e}, Lévy distance 100 vs 1600 atoms = {:.2e}",
            fine.support(),
            fine.mean(),
            levy_distance(&coarse, &fine)
        );
    }
    let mu = EmpiricalMeasure::new(vec![-1.0, 0.0, 2.0], vec![0.25, 0.5, 0.25])?;
    println!("\n{}", mu.to_json());
    println!("F(1 + i) = {:.6}", mu.f_transform(freesum::Complex64::new(1.0, 1.0))?);
    Ok(())
}
