//! Bias function b(z) for orthogonal conjugation.

use freesum::measures::{quantile_discretize, Family};
use freesum::subordination::{solve, SolverOptions};
use freesum::variance_kernel::bias_b;
use freesum::{Beta, Complex64, Result};

fn main() -> Result<()> {
    let a = quantile_discretize(Family::Semicircle, &[1.0], 400)?;
    let b = quantile_discretize(Family::UniformInterval, &[-1.0, 1.0], 400)?;
    println!("E       b(E + 0.01i), beta = 1");
    for e in [-1.5, -0.5, 0.0, 0.5, 1.5] {
        let s = solve(&a, &b, Complex64::new(e, 0.01), &SolverOptions::default())?;
        println!("{e:<7} {:.6}", bias_b(&s, Beta::Orthogonal, &a, &b)?);
    }
    let s = solve(&a, &b, Complex64::new(0.0, 0.01), &SolverOptions::default())?;
    println!("beta = 2 at E = 0: {}", bias_b(&s, Beta::Unitary, &a, &b)?);
    Ok(())
}
