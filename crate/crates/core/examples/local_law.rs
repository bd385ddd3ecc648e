//! Resolvent entries of A + UBU* against the subordination prediction.

use freesum::measures::{quantile_discretize, Family};
use freesum::random_matrix::{build_sample, green_diagnostics, psi};
use freesum::subordination::{solve, SolverOptions};
use freesum::{Beta, Complex64, Result};

fn main() -> Result<()> {
    let n = 400;
    let a = quantile_discretize(Family::Semicircle, &[1.0], n)?;
    let b = quantile_discretize(Family::UniformInterval, &[-1.0, 1.0], n)?;
    let sample = build_sample(a.atoms(), b.atoms(), Beta::Unitary, 3, true)?;
    println!("eta     Psi      max|G_ii - 1/(a_i - w_B)|  |tr G/N - m_fc|");
    for eta in [0.05, 0.1, 0.2, 0.4] {
        let s = solve(&a, &b, Complex64::new(0.3, eta), &SolverOptions::default())?;
        let r = green_diagnostics(&sample, &s)?;
        println!("{eta:<7} {:<8.4} {:<26.4e} {:.4e}", psi(n, eta), r.max_diag_error, r.trace_error);
    }
    Ok(())
}
