//! Density of free additive convolutions from the subordination solver.

use freesum::measures::{quantile_discretize, EmpiricalMeasure, Family};
use freesum::subordination::{self, SolverOptions};
use freesum::{Complex64, Result};

fn main() -> Result<()> {
    let b = EmpiricalMeasure::bernoulli();
    let s = subordination::solve(&b, &b, Complex64::new(0.0, 1.0), &SolverOptions::default())?;
    println!("Bernoulli pair: m_fc(i) = {:.9}  (1/sqrt 5 = {:.9})", s.m_fc, 1.0 / 5f64.sqrt());

    println!("\nE        arcsine density   closed form");
    for e in [0.0, 0.5, 1.0, 1.5, 1.9] {
        let rho = subordination::density(&b, &b, e, 1e-7)?;
        let exact = 1.0 / (std::f64::consts::PI * (4.0 - e * e).sqrt());
        println!("{e:<8} {rho:<17.9} {exact:.9}");
    }

    let sc = quantile_discretize(Family::Semicircle, &[1.0], 200)?;
    let rho0 = subordination::density(&sc, &sc, 0.0, 1e-7)?;
    println!(
        "\nsemicircle pair, 200 atoms each: rho(0) = {rho0:.6}, semicircle of variance 2 gives {:.6}",
        1.0 / (std::f64::consts::PI * 2f64.sqrt())
    );
    let mass = subordination::density_mass(&sc, &sc, (-3.5, 3.5), 1e-7, 1e-8)?;
    println!("total mass = {mass:.8}");
    Ok(())
}
