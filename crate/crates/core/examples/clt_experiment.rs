//! A small Monte Carlo run of the mesoscopic linear statistic.

use freesum::clt_harness::{run_experiment, ExperimentConfig};
use freesum::Result;

fn main() -> Result<()> {
    let cfg = ExperimentConfig {
        n: 200,
        n_samples: 100,
        workers: 4,
        ..ExperimentConfig::default()
    };
    let s = run_experiment(&cfg)?;
    println!("eta0 = {:.4}, E statistic = {:.4}", s.eta0, s.centering);
    println!(
        "variance: empirical {:.4} ± {:.4}, predicted {:.4}, universal {:.4}",
        s.empirical_variance.value,
        s.empirical_variance.se.unwrap_or(f64::NAN),
        s.predicted_variance,
        s.universal_variance
    );
    if let Some(ks) = s.ks {
        println!("KS statistic {:.4}, p = {:.3}", ks.statistic, ks.p_value);
    }
    for c in &s.char_function {
        println!("lambda {}: |phi| = {:.4}, predicted {:.4}", c.lambda, c.empirical.norm(), c.predicted.re);
    }
    Ok(())
}
