//! Regular bulk intervals of a free convolution.

use freesum::measures::{quantile_discretize, EmpiricalMeasure, Family};
use freesum::subordination::{bulk_scan, BulkCriteria};
use freesum::Result;

fn main() -> Result<()> {
    let criteria = BulkCriteria::default();
    let b = EmpiricalMeasure::bernoulli();
    let scan = bulk_scan(&b, &b, (-3.0, 3.0), 0.01, &criteria)?;
    println!("Bernoulli pair: {:?}", scan.intervals);

    let mp = quantile_discretize(Family::MarchenkoPastur, &[0.5, 1.0], 300)?;
    let sc = quantile_discretize(Family::Semicircle, &[1.0], 300)?;
    let scan = bulk_scan(&mp, &sc, (-4.0, 4.0), 0.02, &criteria)?;
    println!("Marchenko-Pastur + semicircle: {:?}", scan.intervals);
    Ok(())
}
