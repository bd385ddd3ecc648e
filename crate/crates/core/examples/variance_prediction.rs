//! Contour variance V(f) against its universal limit as N grows.

use freesum::measures::{quantile_discretize, Family};
use freesum::variance_kernel::{contour_variance, universal_forms, ContourSpec, Profile, Shape, TestFunction};
use freesum::{Beta, Result};

fn main() -> Result<()> {
    let shape = Shape::from(Profile::gaussian());
    let forms = universal_forms(&shape, Beta::Unitary);
    println!(
        "universal variance: double integral {:.10}, Fourier {:.10}, 1/(2 pi) = {:.10}",
        forms.double_integral,
        forms.fourier,
        1.0 / (2.0 * std::f64::consts::PI)
    );

    println!("\nN      eta0      V(f)        relative gap");
    for n in [250, 500, 1000, 2000] {
        let mu = quantile_discretize(Family::Semicircle, &[1.0], n)?;
        let tf = TestFunction::new(shape.clone(), 0.0, (n as f64).powf(-0.3))?;
        let contour = ContourSpec::new(n, &tf, 0.05, 2048)?;
        let v = contour_variance(&tf, &contour, &mu, &mu, Beta::Unitary)?;
        println!("{n:<6} {:<9.5} {v:<11.6} {:.4}", tf.eta0, (v - forms.fourier).abs() / forms.fourier);
    }
    Ok(())
}
