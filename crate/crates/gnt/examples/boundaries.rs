//! Evaluate every boundary family and map statistics back to levels.

use gnt_core::boundaries::{eval_boundary, invert_boundary};
use gnt_core::{BoundaryFamily, BoundarySpec};

fn main() -> gnt_core::Result<()> {
    let alpha = 0.05;
    println!("{:<28} {:>10} {:>10} {:>10} {:>12}", "family", "u(10)", "u(100)", "u(1000)", "level(u(100))");
    for family in BoundaryFamily::ALL {
        let spec = match family {
            f if f.is_linear() => BoundarySpec::linear(f, alpha, 500.0),
            BoundaryFamily::GaussianInvertedStitching => BoundarySpec::new(family, alpha).with_horizon(10_000),
            f => BoundarySpec::new(f, alpha),
        };
        let u: Vec<f64> = [10, 100, 1000].iter().map(|&k| eval_boundary(&spec, k)).collect::<Result<_, _>>()?;
        let back = invert_boundary(&spec, u[1], 100)?;
        println!("{:<28} {:>10.3} {:>10.3} {:>10.3} {:>12.6}", family.name(), u[0], u[1], u[2], back);
    }
    Ok(())
}
