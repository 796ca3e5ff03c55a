//! Martingale Stouffer test on a fixed ordering, with linear and curved boundaries.

use gnt_core::engine::{batch_stouffer, run_preordered, Combiner, Rule};
use gnt_core::stats::norm_sf;
use gnt_core::BoundarySpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> gnt_core::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // Signals sit at the front of the ordering.
    let ps: Vec<f64> = (0..2000)
        .map(|i| {
            let mu = if i < 100 { 2.0 } else { 0.0 };
            norm_sf(rng.sample::<f64, _>(StandardNormal) + mu)
        })
        .collect();
    for (name, spec) in [("linear", BoundarySpec::gaussian_linear(0.05, 500.0)), ("stitched", BoundarySpec::gaussian_stitched(0.05))] {
        let st = run_preordered(&ps, Combiner::Stouffer, &Rule::boundary(spec)?)?;
        println!("{name:<9} status={:?} k={} S={:.2} rejected_at={:?}", st.status, st.k, st.statistic, st.rejected_at);
    }
    println!("batch stouffer rejects: {}", batch_stouffer(&ps, 0.05));
    Ok(())
}
