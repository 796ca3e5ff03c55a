//! Fisher and chi-square martingale combinations, compared with batch Fisher.

use gnt_core::engine::{batch_fisher, run_preordered, Combiner, Rule};
use gnt_core::stats::norm_sf;
use gnt_core::{BoundaryFamily, BoundarySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> gnt_core::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ps: Vec<f64> = (0..2000)
        .map(|i| norm_sf(rng.sample::<f64, _>(StandardNormal) + if i < 80 { 2.5 } else { 0.0 }))
        .collect();
    let arms = [
        (Combiner::Fisher, BoundarySpec::linear(BoundaryFamily::ExpLinear, 0.05, 500.0)),
        (Combiner::Fisher, BoundarySpec::new(BoundaryFamily::GammaCurved, 0.05)),
        (Combiner::ChiSq, BoundarySpec::linear(BoundaryFamily::ChiSqExpLinear, 0.05, 500.0)),
        (Combiner::ChiSq, BoundarySpec::new(BoundaryFamily::ChiSqGammaCurved, 0.05)),
    ];
    for (combiner, spec) in arms {
        let st = run_preordered(&ps, combiner, &Rule::boundary(spec)?)?;
        println!("{:<7} {:<20} {:?} at k={:?}", combiner.name(), spec.family.name(), st.status, st.rejected_at);
    }
    println!("batch fisher rejects: {}", batch_fisher(&ps, 0.05));
    Ok(())
}
