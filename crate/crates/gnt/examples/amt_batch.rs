//! Automatic masked test: order by masked value, then accumulate bits.

use gnt_core::engine::{hypotheses, run_amt_batch, Rule};
use gnt_core::stats::norm_sf;
use gnt_core::{BoundarySpec, MaskScheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> gnt_core::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // Signals are scattered, so no prior ordering helps.
    let ps: Vec<f64> = (0..5000)
        .map(|_| norm_sf(rng.sample::<f64, _>(StandardNormal) + if rng.gen_bool(0.02) { 2.5 } else { 0.0 }))
        .collect();
    let rule = Rule::boundary(BoundarySpec::gaussian_linear(0.05, 1250.0))?;
    for scheme in [MaskScheme::Tent, MaskScheme::Railway] {
        let st = run_amt_batch(&hypotheses(&ps), scheme, &rule)?;
        println!("{scheme:?}: {:?} after {} inclusions, S={:.2}", st.status, st.k, st.statistic);
    }
    Ok(())
}
