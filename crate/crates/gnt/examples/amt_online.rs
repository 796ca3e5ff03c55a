//! Online masked test: admit arrivals whose masked value clears a threshold.

use gnt_core::engine::{run_amt_online, Hypothesis, Rule, ScreeningRule};
use gnt_core::stats::norm_sf;
use gnt_core::{BoundarySpec, MaskScheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> gnt_core::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let stream: Vec<Hypothesis> = (0..20_000)
        .map(|i| {
            let mu = if rng.gen_bool(0.05) { 2.0 } else { 0.0 };
            Hypothesis::new(i, norm_sf(rng.sample::<f64, _>(StandardNormal) + mu))
        })
        .collect();
    let rule = Rule::boundary(BoundarySpec::gaussian_linear(0.05, 200.0))?;
    for threshold in [0.02, 0.05, 0.2] {
        let st = run_amt_online(stream.clone(), ScreeningRule::new(threshold)?, MaskScheme::Tent, &rule, Some(20_000))?;
        println!("threshold {threshold}: {:?}, detection time {:?}, included {}", st.status, st.rejection_time(), st.k);
    }
    Ok(())
}
