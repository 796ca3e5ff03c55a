//! Online Bonferroni with 1/(k log² k) levels.

use gnt_core::engine::{bonferroni_online, BonferroniWeights};
use gnt_core::stats::norm_sf;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> gnt_core::Result<()> {
    let weights = BonferroniWeights::new(0.05)?;
    for k in [2, 10, 100, 10_000] {
        println!("level at k={k}: {:.3e}", weights.weight(k));
    }
    for mu in [2.0, 3.0, 4.0] {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let stream = (0..).map(move |_| norm_sf(rng.sample::<f64, _>(StandardNormal) + if rng.gen_bool(0.05) { mu } else { 0.0 }));
        let st = bonferroni_online(stream, weights, Some(20_000))?;
        println!("mu={mu}: {:?} at arrival {:?}", st.status, st.rejection_time());
    }
    Ok(())
}
