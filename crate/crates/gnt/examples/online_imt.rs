//! Online interactive test: decide per arrival from its masked value and the revealed history.

use gnt_core::engine::{Decision, Hypothesis, OnlineImt, Rule};
use gnt_core::stats::norm_sf;
use gnt_core::structure::block_adaptive_threshold;
use gnt_core::{BoundarySpec, MaskScheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> gnt_core::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut session = OnlineImt::new(MaskScheme::Tent, Rule::boundary(BoundarySpec::gaussian_linear(0.05, 200.0))?, Some(20_000))?;
    for t in 0..20_000usize {
        // Signals arrive in bursts of 100 every 1000 arrivals.
        let mu = if t % 1000 < 100 { 1.5 } else { 0.0 };
        let h = Hypothesis::new(t, norm_sf(rng.sample::<f64, _>(StandardNormal) + mu));
        session.step(&h, |view| {
            let recent: Vec<f64> = view.history.iter().rev().take(50).map(|a| a.p).collect();
            if view.masked < block_adaptive_threshold(view.t, &recent, 0.05) { Decision::Include } else { Decision::Skip }
        })?;
        if session.state().stopped() {
            break;
        }
    }
    session.finish();
    let st = session.state();
    println!("{:?} at arrival {:?} with {} inclusions", st.status, st.rejection_time(), st.k);
    Ok(())
}
