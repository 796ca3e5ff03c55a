//! Serialize a session's events as JSON lines and rebuild the session from them.

use gnt_core::engine::{drive, hypotheses, ImtSession, Rule, SmallestMasked};
use gnt_core::engine::log::{from_jsonl, replay_batch, to_jsonl};
use gnt_core::stats::norm_sf;
use gnt_core::{BoundarySpec, MaskScheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> gnt_core::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let ps: Vec<f64> = (0..300).map(|i| norm_sf(rng.sample::<f64, _>(StandardNormal) + if i < 30 { 2.0 } else { 0.0 })).collect();
    let hyps = hypotheses(&ps);
    let rule = Rule::boundary(BoundarySpec::gaussian_stitched(0.05))?;
    let mut session = ImtSession::new(&hyps, MaskScheme::Tent, rule.clone())?;
    drive(&mut session, &mut SmallestMasked::default())?;
    let text = to_jsonl(session.log());
    println!("{} events, first: {}", session.log().len(), text.lines().next().unwrap_or(""));
    let rebuilt = replay_batch(&hyps, MaskScheme::Tent, rule, &from_jsonl(&text)?)?;
    println!("replayed state matches: {}", rebuilt.state() == session.state());
    Ok(())
}
