//! Drive a batch interactive session by hand: inspect the masked view, pick, repeat.

use gnt_core::anytime::AnytimeTracker;
use gnt_core::engine::{Hypothesis, ImtSession, Rule};
use gnt_core::stats::norm_sf;
use gnt_core::{BoundarySpec, MaskScheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> gnt_core::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // A one-dimensional covariate; signals live near x = 0.
    let hyps: Vec<Hypothesis> = (0..500)
        .map(|i| {
            let x = i as f64 / 500.0;
            let mu = if x < 0.1 { 2.5 } else { 0.0 };
            Hypothesis::new(i, norm_sf(rng.sample::<f64, _>(StandardNormal) + mu)).with_covariates(vec![x])
        })
        .collect();
    let spec = BoundarySpec::gaussian_stitched(0.05);
    let mut session = ImtSession::new(&hyps, MaskScheme::Tent, Rule::boundary(spec)?)?;
    let mut anytime = AnytimeTracker::for_spec(spec)?;
    // An analyst who favours small covariates and small masked values.
    while !session.state().stopped() {
        let view = session.view();
        let Some(next) = view
            .candidates()
            .min_by(|a, b| (a.covariates[0] + a.masked).total_cmp(&(b.covariates[0] + b.masked)))
            .map(|e| e.id)
        else {
            break;
        };
        let out = session.pick(next)?;
        let p_any = anytime.push(out.k, out.statistic)?;
        if out.k % 10 == 0 || session.state().stopped() {
            println!("k={:>3} picked {:>3} p={:.4} S={:>6.2} threshold={:>6.2} anytime p={:.4}", out.k, out.id, out.p, out.statistic, out.threshold, p_any);
        }
    }
    println!("final status {:?}", session.state().status);
    Ok(())
}
