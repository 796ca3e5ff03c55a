//! Product-martingale test with calibrator masks, against the sign-bit test.

use gnt_core::engine::{hypotheses, run_calibrator_test, run_imt, Rule, SmallestMasked};
use gnt_core::stats::norm_sf;
use gnt_core::{BoundarySpec, MaskScheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> gnt_core::Result<()> {
    let schemes = [MaskScheme::Calibrator { c: 0.2 }, MaskScheme::Calibrator { c: 0.5 }, MaskScheme::CalibratorMixture];
    let tent = Rule::boundary(BoundarySpec::gaussian_stitched(0.05))?;
    let mut wins = vec![0; schemes.len() + 1];
    for rep in 0..40 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + rep);
        let ps: Vec<f64> = (0..1000)
            .map(|i| norm_sf(rng.sample::<f64, _>(StandardNormal) + if i < 50 { 1.5 } else { 0.0 }))
            .collect();
        let hyps = hypotheses(&ps);
        wins[0] += usize::from(run_imt(&hyps, MaskScheme::Tent, &tent, &mut SmallestMasked::default())?.rejected());
        for (j, &scheme) in schemes.iter().enumerate() {
            wins[j + 1] += usize::from(run_calibrator_test(&hyps, scheme, 0.05, &mut SmallestMasked::default())?.rejected());
        }
    }
    println!("rejections out of 40: tent {}", wins[0]);
    for (j, scheme) in schemes.iter().enumerate() {
        println!("  {scheme:?}: {}", wins[j + 1]);
    }
    Ok(())
}
