//! Anytime-valid p-values along a trajectory, and their duality with rejection.

use gnt_core::anytime::{infimum, track_state};
use gnt_core::engine::{run_preordered, Combiner, Rule};
use gnt_core::stats::norm_sf;
use gnt_core::BoundarySpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> gnt_core::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ps: Vec<f64> = (0..400).map(|_| norm_sf(rng.sample::<f64, _>(StandardNormal) + 0.25)).collect();
    let spec = BoundarySpec::gaussian_stitched(0.05);
    let st = run_preordered(&ps, Combiner::Stouffer, &Rule::boundary(spec)?)?;
    for (rec, point) in track_state(&st)?.iter().zip(&st.trajectory).step_by(50) {
        println!("k={:>3} S={:>7.2} anytime p={:.4}", rec.k, point.statistic, rec.p_anytime);
    }
    let statistics: Vec<f64> = st.trajectory.iter().map(|t| t.statistic).collect();
    let inf = infimum(&statistics, &spec)?;
    println!("status {:?}; smallest anytime p {inf:.4}; below 0.05: {}", st.status, inf < 0.05);
    Ok(())
}
