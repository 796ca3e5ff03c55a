//! Fit the two-groups model from masked data with each structure.

use gnt_core::masking::mask;
use gnt_core::stats::norm_sf;
use gnt_core::structure::{em_fit, EmConfig, EmData, Structure, TwoGroupsModel};
use gnt_core::MaskScheme;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> gnt_core::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let side = 20;
    let mut data = EmData::default();
    let mut points = Vec::new();
    let mut in_block = Vec::new();
    for i in 0..side * side {
        let (x, y) = ((i % side) as f64, (i / side) as f64);
        points.push([x, y]);
        let signal = x < 6.0 && y < 6.0;
        in_block.push(signal);
        let p = norm_sf(rng.sample::<f64, _>(StandardNormal) + if signal { 2.5 } else { 0.0 });
        data.push_masked(MaskScheme::Tent, mask(p, MaskScheme::Tent)?.masked);
    }
    let n = side * side;
    for (name, structure) in [("shared", Structure::Shared), ("grid spline", Structure::grid_spline(&points, 5))] {
        let fit = em_fit(&data, &structure, TwoGroupsModel::constant(n, 1.0, 0.2), &EmConfig::default())?;
        let mean_over = |v: &[f64], inside: bool| {
            let sel: Vec<f64> = v.iter().zip(&in_block).filter(|(_, &b)| b == inside).map(|(x, _)| *x).collect();
            sel.iter().sum::<f64>() / sel.len() as f64
        };
        println!(
            "{name:<12} iterations={:>3} mu={:.2} pi block/outside={:.3}/{:.3} posterior block/outside={:.3}/{:.3}",
            fit.iterations,
            fit.model.mu,
            mean_over(&fit.model.pi, true),
            mean_over(&fit.model.pi, false),
            mean_over(&fit.posterior, true),
            mean_over(&fit.posterior, false),
        );
    }
    Ok(())
}
