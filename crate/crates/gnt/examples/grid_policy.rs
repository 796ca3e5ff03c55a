//! Grid-structured search: a spline-based EM model steers picks along the edge of the explored set.

use gnt_core::engine::{run_imt, Rule, SmallestMasked};
use gnt_core::structure::{EmConfig, GridPolicy, RefitSchedule};
use gnt_core::{BoundarySpec, MaskScheme};
use gnt_harness::scenario::{Placement, ScenarioKind};
use gnt_harness::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kind = ScenarioKind::GridBlock { side: 30, radius: 5.0, placement: Placement::Corner };
    let scenario = Scenario::new(kind, 900, 0, 1.5).with_seed(6);
    let rule = Rule::boundary(BoundarySpec::gaussian_stitched(0.05))?;
    let (mut grid_hits, mut smallest_hits) = (0, 0);
    for rep in 0..20 {
        let (inst, _) = scenario.generate(rep)?;
        let mut grid = GridPolicy::new(5, RefitSchedule::default(), EmConfig::interactive());
        grid_hits += usize::from(run_imt(&inst.hyps, MaskScheme::Tent, &rule, &mut grid)?.rejected());
        smallest_hits += usize::from(run_imt(&inst.hyps, MaskScheme::Tent, &rule, &mut SmallestMasked::default())?.rejected());
    }
    println!("rejections over 20 corner-block grids: grid policy {grid_hits}, smallest masked {smallest_hits}");
    Ok(())
}
