//! Tree-structured search: leaves first, with or without an isotonic EM model.

use gnt_core::engine::{run_imt, Rule};
use gnt_core::structure::{EmConfig, RefitSchedule, TreeDirection, TreePolicy};
use gnt_core::{BoundarySpec, MaskScheme};
use gnt_harness::scenario::{tree_size, ScenarioKind, TreeSignal};
use gnt_harness::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kind = ScenarioKind::BatchTree { root_fanout: 20, fanout: 3, levels: 5, signal: TreeSignal::Decreasing };
    let (inst, truth) = Scenario::new(kind, tree_size(20, 3, 5), 80, 2.0).with_seed(7).generate(0)?;
    let parent = inst.layout.parent().expect("tree scenario").to_vec();
    println!("{} nodes, {} non-null", inst.len(), truth.count());
    let rule = Rule::boundary(BoundarySpec::gaussian_stitched(0.05))?;
    let mut free = TreePolicy::model_free(parent.clone());
    let st = run_imt(&inst.hyps, MaskScheme::Tent, &rule, &mut free)?;
    println!("model-free: {:?} after {} picks", st.status, st.k);
    let mut modeled = TreePolicy::modeled(parent, TreeDirection::Decreasing, RefitSchedule::default(), EmConfig::interactive());
    let st = run_imt(&inst.hyps, MaskScheme::Tent, &rule, &mut modeled)?;
    println!("modeled:    {:?} after {} picks", st.status, st.k);
    Ok(())
}
