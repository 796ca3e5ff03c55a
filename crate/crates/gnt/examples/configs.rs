//! Print the JSON form of scenario and method configs accepted by `gnt power`.

use gnt_core::engine::{Combiner, RejectionRule};
use gnt_core::{BoundarySpec, MaskScheme};
use gnt_harness::scenario::ScenarioKind;
use gnt_harness::{Method, PolicyConfig, Scenario};

fn main() -> serde_json::Result<()> {
    let scenario = Scenario::new(ScenarioKind::SparsityLine { sparsity: 0.5 }, 4000, 40, 1.5).with_seed(12).with_reps(100);
    let methods = vec![
        Method::BatchStouffer { alpha: 0.05 },
        Method::Preordered { combiner: Combiner::Stouffer, bound: BoundarySpec::gaussian_linear(0.05, 1000.0) },
        Method::Imt {
            scheme: MaskScheme::Tent,
            rule: RejectionRule::Boundary { spec: BoundarySpec::gaussian_stitched(0.05) },
            policy: PolicyConfig::SmallestMasked,
        },
    ];
    println!("{}", serde_json::to_string(&scenario)?);
    println!("{}", serde_json::to_string_pretty(&methods)?);
    Ok(())
}
