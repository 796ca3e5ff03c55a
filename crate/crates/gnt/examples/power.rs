//! Monte-Carlo power of several methods on one scenario.

use gnt_core::engine::{Combiner, RejectionRule};
use gnt_core::{BoundarySpec, MaskScheme};
use gnt_harness::scenario::ScenarioKind;
use gnt_harness::{estimate_all, Method, PolicyConfig, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bound = BoundarySpec::gaussian_linear(0.05, 500.0);
    let methods = vec![
        Method::Preordered { combiner: Combiner::Stouffer, bound },
        Method::BatchStouffer { alpha: 0.05 },
        Method::AmtBatch { scheme: MaskScheme::Tent, bound },
        Method::Imt {
            scheme: MaskScheme::Tent,
            rule: RejectionRule::Boundary { spec: BoundarySpec::gaussian_stitched(0.05) },
            policy: PolicyConfig::SmallestMasked,
        },
    ];
    let scenario = Scenario::new(ScenarioKind::SparsityLine { sparsity: 0.5 }, 4000, 40, 1.5).with_seed(12).with_reps(100);
    for (m, est) in methods.iter().zip(estimate_all(&scenario, &methods)?) {
        println!("{:<16} power {:.3} ± {:.3}", m.name(), est.mean, est.stderr);
    }
    println!("scenario as JSON: {}", serde_json::to_string(&scenario)?);
    Ok(())
}
