//! Simulation harness: scenarios, method configurations, Monte-Carlo power
//! estimation, the sufficient-signal condition and figure reproduction.

mod error;
pub mod condition;
pub mod figures;
pub mod methods;
pub mod power;
pub mod scenario;
pub mod seeds;

pub use error::{Error, Result};
pub use methods::{Method, Outcome, PolicyConfig};
pub use power::{estimate_all, simulate, Estimate};
pub use scenario::{Instance, Scenario, ScenarioKind, Truth};
