//! Monte-Carlo estimation over replicates.

use rayon::prelude::*;
use serde::Serialize;

use crate::methods::{Method, Outcome, Prepared};
use crate::scenario::Scenario;
use crate::Result;

/// Power (batch) or mean detection time (online) with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub reps: usize,
    /// Online replicates that never rejected; they count as the horizon.
    pub censored: usize,
}

impl Estimate {
    pub fn power(outcomes: &[Outcome]) -> Self {
        let reps = outcomes.len();
        let p = outcomes.iter().filter(|o| o.rejected).count() as f64 / reps.max(1) as f64;
        Self { mean: p, stderr: (p * (1.0 - p) / reps.max(1) as f64).sqrt(), reps, censored: 0 }
    }

    pub fn detection_time(outcomes: &[Outcome], horizon: u64) -> Self {
        let reps = outcomes.len();
        let times: Vec<f64> = outcomes
            .iter()
            .map(|o| if o.rejected { o.time.unwrap_or(horizon) } else { horizon } as f64)
            .collect();
        let censored = outcomes.iter().filter(|o| !o.rejected).count();
        let (mean, sd) = mean_sd(&times);
        Self { mean, stderr: sd / (reps.max(1) as f64).sqrt(), reps, censored }
    }
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Raw outcomes of every method on each replicate, replicate-major.
/// Each replicate's instance is generated once and shared by all methods.
pub fn simulate(scenario: &Scenario, methods: &[Method]) -> Result<Vec<Vec<Outcome>>> {
    scenario.validate()?;
    let prepared: Vec<Prepared> = methods.iter().map(|m| m.prepare(scenario.n)).collect::<Result<_>>()?;
    (0..scenario.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let (inst, _truth) = scenario.generate(rep)?;
            prepared.iter().map(|p| p.run(&inst)).collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// One estimate per method.
pub fn estimate_all(scenario: &Scenario, methods: &[Method]) -> Result<Vec<Estimate>> {
    let runs = simulate(scenario, methods)?;
    Ok((0..methods.len())
        .map(|j| {
            let col: Vec<Outcome> = runs.iter().map(|r| r[j]).collect();
            if scenario.is_online() {
                Estimate::detection_time(&col, scenario.n as u64)
            } else {
                Estimate::power(&col)
            }
        })
        .collect())
}

pub fn estimate_power(scenario: &Scenario, method: &Method) -> Result<Estimate> {
    Ok(estimate_all(scenario, std::slice::from_ref(method))?[0])
}
