//! Anytime-valid p-values from running martingale tests.

use serde::{Deserialize, Serialize};

use crate::boundaries::{invert_boundary, BoundarySpec};
use crate::engine::{RejectionRule, TestState, TrajectoryPoint};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnytimeRecord {
    pub k: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u64>,
    pub p_anytime: f64,
    /// Reported as `1 / p_anytime`.
    pub e_value: f64,
}

/// Running minimum of the per-step inverse levels.
#[derive(Debug, Clone)]
pub struct AnytimeTracker {
    rule: RejectionRule,
    current: f64,
}

impl AnytimeTracker {
    pub fn new(rule: RejectionRule) -> Result<Self> {
        match rule {
            RejectionRule::Boundary { spec } => spec.validate()?,
            RejectionRule::Ville { .. } => {}
            RejectionRule::OnlineBonferroni { .. } => {
                return Err(Error::Unsupported("anytime p-values need a martingale rule"))
            }
        }
        Ok(Self { rule, current: 1.0 })
    }

    pub fn for_spec(spec: BoundarySpec) -> Result<Self> {
        Self::new(RejectionRule::Boundary { spec })
    }

    /// The level at which step `k` alone would reject.
    pub fn level(&self, k: u64, statistic: f64) -> Result<f64> {
        match self.rule {
            RejectionRule::Boundary { spec } => invert_boundary(&spec, statistic, k),
            RejectionRule::Ville { .. } => Ok((-statistic).exp().clamp(crate::boundaries::P_FLOOR, 1.0)),
            RejectionRule::OnlineBonferroni { .. } => unreachable!("rejected in new"),
        }
    }

    pub fn push(&mut self, k: u64, statistic: f64) -> Result<f64> {
        if statistic > 0.0 {
            self.current = self.current.min(self.level(k, statistic)?);
        }
        Ok(self.current)
    }

    pub fn current(&self) -> f64 {
        self.current
    }
}

fn record(pt: &TrajectoryPoint, p: f64) -> AnytimeRecord {
    AnytimeRecord { k: pt.k, t: pt.t, p_anytime: p, e_value: 1.0 / p }
}

/// `𝔭_t = min_{k <= t} u⁻¹(S_k; k)` along a boundary-test trajectory.
pub fn track_anytime(trajectory: &[TrajectoryPoint], spec: &BoundarySpec) -> Result<Vec<AnytimeRecord>> {
    let mut tracker = AnytimeTracker::for_spec(*spec)?;
    trajectory.iter().map(|pt| Ok(record(pt, tracker.push(pt.k, pt.statistic)?))).collect()
}

/// Anytime p-values for a finished or running test state.
pub fn track_state(state: &TestState) -> Result<Vec<AnytimeRecord>> {
    let mut tracker = AnytimeTracker::new(state.rule)?;
    state.trajectory.iter().map(|pt| Ok(record(pt, tracker.push(pt.k, pt.statistic)?))).collect()
}

/// Smallest anytime p-value over a whole trajectory of statistics `S_1, S_2, ...`.
pub fn infimum(statistics: &[f64], spec: &BoundarySpec) -> Result<f64> {
    let mut tracker = AnytimeTracker::for_spec(*spec)?;
    for (i, &s) in statistics.iter().enumerate() {
        tracker.push(i as u64 + 1, s)?;
    }
    Ok(tracker.current())
}
