//! Sequential test engines and their shared bookkeeping.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::boundaries::{Boundary, BoundaryFamily, BoundarySpec, BoundaryTable, CompiledBoundary, IncrementClass};
use crate::stats::norm_upper_quantile;
use crate::{Error, Result};

mod amt;
mod baselines;
mod imt;
pub mod log;

pub use amt::{run_amt_batch, run_amt_online, ScreeningRule};
pub use baselines::{
    batch_fisher, batch_stouffer, bonferroni_batch, bonferroni_online, run_preordered, BonferroniWeights,
};
pub use imt::{
    drive, run_calibrator_test, run_imt, Decision, PickOutcome, RevealedArrival, Filtration, ImtSession, MaskedEntry, OnlineImt, OnlineView, Policy,
    SessionView, SmallestMasked,
};

/// Clip applied before `-2 log p`.
pub const LOG_CLIP: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub id: usize,
    pub p: f64,
    #[serde(default)]
    pub covariates: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival: Option<u64>,
}

impl Hypothesis {
    pub fn new(id: usize, p: f64) -> Self {
        Self { id, p, covariates: Vec::new(), arrival: None }
    }

    pub fn with_covariates(mut self, covariates: Vec<f64>) -> Self {
        self.covariates = covariates;
        self
    }
}

/// Numbered hypotheses `0..n` from bare p-values.
pub fn hypotheses(ps: &[f64]) -> Vec<Hypothesis> {
    ps.iter().enumerate().map(|(i, &p)| Hypothesis::new(i, p)).collect()
}

pub fn stouffer_increment(p: f64) -> f64 {
    norm_upper_quantile(p)
}

pub fn fisher_increment(p: f64) -> f64 {
    -2.0 * p.max(LOG_CLIP).ln()
}

pub fn chisq_increment(p: f64) -> f64 {
    norm_upper_quantile(p).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Combiner {
    Stouffer,
    Fisher,
    ChiSq,
}

impl Combiner {
    pub fn name(self) -> &'static str {
        match self {
            Combiner::Stouffer => "Stouffer",
            Combiner::Fisher => "Fisher",
            Combiner::ChiSq => "ChiSq",
        }
    }

    /// Raw increment `f(p)`.
    pub fn increment(self, p: f64) -> f64 {
        match self {
            Combiner::Stouffer => stouffer_increment(p),
            Combiner::Fisher => fisher_increment(p),
            Combiner::ChiSq => chisq_increment(p),
        }
    }

    /// The null mean subtracted per step.
    pub fn centering(self) -> f64 {
        match self {
            Combiner::Stouffer => 0.0,
            Combiner::Fisher => 2.0,
            Combiner::ChiSq => 1.0,
        }
    }

    pub fn check_family(self, family: BoundaryFamily) -> Result<()> {
        let ok = matches!(
            (self, family.increments()),
            (Combiner::Stouffer, IncrementClass::Gaussian)
                | (Combiner::Fisher, IncrementClass::Fisher)
                | (Combiner::ChiSq, IncrementClass::ChiSq)
        );
        if ok {
            Ok(())
        } else {
            Err(Error::Incompatible { combiner: self.name(), family: family.name() })
        }
    }
}

/// Serializable description of how a running statistic is judged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RejectionRule {
    /// Reject at the first `k` with `S_k > u_α(k)`.
    Boundary { spec: BoundarySpec },
    /// Product martingale: reject once `Σ log f >= log(1/α)`.
    Ville { alpha: f64 },
    /// Reject at the first `k` with `p_k <= α_k`.
    OnlineBonferroni { alpha: f64 },
}

impl RejectionRule {
    pub fn alpha(&self) -> f64 {
        match *self {
            RejectionRule::Boundary { spec } => spec.alpha,
            RejectionRule::Ville { alpha } | RejectionRule::OnlineBonferroni { alpha } => alpha,
        }
    }
}

#[derive(Clone)]
enum Threshold {
    Curve(Arc<dyn Boundary + Send + Sync>),
    Constant(f64),
    Bonferroni(BonferroniWeights),
}

/// A compiled rejection rule, cheap to clone and share across threads.
#[derive(Clone)]
pub struct Rule {
    description: RejectionRule,
    threshold: Threshold,
}

impl std::fmt::Debug for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("Rule").field(&self.description).finish()
    }
}

impl Rule {
    pub fn boundary(spec: BoundarySpec) -> Result<Self> {
        let compiled = CompiledBoundary::new(spec)?;
        Ok(Self { description: RejectionRule::Boundary { spec }, threshold: Threshold::Curve(Arc::new(compiled)) })
    }

    /// Boundary with `u_α(1..=horizon)` cached up front.
    pub fn tabulated(spec: BoundarySpec, horizon: u64) -> Result<Self> {
        let table: BoundaryTable = CompiledBoundary::new(spec)?.tabulate(horizon);
        Ok(Self { description: RejectionRule::Boundary { spec }, threshold: Threshold::Curve(Arc::new(table)) })
    }

    pub fn ville(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidAlpha(alpha));
        }
        Ok(Self { description: RejectionRule::Ville { alpha }, threshold: Threshold::Constant((1.0 / alpha).ln()) })
    }

    pub fn online_bonferroni(weights: BonferroniWeights) -> Self {
        Self {
            description: RejectionRule::OnlineBonferroni { alpha: weights.alpha() },
            threshold: Threshold::Bonferroni(weights),
        }
    }

    pub fn from_description(description: RejectionRule) -> Result<Self> {
        match description {
            RejectionRule::Boundary { spec } => Self::boundary(spec),
            RejectionRule::Ville { alpha } => Self::ville(alpha),
            RejectionRule::OnlineBonferroni { alpha } => Ok(Self::online_bonferroni(BonferroniWeights::new(alpha)?)),
        }
    }

    pub fn description(&self) -> RejectionRule {
        self.description
    }

    pub fn spec(&self) -> Option<BoundarySpec> {
        match self.description {
            RejectionRule::Boundary { spec } => Some(spec),
            _ => None,
        }
    }

    /// Threshold at step `k`.
    pub fn threshold(&self, k: u64) -> f64 {
        match &self.threshold {
            Threshold::Curve(b) => b.value(k),
            Threshold::Constant(c) => *c,
            Threshold::Bonferroni(w) => w.weight(k),
        }
    }

    pub fn crosses(&self, k: u64, statistic: f64) -> bool {
        let u = self.threshold(k);
        match self.threshold {
            Threshold::Curve(_) => statistic > u,
            Threshold::Constant(_) => statistic >= u,
            Threshold::Bonferroni(_) => statistic <= u,
        }
    }

    fn gaussian(&self, what: &'static str) -> Result<()> {
        match self.description {
            RejectionRule::Boundary { spec } if spec.family.increments() == IncrementClass::Gaussian => Ok(()),
            RejectionRule::Boundary { spec } => Err(Error::Incompatible { combiner: what, family: spec.family.name() }),
            _ => Err(Error::Incompatible { combiner: what, family: "non-boundary rule" }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Rejected,
    /// All hypotheses consumed without rejection.
    Exhausted,
    /// Stopped by an explicit horizon cap before the data ran out.
    HorizonReached,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub k: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u64>,
    pub statistic: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestState {
    pub k: u64,
    pub statistic: f64,
    pub included: Vec<usize>,
    pub rule: RejectionRule,
    pub status: Status,
    pub rejected_at: Option<u64>,
    pub trajectory: Vec<TrajectoryPoint>,
}

impl TestState {
    pub fn new(rule: RejectionRule) -> Self {
        Self {
            k: 0,
            statistic: 0.0,
            included: Vec::new(),
            rule,
            status: Status::Running,
            rejected_at: None,
            trajectory: Vec::new(),
        }
    }

    pub fn stopped(&self) -> bool {
        self.status != Status::Running
    }

    pub fn rejected(&self) -> bool {
        self.status == Status::Rejected
    }

    /// Arrival index at rejection when recorded, otherwise the inclusion count.
    pub fn rejection_time(&self) -> Option<u64> {
        let k = self.rejected_at?;
        let point = self.trajectory.get(k as usize - 1)?;
        Some(point.t.unwrap_or(k))
    }
}

/// Owns a [`TestState`] and enforces its invariants while increments arrive.
#[derive(Debug, Clone)]
pub struct Tracker {
    state: TestState,
    rule: Rule,
}

impl Tracker {
    pub fn new(rule: Rule) -> Self {
        Self { state: TestState::new(rule.description()), rule }
    }

    pub fn state(&self) -> &TestState {
        &self.state
    }

    pub fn into_state(self) -> TestState {
        self.state
    }

    pub fn rule(&self) -> &Rule {
        &self.rule
    }

    /// Include hypothesis `id` with a (centered) increment; `t` is its arrival index.
    pub fn include(&mut self, id: usize, t: Option<u64>, increment: f64) -> Result<&TestState> {
        let next = self.state.statistic + increment;
        self.advance(id, t, next)
    }

    fn advance(&mut self, id: usize, t: Option<u64>, statistic: f64) -> Result<&TestState> {
        if self.state.stopped() {
            return Err(Error::Stopped);
        }
        let s = &mut self.state;
        s.k += 1;
        s.statistic = statistic;
        s.included.push(id);
        let threshold = self.rule.threshold(s.k);
        s.trajectory.push(TrajectoryPoint { k: s.k, t, statistic: s.statistic, threshold });
        if self.rule.crosses(s.k, s.statistic) {
            s.status = Status::Rejected;
            s.rejected_at = Some(s.k);
        }
        Ok(&self.state)
    }

    /// Record a Bonferroni-style observation whose statistic replaces, not adds.
    fn observe(&mut self, id: usize, t: Option<u64>, value: f64) -> Result<&TestState> {
        self.advance(id, t, value)
    }

    pub fn finish(&mut self, status: Status) {
        if self.state.status == Status::Running {
            self.state.status = status;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increments() {
        assert_eq!(stouffer_increment(0.5), 0.0);
        assert!((stouffer_increment(0.0013499) - 3.0).abs() < 1e-3);
        assert!((stouffer_increment(0.99865) + 3.0).abs() < 1e-3);
        assert_eq!(fisher_increment(1.0), 0.0);
        assert!((fisher_increment((-1.0f64).exp()) - 2.0).abs() < 1e-15);
        assert_eq!(chisq_increment(0.5), 0.0);
        assert!(stouffer_increment(0.0).is_finite() && stouffer_increment(1.0).is_finite());
        assert!(fisher_increment(0.0).is_finite());
    }

    #[test]
    fn compatibility() {
        assert!(Combiner::Stouffer.check_family(BoundaryFamily::GaussianStitched).is_ok());
        assert!(Combiner::Fisher.check_family(BoundaryFamily::GammaCurved).is_ok());
        assert!(Combiner::ChiSq.check_family(BoundaryFamily::ChiSqExpLinear).is_ok());
        assert!(Combiner::Fisher.check_family(BoundaryFamily::GaussianLinear).is_err());
        assert!(Combiner::Stouffer.check_family(BoundaryFamily::ChiSqGammaCurved).is_err());
    }

    #[test]
    fn tracker_freezes_after_rejection() {
        let mut t = Tracker::new(Rule::ville(0.5).unwrap());
        t.include(0, None, 1.0).unwrap();
        assert!(t.state().rejected());
        assert_eq!(t.include(1, None, 1.0), Err(Error::Stopped));
        assert_eq!(t.state().trajectory.len(), 1);
    }

    #[test]
    fn state_json_round_trip() {
        let mut t = Tracker::new(Rule::boundary(BoundarySpec::gaussian_stitched(0.05)).unwrap());
        t.include(3, Some(7), 1.0).unwrap();
        let json = serde_json::to_string(t.state()).unwrap();
        let back: TestState = serde_json::from_str(&json).unwrap();
        assert_eq!(&back, t.state());
    }
}
