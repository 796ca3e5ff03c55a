//! Test configurations and a single-replicate runner for each.

use gnt_core::engine::{
    batch_fisher, batch_stouffer, bonferroni_batch, bonferroni_online, run_amt_batch, run_amt_online, run_imt,
    run_preordered, BonferroniWeights, Combiner, Decision, OnlineImt, Policy, RejectionRule, Rule, ScreeningRule,
    SmallestMasked, TestState,
};
use gnt_core::masking::MaskScheme;
use gnt_core::stats::norm_upper_quantile;
use gnt_core::structure::{
    block_adaptive_threshold, em_fit, online_tree_prior, single_posterior, EmConfig, EmData, EmPolicy, Evidence,
    GridPolicy, RefitSchedule, Structure, TreeDirection, TreePolicy, TwoGroupsModel, ONLINE_TREE_KEEP,
};
use gnt_core::BoundarySpec;
use serde::{Deserialize, Serialize};

use crate::scenario::{Instance, Layout};
use crate::{Error, Result};

/// Ordering policy for a batch interactive test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum PolicyConfig {
    /// Adversarial: smallest masked value first.
    SmallestMasked,
    /// Connected expansion on a grid, ranked by a spline working model.
    Grid { knots: usize },
    /// Rooted-subtree expansion ranked by masked value only.
    TreeModelFree,
    /// Subtree expansion ranked by an isotonic working model.
    TreeModeled { direction: TreeDirection },
    /// Shared-prior two-groups model, no structure.
    Em,
}

/// A test to evaluate, as it appears in JSON test configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    /// Martingale test on the instance's data-independent preorder.
    Preordered { combiner: Combiner, bound: BoundarySpec },
    BatchStouffer { alpha: f64 },
    BatchFisher { alpha: f64 },
    Bonferroni { alpha: f64 },
    AmtBatch { scheme: MaskScheme, bound: BoundarySpec },
    /// Screened online test: include arrival `t` iff `g(p_t) < threshold`.
    AmtOnline { threshold: f64, bound: BoundarySpec },
    Imt { scheme: MaskScheme, rule: RejectionRule, policy: PolicyConfig },
    OnlineBonferroni { alpha: f64 },
    /// Online test whose screening threshold adapts to recent p-values.
    ImtBlocks { base: f64, bound: BoundarySpec },
    /// Online tree test: children inherit their parent's posterior as prior
    /// and enter only while their posterior stays above `keep`.
    ImtOnlineTree {
        bound: BoundarySpec,
        #[serde(default = "default_keep")]
        keep: f64,
    },
}

fn default_keep() -> f64 {
    ONLINE_TREE_KEEP
}

impl Method {
    /// Whether outcomes are detection times rather than rejections.
    pub fn is_online(&self) -> bool {
        matches!(
            self,
            Method::AmtOnline { .. } | Method::OnlineBonferroni { .. } | Method::ImtBlocks { .. } | Method::ImtOnlineTree { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Preordered { .. } => "preordered",
            Method::BatchStouffer { .. } => "batch_stouffer",
            Method::BatchFisher { .. } => "batch_fisher",
            Method::Bonferroni { .. } => "bonferroni",
            Method::AmtBatch { .. } => "amt_batch",
            Method::AmtOnline { .. } => "amt_online",
            Method::Imt { .. } => "imt",
            Method::OnlineBonferroni { .. } => "online_bonferroni",
            Method::ImtBlocks { .. } => "imt_blocks",
            Method::ImtOnlineTree { .. } => "imt_online_tree",
        }
    }

    /// Compile the method's rule once for instances of length `horizon`.
    pub fn prepare(&self, horizon: usize) -> Result<Prepared> {
        let h = horizon as u64;
        let rule = match self {
            Method::Preordered { combiner, bound } => {
                combiner.check_family(bound.family)?;
                Some(Rule::tabulated(*bound, h)?)
            }
            Method::AmtBatch { bound, .. }
            | Method::AmtOnline { bound, .. }
            | Method::ImtBlocks { bound, .. }
            | Method::ImtOnlineTree { bound, .. } => Some(Rule::tabulated(*bound, h)?),
            Method::Imt { rule: RejectionRule::Boundary { spec }, .. } => Some(Rule::tabulated(*spec, h)?),
            Method::Imt { rule, .. } => Some(Rule::from_description(*rule)?),
            Method::OnlineBonferroni { alpha } => Some(Rule::online_bonferroni(BonferroniWeights::new(*alpha)?)),
            Method::BatchStouffer { alpha } | Method::BatchFisher { alpha } | Method::Bonferroni { alpha } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(gnt_core::Error::InvalidAlpha(*alpha).into());
                }
                None
            }
        };
        if let Method::AmtOnline { threshold, .. } | Method::ImtBlocks { base: threshold, .. } = self {
            ScreeningRule::new(*threshold)?;
        }
        Ok(Prepared { method: self.clone(), rule })
    }
}

/// One replicate's result. `time` is the arrival index (online) or the
/// number of inclusions (batch) at rejection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub rejected: bool,
    pub time: Option<u64>,
}

impl Outcome {
    fn from_state(st: &TestState) -> Self {
        Self { rejected: st.rejected(), time: st.rejection_time() }
    }

    fn batch(rejected: bool) -> Self {
        Self { rejected, time: None }
    }
}

/// A method with its rule compiled, shareable across replicates.
#[derive(Debug, Clone)]
pub struct Prepared {
    method: Method,
    rule: Option<Rule>,
}

impl Prepared {
    pub fn method(&self) -> &Method {
        &self.method
    }

    fn rule(&self) -> &Rule {
        self.rule.as_ref().expect("prepared methods with rules always compile one")
    }

    pub fn run(&self, inst: &Instance) -> Result<Outcome> {
        let horizon = Some(inst.len() as u64);
        Ok(match &self.method {
            Method::Preordered { combiner, .. } => {
                Outcome::from_state(&run_preordered(&inst.preordered_p(), *combiner, self.rule())?)
            }
            Method::BatchStouffer { alpha } => Outcome::batch(batch_stouffer(&inst.p_values(), *alpha)),
            Method::BatchFisher { alpha } => Outcome::batch(batch_fisher(&inst.p_values(), *alpha)),
            Method::Bonferroni { alpha } => Outcome::batch(bonferroni_batch(&inst.p_values(), *alpha)),
            Method::AmtBatch { scheme, .. } => Outcome::from_state(&run_amt_batch(&inst.hyps, *scheme, self.rule())?),
            Method::AmtOnline { threshold, .. } => Outcome::from_state(&run_amt_online(
                inst.hyps.iter().cloned(),
                ScreeningRule::new(*threshold)?,
                MaskScheme::Tent,
                self.rule(),
                horizon,
            )?),
            Method::Imt { scheme, policy, .. } => {
                let mut policy = build_policy(policy, inst)?;
                Outcome::from_state(&run_imt(&inst.hyps, *scheme, self.rule(), policy.as_mut())?)
            }
            Method::OnlineBonferroni { alpha } => Outcome::from_state(&bonferroni_online(
                inst.hyps.iter().map(|h| h.p),
                BonferroniWeights::new(*alpha)?,
                horizon,
            )?),
            Method::ImtBlocks { base, .. } => {
                let mut session = OnlineImt::new(MaskScheme::Tent, self.rule().clone(), horizon)?;
                for h in &inst.hyps {
                    if session.state().stopped() {
                        break;
                    }
                    session.step(h, |v| {
                        let recent: Vec<f64> = v.history.iter().rev().take(10).map(|a| a.p).collect();
                        if v.masked < block_adaptive_threshold(v.t, &recent, *base) {
                            Decision::Include
                        } else {
                            Decision::Skip
                        }
                    })?;
                }
                session.finish();
                Outcome::from_state(session.state())
            }
            Method::ImtOnlineTree { keep, .. } => run_online_tree(inst, self.rule(), *keep)?,
        })
    }
}

pub fn build_policy(cfg: &PolicyConfig, inst: &Instance) -> Result<Box<dyn Policy>> {
    let tree = |what: &'static str| {
        inst.layout.parent().map(<[_]>::to_vec).ok_or(Error::Layout { method: what, layout: inst.layout.name() })
    };
    Ok(match *cfg {
        PolicyConfig::SmallestMasked => Box::new(SmallestMasked::default()),
        PolicyConfig::Grid { knots } => {
            if !matches!(inst.layout, Layout::Grid { .. }) {
                return Err(Error::Layout { method: "grid policy", layout: inst.layout.name() });
            }
            Box::new(GridPolicy::new(knots, RefitSchedule::default(), EmConfig::interactive()))
        }
        PolicyConfig::TreeModelFree => Box::new(TreePolicy::model_free(tree("tree policy")?)),
        PolicyConfig::TreeModeled { direction } => Box::new(TreePolicy::modeled(
            tree("tree policy")?,
            direction,
            RefitSchedule::default(),
            EmConfig::interactive(),
        )),
        PolicyConfig::Em => Box::new(EmPolicy::default()),
    })
}

// Working-model mean before any arrivals have been seen.
const ONLINE_INIT_MU: f64 = 2.0;

fn run_online_tree(inst: &Instance, rule: &Rule, keep: f64) -> Result<Outcome> {
    let Layout::OnlineTree { parent, prior } = &inst.layout else {
        return Err(Error::Layout { method: "online tree", layout: inst.layout.name() });
    };
    let scheme = MaskScheme::Tent;
    let mut session = OnlineImt::new(scheme, rule.clone(), Some(inst.len() as u64))?;
    let mut posterior = vec![0.0; inst.len()];
    let mut mu = ONLINE_INIT_MU;
    let mut next_fit = 10usize;
    for (i, h) in inst.hyps.iter().enumerate() {
        if session.state().stopped() {
            break;
        }
        if session.history().len() >= next_fit {
            mu = refit_mean(session.history().iter().map(|a| a.p), mu);
            next_fit *= 2;
        }
        let prior_i = match parent[i] {
            None => prior[i].unwrap_or(0.5),
            Some(p) => posterior[p],
        };
        session.step(h, |v| match parent[i].map_or(Some(prior_i), |p| online_tree_prior(posterior[p])) {
            Some(pi) if single_posterior(scheme, mu, pi, Evidence::Masked(v.masked)) >= keep => Decision::Include,
            _ => Decision::Skip,
        })?;
        posterior[i] = single_posterior(scheme, mu, prior_i, Evidence::Revealed(h.p));
    }
    session.finish();
    Ok(Outcome::from_state(session.state()))
}

// Alternative mean of a shared two-groups fit to fully revealed p-values.
fn refit_mean(ps: impl Iterator<Item = f64>, current: f64) -> f64 {
    let z: Vec<f64> = ps.map(norm_upper_quantile).collect();
    let data = EmData::complete(&z);
    let cfg = EmConfig { max_iters: 100, tol: 1e-8, ..EmConfig::default() };
    match em_fit(&data, &Structure::Shared, TwoGroupsModel::constant(z.len(), current, 0.1), &cfg) {
        Ok(fit) if fit.model.mu.is_finite() && fit.model.mu > 0.0 => fit.model.mu,
        _ => current,
    }
}
