//! Preordered martingale tests and classical one-shot baselines.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{Combiner, Rule, Status, TestState, Tracker};
use crate::stats::{chisq_upper_quantile, norm_upper_quantile};
use crate::{Error, Result};

/// Consume `ps` in order with raw increments `f(p)`, centered by the engine.
pub fn run_preordered(ps: &[f64], combiner: Combiner, rule: &Rule) -> Result<TestState> {
    let spec = rule.spec().ok_or(Error::Incompatible { combiner: combiner.name(), family: "non-boundary rule" })?;
    combiner.check_family(spec.family)?;
    let mut tracker = Tracker::new(rule.clone());
    let centering = combiner.centering();
    for (i, &p) in ps.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidPValue(p));
        }
        if tracker.include(i, None, combiner.increment(p) - centering)?.stopped() {
            break;
        }
    }
    tracker.finish(Status::Exhausted);
    Ok(tracker.into_state())
}

/// One-shot Stouffer: reject when `Σ Φ⁻¹(1 - p_i) > sqrt(n) Φ⁻¹(1 - α)`.
pub fn batch_stouffer(ps: &[f64], alpha: f64) -> bool {
    if ps.is_empty() {
        return false;
    }
    let s: f64 = ps.iter().map(|&p| norm_upper_quantile(p)).sum();
    s > (ps.len() as f64).sqrt() * norm_upper_quantile(alpha)
}

/// One-shot Fisher: reject when `-2 Σ log p_i` exceeds the chi-square(2n) quantile.
pub fn batch_fisher(ps: &[f64], alpha: f64) -> bool {
    if ps.is_empty() {
        return false;
    }
    let s: f64 = ps.iter().map(|&p| super::fisher_increment(p)).sum();
    s > chisq_upper_quantile(alpha, 2.0 * ps.len() as f64)
}

pub fn bonferroni_batch(ps: &[f64], alpha: f64) -> bool {
    let n = ps.len() as f64;
    ps.iter().any(|&p| p <= alpha / n)
}

// Σ_{k≥2} 1 / (k log² k): exact to 10^6, Euler-Maclaurin beyond.
fn bonferroni_normalizer() -> f64 {
    static Z: OnceLock<f64> = OnceLock::new();
    *Z.get_or_init(|| {
        let n = 1_000_000u64;
        let f = |k: f64| 1.0 / (k * k.ln().powi(2));
        let mut s = 0.0;
        for k in (2..=n).rev() {
            s += f(k as f64);
        }
        let x = n as f64;
        let l = x.ln();
        let df = -(l + 2.0) / (x * x * l.powi(3));
        s + 1.0 / l - 0.5 * f(x) - df / 12.0
    })
}

/// Online Bonferroni levels `α_k = A / (k log² k)` for `k > 1`, `α_1 = 0`,
/// with `A` chosen so that `Σ α_k = α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BonferroniWeights {
    alpha: f64,
    scale: f64,
}

impl BonferroniWeights {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidAlpha(alpha));
        }
        Ok(Self { alpha, scale: alpha / bonferroni_normalizer() })
    }

    /// Custom scale; rejected when the implied total exceeds `alpha`.
    pub fn with_scale(alpha: f64, scale: f64) -> Result<Self> {
        let total = scale * bonferroni_normalizer();
        if total > alpha * (1.0 + 1e-12) {
            return Err(Error::WeightsTooLarge(total));
        }
        Ok(Self { alpha, scale })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn weight(&self, k: u64) -> f64 {
        if k <= 1 {
            0.0
        } else {
            let kf = k as f64;
            self.scale / (kf * kf.ln().powi(2))
        }
    }
}

/// Reject at the first arrival `k` with `p_k <= α_k`; the recorded statistic is `p_k`.
pub fn bonferroni_online<I>(stream: I, weights: BonferroniWeights, horizon: Option<u64>) -> Result<TestState>
where
    I: IntoIterator<Item = f64>,
{
    let mut tracker = Tracker::new(Rule::online_bonferroni(weights));
    let mut capped = false;
    for (i, p) in stream.into_iter().enumerate() {
        if horizon.is_some_and(|h| i as u64 >= h) {
            capped = true;
            break;
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidPValue(p));
        }
        if tracker.observe(i, Some(i as u64 + 1), p)?.stopped() {
            break;
        }
    }
    tracker.finish(if capped { Status::HorizonReached } else { Status::Exhausted });
    Ok(tracker.into_state())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundaries::{BoundaryFamily, BoundarySpec};
    use crate::stats::norm_sf;

    #[test]
    fn preordered_strong_front_rejects_early() {
        let p3 = norm_sf(3.0);
        let mut ps = vec![p3; 50];
        ps.extend(std::iter::repeat(0.37).take(100));
        let rule = Rule::boundary(BoundarySpec::gaussian_linear(0.05, 25.0)).unwrap();
        let st = run_preordered(&ps, Combiner::Stouffer, &rule).unwrap();
        // 3k > sqrt(-ln α / 50) k + sqrt(-25 ln α / 2) first holds at k = 3.
        let la = -(0.05f64).ln();
        let hand = (1..=50).find(|&k| 3.0 * k as f64 > (la / 50.0).sqrt() * k as f64 + (25.0 * la / 2.0).sqrt());
        assert_eq!(hand, Some(3));
        assert_eq!(st.rejected_at, Some(3));
        assert_eq!(st.status, Status::Rejected);
        assert_eq!(st.trajectory.len(), 3);
    }

    #[test]
    fn preordered_half_never_rejects() {
        let rule = Rule::boundary(BoundarySpec::gaussian_stitched(0.05)).unwrap();
        let st = run_preordered(&[0.5; 200], Combiner::Stouffer, &rule).unwrap();
        assert_eq!(st.status, Status::Exhausted);
        assert_eq!(st.k, 200);
        assert!(st.trajectory.iter().all(|pt| pt.statistic == 0.0));
    }

    #[test]
    fn preordered_fisher_is_centered() {
        let spec = BoundarySpec::linear(BoundaryFamily::ExpLinear, 0.05, 100.0);
        let e1 = (-1.0f64).exp();
        let st = run_preordered(&[e1; 20], Combiner::Fisher, &Rule::boundary(spec).unwrap()).unwrap();
        assert!(st.trajectory.iter().all(|pt| pt.statistic.abs() < 1e-12));
    }

    #[test]
    fn preordered_rejects_mismatch() {
        let rule = Rule::boundary(BoundarySpec::gaussian_stitched(0.05)).unwrap();
        assert!(matches!(run_preordered(&[0.1], Combiner::Fisher, &rule), Err(Error::Incompatible { .. })));
        assert!(run_preordered(&[0.1], Combiner::Stouffer, &Rule::ville(0.05).unwrap()).is_err());
        assert!(run_preordered(&[1.5], Combiner::Stouffer, &rule).is_err());
    }

    #[test]
    fn batch_examples() {
        assert!(batch_stouffer(&[0.04], 0.05));
        assert!(!batch_stouffer(&[0.5; 10], 0.05));
        assert!(!batch_fisher(&[0.5; 10], 0.05));
        assert!(batch_fisher(&[0.001, 0.5], 0.05));
        let mut ps = vec![0.5; 9];
        ps.push(0.001);
        assert!(bonferroni_batch(&ps, 0.05));
        assert!(!bonferroni_batch(&[0.5; 10], 0.05));
    }

    #[test]
    fn bonferroni_online_examples() {
        let w = BonferroniWeights::new(0.05).unwrap();
        assert_eq!(w.weight(1), 0.0);
        let st = bonferroni_online([0.5; 100], w, None).unwrap();
        assert_eq!(st.status, Status::Exhausted);
        let st = bonferroni_online([0.5, 0.5, 1e-9, 0.5], w, None).unwrap();
        assert_eq!(st.rejected_at, Some(3));
        assert_eq!(st.rejection_time(), Some(3));
        let st = bonferroni_online([0.5; 100], w, Some(10)).unwrap();
        assert_eq!(st.status, Status::HorizonReached);
        assert_eq!(st.k, 10);
        assert!(BonferroniWeights::with_scale(0.05, w.scale() * 1.01).is_err());
    }

    #[test]
    fn bonferroni_weights_sum_to_alpha() {
        // Independent oracle: partial sum to 10^8 plus the integral tail 1 / log N.
        let w = BonferroniWeights::new(0.05).unwrap();
        let n = 100_000_000u64;
        let mut s = 0.0;
        for k in (2..=n).rev() {
            s += w.weight(k);
        }
        s += w.scale() / (n as f64).ln();
        assert!((s - 0.05).abs() < 1e-6, "{s}");
    }
}
