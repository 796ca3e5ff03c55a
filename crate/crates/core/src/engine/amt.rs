//! Adaptively ordered martingale tests.

use serde::{Deserialize, Serialize};

use super::{Hypothesis, Rule, Status, TestState, Tracker};
use crate::masking::{mask, MaskPair, MaskScheme};
use crate::{Error, Result};

/// Online screen: hypothesis `t` enters the statistic iff `g(p_t) < c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreeningRule {
    pub threshold: f64,
}

impl ScreeningRule {
    pub fn new(threshold: f64) -> Result<Self> {
        if threshold > 0.0 && threshold <= 0.5 {
            Ok(Self { threshold })
        } else {
            Err(Error::InvalidThreshold(threshold))
        }
    }

    pub fn admits(&self, masked: f64) -> bool {
        masked < self.threshold
    }
}

pub(crate) fn sign_scheme(scheme: MaskScheme) -> Result<()> {
    match scheme {
        MaskScheme::Tent | MaskScheme::Railway => Ok(()),
        _ => Err(Error::Unsupported("sign-bit engines need the tent or railway scheme")),
    }
}

/// Batch setting: include hypotheses in ascending masked value (ties by id).
pub fn run_amt_batch(hyps: &[Hypothesis], scheme: MaskScheme, rule: &Rule) -> Result<TestState> {
    sign_scheme(scheme)?;
    rule.gaussian("AMT")?;
    let mut order: Vec<(MaskPair, usize)> = hyps
        .iter()
        .map(|h| Ok((mask(h.p, scheme)?, h.id)))
        .collect::<Result<_>>()?;
    order.sort_by(|a, b| a.0.masked.total_cmp(&b.0.masked).then(a.1.cmp(&b.1)));
    let mut tracker = Tracker::new(rule.clone());
    for (pair, id) in order {
        if tracker.include(id, None, pair.bit)?.stopped() {
            break;
        }
    }
    tracker.finish(Status::Exhausted);
    Ok(tracker.into_state())
}

/// Online setting: screen each arrival on its masked value, add the bit on entry.
pub fn run_amt_online<I>(
    stream: I,
    screen: ScreeningRule,
    scheme: MaskScheme,
    rule: &Rule,
    horizon: Option<u64>,
) -> Result<TestState>
where
    I: IntoIterator<Item = Hypothesis>,
{
    sign_scheme(scheme)?;
    rule.gaussian("AMT")?;
    let mut tracker = Tracker::new(rule.clone());
    let mut capped = false;
    for (i, h) in stream.into_iter().enumerate() {
        let t = i as u64 + 1;
        if horizon.is_some_and(|cap| t > cap) {
            capped = true;
            break;
        }
        let pair = mask(h.p, scheme)?;
        if screen.admits(pair.masked) && tracker.include(h.id, Some(t), pair.bit)?.stopped() {
            break;
        }
    }
    tracker.finish(if capped { Status::HorizonReached } else { Status::Exhausted });
    Ok(tracker.into_state())
}
