//! Interactively ordered martingale tests: sessions that expose masked values,
//! reveal bits only on selection, and accept any selection policy.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::log::{Action, Event};
use super::{amt::sign_scheme, Hypothesis, RejectionRule, Rule, Status, TestState, Tracker};
use crate::boundaries::IncrementClass;
use crate::masking::{mask, MaskPair, MaskScheme};
use crate::{Error, Result};

/// What an analyst may see about a hypothesis before it is picked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedEntry {
    pub id: usize,
    pub covariates: Vec<f64>,
    pub masked: f64,
}

/// Full p-values revealed so far, keyed by id, in reveal order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Filtration {
    revealed: BTreeMap<usize, f64>,
    order: Vec<usize>,
}

impl Filtration {
    pub fn is_revealed(&self, id: usize) -> bool {
        self.revealed.contains_key(&id)
    }

    pub fn p(&self, id: usize) -> Option<f64> {
        self.revealed.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// `(id, p)` in reveal order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.order.iter().map(|&id| (id, self.revealed[&id]))
    }

    fn reveal(&mut self, id: usize, p: f64) {
        if self.revealed.insert(id, p).is_none() {
            self.order.push(id);
        }
    }
}

/// The decision-time information of a batch session.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SessionView<'a> {
    pub scheme: MaskScheme,
    pub entries: &'a [MaskedEntry],
    pub included: &'a [usize],
    pub revealed: &'a Filtration,
    pub k: u64,
    pub statistic: f64,
    #[serde(skip)]
    index: &'a HashMap<usize, usize>,
    #[serde(skip)]
    in_m: &'a [bool],
}

impl<'a> SessionView<'a> {
    /// Build a view over caller-held data (used by replaying or external sessions).
    pub fn new(
        scheme: MaskScheme,
        entries: &'a [MaskedEntry],
        index: &'a HashMap<usize, usize>,
        in_m: &'a [bool],
        included: &'a [usize],
        revealed: &'a Filtration,
        statistic: f64,
    ) -> Self {
        Self { scheme, entries, included, revealed, k: included.len() as u64, statistic, index, in_m }
    }

    pub fn position(&self, id: usize) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn entry(&self, id: usize) -> Option<&'a MaskedEntry> {
        self.position(id).map(|i| &self.entries[i])
    }

    pub fn is_included(&self, id: usize) -> bool {
        self.position(id).is_some_and(|i| self.in_m[i])
    }

    /// Entries not yet in `M_k`.
    pub fn candidates(&self) -> impl Iterator<Item = &'a MaskedEntry> + '_ {
        self.entries.iter().zip(self.in_m.iter()).filter(|(_, &m)| !m).map(|(e, _)| e)
    }
}

/// A selection rule for the next hypothesis; sees only the masked view.
pub trait Policy {
    /// Candidate ids, best first, each with a policy score.
    fn rank(&mut self, view: &SessionView<'_>) -> Vec<(usize, f64)>;

    fn choose(&mut self, view: &SessionView<'_>) -> Option<usize> {
        self.rank(view).first().map(|c| c.0)
    }
}

/// Pick the smallest masked value first, ties by id.
#[derive(Debug, Clone, Default)]
pub struct SmallestMasked {
    order: Vec<usize>,
    cursor: usize,
}

fn by_masked(entries: &[MaskedEntry]) -> Vec<usize> {
    let mut ids: Vec<(f64, usize)> = entries.iter().map(|e| (e.masked, e.id)).collect();
    ids.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ids.into_iter().map(|x| x.1).collect()
}

impl Policy for SmallestMasked {
    fn rank(&mut self, view: &SessionView<'_>) -> Vec<(usize, f64)> {
        let cands: Vec<MaskedEntry> = view.candidates().cloned().collect();
        by_masked(&cands).into_iter().map(|id| (id, view.entry(id).map_or(0.0, |e| e.masked))).collect()
    }

    fn choose(&mut self, view: &SessionView<'_>) -> Option<usize> {
        if self.order.len() != view.entries.len() {
            self.order = by_masked(view.entries);
            self.cursor = 0;
        }
        while self.cursor < self.order.len() && view.is_included(self.order[self.cursor]) {
            self.cursor += 1;
        }
        self.order.get(self.cursor).copied()
    }
}

/// Result of one pick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PickOutcome {
    pub id: usize,
    pub p: f64,
    pub bit: f64,
    pub k: u64,
    pub statistic: f64,
    pub threshold: f64,
    pub status: Status,
}

fn check_rule(scheme: MaskScheme, rule: &Rule) -> Result<()> {
    scheme.validate()?;
    match (scheme.is_calibrator(), rule.description()) {
        (true, RejectionRule::Ville { .. }) => Ok(()),
        (false, RejectionRule::Boundary { spec }) if spec.family.increments() == IncrementClass::Gaussian => {
            sign_scheme(scheme)
        }
        _ => Err(Error::Unsupported("calibrator bits need the product rule; sign bits need a Gaussian boundary")),
    }
}

/// Batch interactive session. Bits stay private until their id is picked.
#[derive(Debug, Clone)]
pub struct ImtSession {
    scheme: MaskScheme,
    entries: Vec<MaskedEntry>,
    index: HashMap<usize, usize>,
    hidden: Vec<MaskPair>,
    ps: Vec<f64>,
    in_m: Vec<bool>,
    filtration: Filtration,
    tracker: Tracker,
    log: Vec<Event>,
}

impl ImtSession {
    pub fn new(hyps: &[Hypothesis], scheme: MaskScheme, rule: Rule) -> Result<Self> {
        check_rule(scheme, &rule)?;
        let mut index = HashMap::with_capacity(hyps.len());
        let mut entries = Vec::with_capacity(hyps.len());
        let mut hidden = Vec::with_capacity(hyps.len());
        let mut ps = Vec::with_capacity(hyps.len());
        for (i, h) in hyps.iter().enumerate() {
            if index.insert(h.id, i).is_some() {
                return Err(Error::DuplicateId(h.id));
            }
            let pair = mask(h.p, scheme)?;
            entries.push(MaskedEntry { id: h.id, covariates: h.covariates.clone(), masked: pair.masked });
            hidden.push(pair);
            ps.push(h.p);
        }
        Ok(Self {
            scheme,
            in_m: vec![false; entries.len()],
            entries,
            index,
            hidden,
            ps,
            filtration: Filtration::default(),
            tracker: Tracker::new(rule),
            log: Vec::new(),
        })
    }

    pub fn scheme(&self) -> MaskScheme {
        self.scheme
    }

    pub fn rule(&self) -> &Rule {
        self.tracker.rule()
    }

    /// The masked view `(id, covariates, g)` of every hypothesis.
    pub fn entries(&self) -> &[MaskedEntry] {
        &self.entries
    }

    pub fn view(&self) -> SessionView<'_> {
        let st = self.tracker.state();
        SessionView::new(
            self.scheme,
            &self.entries,
            &self.index,
            &self.in_m,
            &st.included,
            &self.filtration,
            st.statistic,
        )
    }

    pub fn state(&self) -> &TestState {
        self.tracker.state()
    }

    pub fn filtration(&self) -> &Filtration {
        &self.filtration
    }

    pub fn log(&self) -> &[Event] {
        &self.log
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Add `id` to `M_k`, reveal its p-value and update the statistic.
    pub fn pick(&mut self, id: usize) -> Result<PickOutcome> {
        if self.state().stopped() {
            return Err(Error::Stopped);
        }
        let pos = *self.index.get(&id).ok_or(Error::UnknownHypothesis(id))?;
        if self.in_m[pos] {
            return Err(Error::AlreadyPicked(id));
        }
        let pair = self.hidden[pos];
        let p = self.ps[pos];
        self.in_m[pos] = true;
        self.filtration.reveal(id, p);
        let st = self.tracker.include(id, None, pair.bit)?;
        let outcome = PickOutcome {
            id,
            p,
            bit: pair.bit,
            k: st.k,
            statistic: st.statistic,
            threshold: st.trajectory.last().map_or(f64::NAN, |t| t.threshold),
            status: st.status,
        };
        self.push_event(Action::Pick, Some(id), Some(p), None);
        if outcome.status == Status::Rejected {
            self.push_event(Action::Reject, None, None, None);
        } else if self.tracker.state().k as usize == self.entries.len() {
            self.tracker.finish(Status::Exhausted);
        }
        Ok(outcome)
    }

    /// End the session without rejection.
    pub fn stop(&mut self) -> Result<()> {
        if self.state().stopped() {
            return Err(Error::Stopped);
        }
        self.tracker.finish(Status::Exhausted);
        self.push_event(Action::Stop, None, None, None);
        Ok(())
    }

    fn push_event(&mut self, action: Action, id: Option<usize>, p: Option<f64>, t: Option<u64>) {
        let st = self.tracker.state();
        let threshold = st.trajectory.last().map(|pt| pt.threshold);
        self.log.push(Event {
            seq: self.log.len() as u64,
            action,
            id,
            p,
            t,
            k: st.k,
            statistic: st.statistic,
            threshold,
            status: st.status,
        });
    }
}

/// Run a batch session to completion under `policy`.
pub fn run_imt<P: Policy + ?Sized>(
    hyps: &[Hypothesis],
    scheme: MaskScheme,
    rule: &Rule,
    policy: &mut P,
) -> Result<TestState> {
    let mut session = ImtSession::new(hyps, scheme, rule.clone())?;
    drive(&mut session, policy)?;
    Ok(session.tracker.into_state())
}

/// Pick under `policy` until the session stops or no candidate remains.
pub fn drive<P: Policy + ?Sized>(session: &mut ImtSession, policy: &mut P) -> Result<()> {
    while !session.state().stopped() {
        match policy.choose(&session.view()) {
            Some(id) => {
                session.pick(id)?;
            }
            None => session.tracker.finish(Status::Exhausted),
        }
    }
    Ok(())
}

/// Product-martingale test on calibrator bits: reject once `Σ log f(p_i) >= log(1/α)`.
pub fn run_calibrator_test<P: Policy + ?Sized>(
    hyps: &[Hypothesis],
    scheme: MaskScheme,
    alpha: f64,
    policy: &mut P,
) -> Result<TestState> {
    if !scheme.is_calibrator() {
        return Err(Error::Unsupported("product test needs a calibrator scheme"));
    }
    run_imt(hyps, scheme, &Rule::ville(alpha)?, policy)
}

/// A p-value that has been fully revealed in the online setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevealedArrival {
    pub t: u64,
    pub id: usize,
    pub p: f64,
    pub included: bool,
}

/// What an online decision may use: the current arrival without its bit, plus
/// every earlier arrival in full.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OnlineView<'a> {
    pub t: u64,
    pub id: usize,
    pub masked: f64,
    pub covariates: &'a [f64],
    pub history: &'a [RevealedArrival],
    pub k: u64,
    pub statistic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Include,
    Skip,
}

/// Online interactive session.
#[derive(Debug, Clone)]
pub struct OnlineImt {
    scheme: MaskScheme,
    tracker: Tracker,
    history: Vec<RevealedArrival>,
    horizon: Option<u64>,
    log: Vec<Event>,
}

impl OnlineImt {
    pub fn new(scheme: MaskScheme, rule: Rule, horizon: Option<u64>) -> Result<Self> {
        check_rule(scheme, &rule)?;
        Ok(Self { scheme, tracker: Tracker::new(rule), history: Vec::new(), horizon, log: Vec::new() })
    }

    pub fn state(&self) -> &TestState {
        self.tracker.state()
    }

    pub fn into_state(self) -> TestState {
        self.tracker.into_state()
    }

    pub fn history(&self) -> &[RevealedArrival] {
        &self.history
    }

    pub fn log(&self) -> &[Event] {
        &self.log
    }

    /// Present the next arrival to `decide`; the bit is added only on include.
    pub fn step<F>(&mut self, h: &Hypothesis, decide: F) -> Result<Decision>
    where
        F: FnOnce(&OnlineView<'_>) -> Decision,
    {
        if self.state().stopped() {
            return Err(Error::Stopped);
        }
        let t = self.history.len() as u64 + 1;
        if self.horizon.is_some_and(|cap| t > cap) {
            self.tracker.finish(Status::HorizonReached);
            return Err(Error::Stopped);
        }
        let pair = mask(h.p, self.scheme)?;
        let st = self.tracker.state();
        let view = OnlineView {
            t,
            id: h.id,
            masked: pair.masked,
            covariates: &h.covariates,
            history: &self.history,
            k: st.k,
            statistic: st.statistic,
        };
        let decision = decide(&view);
        match decision {
            Decision::Include => {
                self.tracker.include(h.id, Some(t), pair.bit)?;
                self.history.push(RevealedArrival { t, id: h.id, p: h.p, included: true });
                self.push_event(Action::Include, h.id, h.p, t);
                if self.state().rejected() {
                    let st = self.tracker.state();
                    self.log.push(Event {
                        seq: self.log.len() as u64,
                        action: Action::Reject,
                        id: None,
                        p: None,
                        t: Some(t),
                        k: st.k,
                        statistic: st.statistic,
                        threshold: st.trajectory.last().map(|x| x.threshold),
                        status: st.status,
                    });
                }
            }
            Decision::Skip => {
                self.history.push(RevealedArrival { t, id: h.id, p: h.p, included: false });
                self.push_event(Action::Skip, h.id, h.p, t);
            }
        }
        Ok(decision)
    }

    /// Mark the stream as ended.
    pub fn finish(&mut self) {
        self.tracker.finish(Status::Exhausted);
    }

    fn push_event(&mut self, action: Action, id: usize, p: f64, t: u64) {
        let st = self.tracker.state();
        self.log.push(Event {
            seq: self.log.len() as u64,
            action,
            id: Some(id),
            p: Some(p),
            t: Some(t),
            k: st.k,
            statistic: st.statistic,
            threshold: st.trajectory.last().map(|x| x.threshold),
            status: st.status,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundaries::BoundarySpec;
    use crate::engine::{hypotheses, run_amt_batch, run_amt_online, ScreeningRule};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stitched() -> Rule {
        Rule::boundary(BoundarySpec::gaussian_stitched(0.05)).unwrap()
    }

    fn uniform(n: usize, seed: u64) -> Vec<Hypothesis> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|i| Hypothesis::new(i, rng.gen())).collect()
    }

    #[test]
    fn pick_reveals_and_increments() {
        let mut s = ImtSession::new(&hypotheses(&[0.01, 0.7, 0.3]), MaskScheme::Tent, stitched()).unwrap();
        let out = s.pick(0).unwrap();
        assert_eq!((out.p, out.bit, out.statistic, out.k), (0.01, 1.0, 1.0, 1));
        assert!(s.filtration().is_revealed(0) && !s.filtration().is_revealed(1));
        assert_eq!(s.pick(0), Err(Error::AlreadyPicked(0)));
        assert_eq!(s.pick(42), Err(Error::UnknownHypothesis(42)));
        s.pick(1).unwrap();
        s.pick(2).unwrap();
        assert_eq!(s.state().status, Status::Exhausted);
        assert_eq!(s.state().k, 3);
        assert_eq!(s.pick(1), Err(Error::Stopped));
    }

    #[test]
    fn manual_stop_freezes() {
        let mut s = ImtSession::new(&hypotheses(&[0.2, 0.7]), MaskScheme::Tent, stitched()).unwrap();
        s.stop().unwrap();
        assert_eq!(s.pick(0), Err(Error::Stopped));
        assert_eq!(s.stop(), Err(Error::Stopped));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let hyps = vec![Hypothesis::new(1, 0.2), Hypothesis::new(1, 0.3)];
        assert!(matches!(ImtSession::new(&hyps, MaskScheme::Tent, stitched()), Err(Error::DuplicateId(1))));
    }

    #[test]
    fn smallest_masked_reduces_to_amt() {
        for seed in 0..20 {
            let mut hyps = uniform(300, seed);
            for h in hyps.iter_mut().take(40) {
                h.p *= 0.05;
            }
            for scheme in [MaskScheme::Tent, MaskScheme::Railway] {
                let a = run_amt_batch(&hyps, scheme, &stitched()).unwrap();
                let b = run_imt(&hyps, scheme, &stitched(), &mut SmallestMasked::default()).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn online_threshold_reduces_to_amt_online() {
        for seed in 0..20 {
            let hyps = uniform(500, seed);
            let screen = ScreeningRule::new(0.1).unwrap();
            let a = run_amt_online(hyps.clone(), screen, MaskScheme::Tent, &stitched(), None).unwrap();
            let mut s = OnlineImt::new(MaskScheme::Tent, stitched(), None).unwrap();
            for h in &hyps {
                if s.state().stopped() {
                    break;
                }
                s.step(h, |v| if v.masked < 0.1 { Decision::Include } else { Decision::Skip }).unwrap();
            }
            s.finish();
            assert_eq!(a, s.into_state());
        }
    }

    #[test]
    fn online_include_all_is_preordered_signs() {
        let hyps = uniform(200, 3);
        let mut s = OnlineImt::new(MaskScheme::Tent, stitched(), None).unwrap();
        for h in &hyps {
            if s.state().stopped() {
                break;
            }
            s.step(h, |_| Decision::Include).unwrap();
        }
        let mut total = 0.0;
        for (pt, h) in s.state().trajectory.iter().zip(&hyps) {
            total += if h.p < 0.5 { 1.0 } else { -1.0 };
            assert_eq!(pt.statistic, total);
        }
    }

    #[test]
    fn online_skip_reveals_into_history() {
        let hyps = hypotheses(&[0.9, 0.2]);
        let mut s = OnlineImt::new(MaskScheme::Tent, stitched(), None).unwrap();
        s.step(&hyps[0], |_| Decision::Skip).unwrap();
        s.step(&hyps[1], |v| {
            assert_eq!(v.history.len(), 1);
            assert_eq!(v.history[0].p, 0.9);
            assert!(!v.history[0].included);
            Decision::Include
        })
        .unwrap();
        assert_eq!(s.state().included, vec![1]);
        assert_eq!(s.state().statistic, 1.0);
    }

    #[test]
    fn statistic_matches_recomputed_sum() {
        let hyps = uniform(400, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = ImtSession::new(&hyps, MaskScheme::Railway, stitched()).unwrap();
        let mut ids: Vec<usize> = (0..400).collect();
        while !s.state().stopped() {
            let j = rng.gen_range(0..ids.len());
            let id = ids.swap_remove(j);
            s.pick(id).unwrap();
            let recomputed: f64 = s
                .state()
                .included
                .iter()
                .map(|&i| mask(hyps[i].p, MaskScheme::Railway).unwrap().bit)
                .sum();
            assert_eq!(s.state().statistic, recomputed);
        }
    }

    #[test]
    fn views_carry_no_bits() {
        let hyps: Vec<Hypothesis> = uniform(20, 1).into_iter().map(|h| h.with_covariates(vec![1.0, 2.0])).collect();
        let mut s = ImtSession::new(&hyps, MaskScheme::Tent, stitched()).unwrap();
        s.pick(3).unwrap();
        let json = serde_json::to_string(&s.view()).unwrap();
        assert!(!json.contains("\"bit\""));
        assert!(!json.contains("\"p\":"));
        let mut o = OnlineImt::new(MaskScheme::Tent, stitched(), None).unwrap();
        o.step(&hyps[0], |v| {
            let json = serde_json::to_string(v).unwrap();
            assert!(!json.contains("bit"));
            Decision::Skip
        })
        .unwrap();
    }

    #[test]
    fn calibrator_product_examples() {
        let scheme = MaskScheme::Calibrator { c: 0.5 };
        let st = run_calibrator_test(&hypotheses(&[0.0006]), scheme, 0.05, &mut SmallestMasked::default()).unwrap();
        assert_eq!(st.rejected_at, Some(1));
        let st = run_calibrator_test(&hypotheses(&[0.00065]), scheme, 0.05, &mut SmallestMasked::default()).unwrap();
        assert_eq!(st.status, Status::Exhausted);
        // Boundary: 0.5 p^{-1/2} = 20 at p = 0.000625.
        assert!((0.5 * 0.000625f64.powf(-0.5) - 20.0).abs() < 1e-9);
        let st = run_calibrator_test(&hypotheses(&[0.25; 100]), scheme, 0.05, &mut SmallestMasked::default()).unwrap();
        assert_eq!(st.status, Status::Exhausted);
        assert!(st.trajectory.iter().all(|t| t.statistic.abs() < 1e-12));
        assert!(
            run_calibrator_test(&hypotheses(&[0.1]), MaskScheme::Tent, 0.05, &mut SmallestMasked::default()).is_err()
        );
    }

    #[test]
    fn rule_scheme_pairing_enforced() {
        let h = hypotheses(&[0.1]);
        assert!(ImtSession::new(&h, MaskScheme::Calibrator { c: 0.5 }, stitched()).is_err());
        assert!(ImtSession::new(&h, MaskScheme::Tent, Rule::ville(0.05).unwrap()).is_err());
    }
}
