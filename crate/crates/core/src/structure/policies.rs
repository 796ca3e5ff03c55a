//! Structured selection policies built on the working model.

use std::collections::HashMap;

use super::em::{e_step, em_fit, EmConfig, EmData, Structure, TreeDirection, TwoGroupsModel};
use crate::engine::{Policy, SessionView};
use crate::masking::MaskScheme;

/// When a model-based policy refits: at `k = 0`, then at `first`, and from
/// there on whenever `k` has grown by the factor `ratio`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefitSchedule {
    pub first: u64,
    pub ratio: f64,
}

impl RefitSchedule {
    pub fn geometric(first: u64, ratio: f64) -> Self {
        Self { first: first.max(1), ratio: ratio.max(1.0) }
    }

    pub fn every(step: u64) -> Self {
        Self { first: step.max(1), ratio: 1.0 }
    }

    fn next_after(&self, k: u64) -> u64 {
        if k < self.first {
            return self.first;
        }
        if self.ratio <= 1.0 {
            k + self.first
        } else {
            ((k as f64 * self.ratio).ceil() as u64).max(k + 1)
        }
    }
}

impl Default for RefitSchedule {
    fn default() -> Self {
        Self::geometric(10, 2.0)
    }
}

#[derive(Debug, Clone)]
struct Fitter {
    schedule: RefitSchedule,
    cfg: EmConfig,
    model: Option<TwoGroupsModel>,
    posterior: Vec<f64>,
    // Masked preimages are fixed for a session; only reveals are patched in.
    data: Option<EmData>,
    synced: usize,
    next_refit: u64,
    init_mu: f64,
    init_pi: f64,
}

impl Fitter {
    fn new(schedule: RefitSchedule, cfg: EmConfig) -> Self {
        Self { schedule, cfg, model: None, posterior: Vec::new(), data: None, synced: 0, next_refit: 0, init_mu: 2.0, init_pi: 0.1 }
    }

    fn refresh(&mut self, view: &SessionView<'_>, structure: &Structure) {
        if self.model.is_some() && view.k < self.next_refit && self.posterior.len() == view.entries.len() {
            return;
        }
        self.sync(view);
        let data = self.data.as_ref().expect("synced");
        let init = self
            .model
            .take()
            .filter(|m| m.pi.len() == data.len())
            .unwrap_or_else(|| TwoGroupsModel::constant(data.len(), self.init_mu, self.init_pi));
        match em_fit(data, structure, init.clone(), &self.cfg) {
            Ok(fit) => {
                self.posterior = fit.posterior;
                self.model = Some(fit.model);
            }
            Err(_) => {
                self.posterior = e_step(data, &init).posterior();
                self.model = Some(init);
            }
        }
        self.next_refit = self.schedule.next_after(view.k);
    }

    fn sync(&mut self, view: &SessionView<'_>) {
        let stale = self.data.as_ref().map_or(true, |d| d.len() != view.entries.len())
            || view.revealed.len() < self.synced;
        if stale {
            self.data = Some(EmData::from_view(view));
            self.synced = view.revealed.len();
            return;
        }
        let data = self.data.as_mut().expect("checked above");
        for (id, p) in view.revealed.iter().skip(self.synced) {
            if let Some(i) = view.position(id) {
                data.reveal(i, p);
            }
        }
        self.synced = view.revealed.len();
    }
}

fn better(a: (f64, f64, usize), b: (f64, f64, usize)) -> bool {
    // Larger score, then smaller masked value, then smaller id.
    a.0 > b.0 || (a.0 == b.0 && (a.1 < b.1 || (a.1 == b.1 && a.2 < b.2)))
}

fn grid_cell(covariates: &[f64]) -> (i64, i64) {
    (
        covariates.first().copied().unwrap_or(0.0).round() as i64,
        covariates.get(1).copied().unwrap_or(0.0).round() as i64,
    )
}

const NEIGHBOURS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Next hypothesis on a grid: the best-scored candidate among the four
/// neighbours of `M_k`, or among all candidates while `M_k` is empty.
/// `score` is indexed by entry position; ties go to the smaller masked value.
pub fn grid_boundary_pick(view: &SessionView<'_>, score: &[f64]) -> Option<usize> {
    let cells: HashMap<(i64, i64), usize> =
        view.entries.iter().enumerate().map(|(i, e)| (grid_cell(&e.covariates), i)).collect();
    let mut best: Option<(f64, f64, usize)> = None;
    for (i, e) in view.entries.iter().enumerate() {
        if view.is_included(e.id) {
            continue;
        }
        if view.k > 0 {
            let (x, y) = grid_cell(&e.covariates);
            let touches = NEIGHBOURS.iter().any(|(dx, dy)| {
                cells.get(&(x + dx, y + dy)).is_some_and(|&j| view.is_included(view.entries[j].id))
            });
            if !touches {
                continue;
            }
        }
        let cand = (score[i], e.masked, e.id);
        if best.map_or(true, |b| better(cand, b)) {
            best = Some(cand);
        }
    }
    best.map(|b| b.2)
}

/// Grows `M_k` as a 4-connected region on a grid, preferring the boundary
/// cell with the highest posterior under a spline EM fit.
#[derive(Debug, Clone)]
pub struct GridPolicy {
    knots_per_axis: usize,
    fitter: Fitter,
    structure: Option<Structure>,
    cells: HashMap<(i64, i64), usize>,
    frontier: Frontier,
    seen: usize,
}

// Unordered set of entry positions with O(1) insert and remove.
#[derive(Debug, Clone, Default)]
struct Frontier {
    items: Vec<usize>,
    slot: Vec<usize>,
}

impl Frontier {
    const ABSENT: usize = usize::MAX;

    fn reset(&mut self, n: usize) {
        self.items.clear();
        self.slot = vec![Self::ABSENT; n];
    }

    fn insert(&mut self, i: usize) {
        if self.slot[i] == Self::ABSENT {
            self.slot[i] = self.items.len();
            self.items.push(i);
        }
    }

    fn remove(&mut self, i: usize) {
        let s = self.slot[i];
        if s != Self::ABSENT {
            self.items.swap_remove(s);
            if let Some(&moved) = self.items.get(s) {
                self.slot[moved] = s;
            }
            self.slot[i] = Self::ABSENT;
        }
    }
}

impl GridPolicy {
    pub fn new(knots_per_axis: usize, schedule: RefitSchedule, cfg: EmConfig) -> Self {
        Self {
            knots_per_axis,
            fitter: Fitter::new(schedule, cfg),
            structure: None,
            cells: HashMap::new(),
            frontier: Frontier::default(),
            seen: 0,
        }
    }

    /// Starting values for the first fit.
    pub fn with_init(mut self, mu: f64, pi: f64) -> Self {
        self.fitter.init_mu = mu;
        self.fitter.init_pi = pi;
        self
    }

    pub fn model(&self) -> Option<&TwoGroupsModel> {
        self.fitter.model.as_ref()
    }

    fn prepare(&mut self, view: &SessionView<'_>) {
        if self.structure.is_none() || self.cells.len() != view.entries.len() {
            let pts: Vec<[f64; 2]> = view
                .entries
                .iter()
                .map(|e| [e.covariates.first().copied().unwrap_or(0.0), e.covariates.get(1).copied().unwrap_or(0.0)])
                .collect();
            self.structure = Some(Structure::grid_spline(&pts, self.knots_per_axis));
            self.cells = view.entries.iter().enumerate().map(|(i, e)| (grid_cell(&e.covariates), i)).collect();
            self.frontier.reset(view.entries.len());
            self.seen = 0;
        }
        if view.included.len() < self.seen {
            self.frontier.reset(view.entries.len());
            self.seen = 0;
        }
        for &id in &view.included[self.seen..] {
            let Some(pos) = view.position(id) else { continue };
            self.frontier.remove(pos);
            let (x, y) = grid_cell(&view.entries[pos].covariates);
            for (dx, dy) in NEIGHBOURS {
                if let Some(&j) = self.cells.get(&(x + dx, y + dy)) {
                    if !view.is_included(view.entries[j].id) {
                        self.frontier.insert(j);
                    }
                }
            }
        }
        self.seen = view.included.len();
        if let Some(s) = &self.structure {
            self.fitter.refresh(view, s);
        }
    }

    fn pool(&self, view: &SessionView<'_>) -> Vec<usize> {
        if view.k == 0 {
            (0..view.entries.len()).collect()
        } else {
            self.frontier.items.clone()
        }
    }
}

impl Policy for GridPolicy {
    fn rank(&mut self, view: &SessionView<'_>) -> Vec<(usize, f64)> {
        self.prepare(view);
        let mut c: Vec<(f64, f64, usize)> = self
            .pool(view)
            .into_iter()
            .map(|i| (self.fitter.posterior[i], view.entries[i].masked, view.entries[i].id))
            .collect();
        c.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
        c.into_iter().map(|x| (x.2, x.0)).collect()
    }

    fn choose(&mut self, view: &SessionView<'_>) -> Option<usize> {
        self.prepare(view);
        let mut best: Option<(f64, f64, usize)> = None;
        let all: Vec<usize>;
        let pool = if view.k == 0 {
            all = (0..view.entries.len()).collect();
            &all
        } else {
            &self.frontier.items
        };
        for &i in pool {
            let e = &view.entries[i];
            let cand = (self.fitter.posterior[i], e.masked, e.id);
            if best.map_or(true, |b| better(cand, b)) {
                best = Some(cand);
            }
        }
        best.map(|b| b.2)
    }
}

/// Entry positions whose parent is already in `M_k` (or who have none).
fn tree_frontier(view: &SessionView<'_>, parent: &[Option<usize>]) -> Vec<usize> {
    (0..view.entries.len())
        .filter(|&i| {
            !view.is_included(view.entries[i].id)
                && parent[i].map_or(true, |p| view.is_included(view.entries[p].id))
        })
        .collect()
}

/// Next hypothesis on a tree: among nodes whose parent is in `M_k`, the one
/// with the highest score, ties to the smaller masked value. `parent` and
/// `score` are indexed by entry position.
pub fn tree_leaf_pick(view: &SessionView<'_>, parent: &[Option<usize>], score: Option<&[f64]>) -> Option<usize> {
    let mut best: Option<(f64, f64, usize)> = None;
    for i in tree_frontier(view, parent) {
        let e = &view.entries[i];
        let cand = (score.map_or(0.0, |s| s[i]), e.masked, e.id);
        if best.map_or(true, |b| better(cand, b)) {
            best = Some(cand);
        }
    }
    best.map(|b| b.2)
}

/// Keeps `M_k` a rooted subtree. Without a model it expands the frontier
/// node with the smallest masked value; with one it uses the posterior of a
/// tree-monotone EM fit.
#[derive(Debug, Clone)]
pub struct TreePolicy {
    parent: Vec<Option<usize>>,
    model: Option<(Structure, Fitter)>,
}

impl TreePolicy {
    pub fn model_free(parent: Vec<Option<usize>>) -> Self {
        Self { parent, model: None }
    }

    pub fn modeled(parent: Vec<Option<usize>>, direction: TreeDirection, schedule: RefitSchedule, cfg: EmConfig) -> Self {
        let s = Structure::TreeIsotonic { parent: parent.clone(), direction };
        Self { parent, model: Some((s, Fitter::new(schedule, cfg))) }
    }

    fn scores(&mut self, view: &SessionView<'_>) -> Option<&[f64]> {
        match &mut self.model {
            None => None,
            Some((s, f)) => {
                f.refresh(view, s);
                Some(&f.posterior)
            }
        }
    }
}

impl Policy for TreePolicy {
    fn rank(&mut self, view: &SessionView<'_>) -> Vec<(usize, f64)> {
        let parent = self.parent.clone();
        let score = self.scores(view).map(<[f64]>::to_vec);
        let mut c: Vec<(f64, f64, usize)> = tree_frontier(view, &parent)
            .into_iter()
            .map(|i| (score.as_ref().map_or(0.0, |s| s[i]), view.entries[i].masked, view.entries[i].id))
            .collect();
        c.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
        c.into_iter().map(|x| (x.2, x.0)).collect()
    }

    fn choose(&mut self, view: &SessionView<'_>) -> Option<usize> {
        let parent = std::mem::take(&mut self.parent);
        let pick = tree_leaf_pick(view, &parent, self.scores(view));
        self.parent = parent;
        pick
    }
}

/// Ranks every candidate by posterior under a shared two-groups fit.
#[derive(Debug, Clone)]
pub struct EmPolicy {
    fitter: Fitter,
}

impl EmPolicy {
    pub fn new(schedule: RefitSchedule, cfg: EmConfig) -> Self {
        Self { fitter: Fitter::new(schedule, cfg) }
    }
}

impl Default for EmPolicy {
    fn default() -> Self {
        Self::new(RefitSchedule::default(), EmConfig::interactive())
    }
}

impl Policy for EmPolicy {
    fn rank(&mut self, view: &SessionView<'_>) -> Vec<(usize, f64)> {
        self.fitter.refresh(view, &Structure::Shared);
        let mut c: Vec<(f64, f64, usize)> = view
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| !view.is_included(e.id))
            .map(|(i, e)| (self.fitter.posterior[i], e.masked, e.id))
            .collect();
        c.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
        c.into_iter().map(|x| (x.2, x.0)).collect()
    }
}

/// Screening threshold for online blocks: `2c` after ten consecutive
/// p-values below 0.1, `c/4` otherwise, and `c` for the first ten steps.
pub fn block_adaptive_threshold(t: u64, recent: &[f64], c: f64) -> f64 {
    if t <= 10 || recent.len() < 10 {
        return c;
    }
    if recent[recent.len() - 10..].iter().all(|&p| p < 0.1) {
        2.0 * c
    } else {
        c / 4.0
    }
}

/// Parents whose posterior falls below this discard their subtree.
pub const ONLINE_TREE_KEEP: f64 = 0.6;

/// Prior handed to a child from its parent's posterior, or `None` when the
/// subtree should be discarded.
pub fn online_tree_prior(parent_posterior: f64) -> Option<f64> {
    (parent_posterior >= ONLINE_TREE_KEEP).then_some(parent_posterior)
}

/// What is known about a single hypothesis when scoring it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Evidence {
    Masked(f64),
    Revealed(f64),
}

/// Posterior non-null probability of one hypothesis under a constant-mean
/// two-groups model with prior `pi`.
pub fn single_posterior(scheme: MaskScheme, mu: f64, pi: f64, evidence: Evidence) -> f64 {
    let mut data = EmData::default();
    match evidence {
        Evidence::Masked(g) => data.push_masked(scheme, g),
        Evidence::Revealed(p) => data.push_revealed(p),
    }
    e_step(&data, &TwoGroupsModel::constant(1, mu, pi)).posterior()[0]
}
