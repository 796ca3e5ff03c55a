//! Simulated instances. Truth labels travel in a separate value so that no
//! engine-facing type can carry them.

use gnt_core::engine::Hypothesis;
use gnt_core::stats::norm_sf;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::seeds::{stream, Purpose};
use crate::{Error, Result};

/// Where a grid disc sits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Center,
    /// Tangent to the two edges meeting at the origin.
    Corner,
    /// Arbitrary center; cells off the grid are clipped.
    At { x: f64, y: f64 },
}

/// Shape of the non-null set in a batch tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeSignal {
    /// A rooted subtree: a node is non-null only if its parent is.
    Decreasing,
    /// Closed downward: a node is non-null only if all its children are.
    Increasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Non-nulls uniformly placed among the first `max(n_nonnull, sparsity·n)` ids.
    SparsityLine { sparsity: f64 },
    /// A square grid with a disc of non-nulls; `n` must equal `side²`.
    GridBlock { side: usize, radius: f64, placement: Placement },
    /// A complete tree listed in level order.
    BatchTree { root_fanout: usize, fanout: usize, levels: usize, signal: TreeSignal },
    /// A stream where blocks of `block_len` non-nulls follow geometric gaps,
    /// making `rate` the long-run non-null fraction. `block_len = 1` gives
    /// i.i.d. Bernoulli(`rate`) labels.
    OnlineBlocks { block_len: usize, rate: f64 },
    /// A tree revealed level by level. First-generation children have prior
    /// `low_prior`, except `high_children` of them with `high_prior`; the
    /// `k`-th child of every later node keeps `1 - decay[k]` of its parent's
    /// probability.
    OnlineTree {
        root_fanout: usize,
        fanout: usize,
        levels: usize,
        high_children: usize,
        low_prior: f64,
        high_prior: f64,
        decay: Vec<f64>,
    },
    /// Non-nulls at random positions; nulls drawn from `N(null_mean, 1)`.
    ConservativeNulls { null_mean: f64 },
}

/// A simulation scenario. `n_nonnull` is the non-null count for the kinds
/// that fix it (sparsity line, batch tree, conservative nulls); the other
/// geometries realize their own count, reported in [`Truth`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(flatten)]
    pub kind: ScenarioKind,
    pub n: usize,
    #[serde(default)]
    pub n_nonnull: usize,
    pub mu: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub reps: usize,
}

fn default_reps() -> usize {
    500
}

/// Side information visible to methods: geometry and a data-independent
/// preorder for the preordered tests.
#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    Line,
    Grid { side: usize },
    Tree { parent: Vec<Option<usize>> },
    /// Like `Tree`, plus the known prior of each first-generation node.
    OnlineTree { parent: Vec<Option<usize>>, prior: Vec<Option<f64>> },
}

impl Layout {
    pub fn name(&self) -> &'static str {
        match self {
            Layout::Line => "line",
            Layout::Grid { .. } => "grid",
            Layout::Tree { .. } => "tree",
            Layout::OnlineTree { .. } => "online tree",
        }
    }

    pub fn parent(&self) -> Option<&[Option<usize>]> {
        match self {
            Layout::Tree { parent } | Layout::OnlineTree { parent, .. } => Some(parent),
            _ => None,
        }
    }
}

/// Everything a method may see. Ids equal positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub hyps: Vec<Hypothesis>,
    pub layout: Layout,
    /// Data-independent order used by the preordered tests.
    pub preorder: Vec<usize>,
}

impl Instance {
    pub fn len(&self) -> usize {
        self.hyps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hyps.is_empty()
    }

    pub fn p_values(&self) -> Vec<f64> {
        self.hyps.iter().map(|h| h.p).collect()
    }

    pub fn preordered_p(&self) -> Vec<f64> {
        self.preorder.iter().map(|&i| self.hyps[i].p).collect()
    }
}

/// Hidden labels, used only for scoring and reporting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Truth {
    pub nonnull: Vec<bool>,
}

impl Truth {
    pub fn count(&self) -> usize {
        self.nonnull.iter().filter(|&&r| r).count()
    }
}

impl Scenario {
    pub fn new(kind: ScenarioKind, n: usize, n_nonnull: usize, mu: f64) -> Self {
        Self { kind, n, n_nonnull, mu, seed: 0, reps: default_reps() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn is_online(&self) -> bool {
        matches!(self.kind, ScenarioKind::OnlineBlocks { .. } | ScenarioKind::OnlineTree { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Scenario(m.to_string()));
        if self.n == 0 {
            return bad("n must be positive");
        }
        if self.n_nonnull > self.n {
            return bad("n_nonnull exceeds n");
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad("mu must be finite and nonnegative");
        }
        if self.reps == 0 {
            return bad("reps must be positive");
        }
        match &self.kind {
            ScenarioKind::SparsityLine { sparsity } if !(*sparsity > 0.0 && *sparsity <= 1.0) => {
                bad("sparsity must lie in (0, 1]")
            }
            ScenarioKind::GridBlock { side, radius, .. } => {
                if side * side != self.n {
                    bad("grid n must equal side squared")
                } else if !(*radius >= 0.0) {
                    bad("radius must be nonnegative")
                } else {
                    Ok(())
                }
            }
            ScenarioKind::BatchTree { root_fanout, fanout, levels, .. } => {
                if *root_fanout == 0 || *fanout == 0 || *levels == 0 {
                    bad("tree shape must be positive")
                } else if tree_size(*root_fanout, *fanout, *levels) != self.n {
                    bad("tree n must equal the node count")
                } else {
                    Ok(())
                }
            }
            ScenarioKind::OnlineBlocks { block_len, rate } => {
                if *block_len == 0 || !(*rate > 0.0 && *rate < 1.0) {
                    bad("blocks need positive length and a rate in (0, 1)")
                } else {
                    Ok(())
                }
            }
            ScenarioKind::OnlineTree { root_fanout, fanout, levels, high_children, low_prior, high_prior, decay } => {
                let prob = |x: f64| (0.0..=1.0).contains(&x);
                if *root_fanout == 0 || *fanout == 0 || *levels == 0 || high_children > root_fanout {
                    bad("invalid online tree shape")
                } else if decay.len() != *fanout || !decay.iter().all(|&d| prob(d)) {
                    bad("decay needs one proportion in [0, 1] per child")
                } else if !prob(*low_prior) || !prob(*high_prior) {
                    bad("priors must be probabilities")
                } else if online_tree_size(*root_fanout, *fanout, *levels) != self.n {
                    bad("online tree n must equal the node count")
                } else {
                    Ok(())
                }
            }
            ScenarioKind::ConservativeNulls { null_mean } if !(*null_mean <= 0.0 && null_mean.is_finite()) => {
                bad("null mean must be finite and nonpositive")
            }
            _ => Ok(()),
        }
    }

    /// Replicate `rep` of this scenario, reproducible from `(seed, rep)`.
    pub fn generate(&self, rep: u64) -> Result<(Instance, Truth)> {
        self.validate()?;
        let n = self.n;
        let mut noise = stream(self.seed, rep, Purpose::Noise);
        let eps: Vec<f64> = (0..n).map(|_| noise.sample(StandardNormal)).collect();
        let mut rng = stream(self.seed, rep, Purpose::Layout);
        let mut null_mean = 0.0;
        let identity: Vec<usize> = (0..n).collect();
        let (truth, layout, preorder, covariates) = match &self.kind {
            ScenarioKind::SparsityLine { sparsity } => {
                let span = ((sparsity * n as f64).round() as usize).clamp(self.n_nonnull, n);
                let mut r = vec![false; n];
                for i in index::sample(&mut rng, span, self.n_nonnull) {
                    r[i] = true;
                }
                (r, Layout::Line, identity, None)
            }
            ScenarioKind::ConservativeNulls { null_mean: m } => {
                null_mean = *m;
                let mut r = vec![false; n];
                for i in index::sample(&mut rng, n, self.n_nonnull) {
                    r[i] = true;
                }
                (r, Layout::Line, identity, None)
            }
            ScenarioKind::GridBlock { side, radius, placement } => {
                let (cx, cy) = match *placement {
                    Placement::Center => ((side / 2) as f64, (side / 2) as f64),
                    Placement::Corner => (*radius, *radius),
                    Placement::At { x, y } => (x, y),
                };
                let r: Vec<bool> = (0..n)
                    .map(|i| {
                        let (x, y) = ((i % side) as f64, (i / side) as f64);
                        (x - cx).powi(2) + (y - cy).powi(2) <= radius * radius
                    })
                    .collect();
                let covs = (0..n).map(|i| vec![(i % side) as f64, (i / side) as f64]).collect();
                let center = (side / 2) * side + side / 2;
                let preorder = random_growth(n, center, |i| grid_neighbours(i, *side), &mut rng);
                (r, Layout::Grid { side: *side }, preorder, Some(covs))
            }
            ScenarioKind::BatchTree { root_fanout, fanout, levels, signal } => {
                let parent = tree_parents(*root_fanout, *fanout, *levels, false);
                let children = children_of(&parent);
                let k = self.n_nonnull;
                let r = match signal {
                    TreeSignal::Decreasing => {
                        let grown = random_growth(n, 0, |i| children[i].clone(), &mut rng);
                        let mut r = vec![false; n];
                        for &i in grown.iter().take(k) {
                            r[i] = true;
                        }
                        r
                    }
                    TreeSignal::Increasing => upward_closed(&parent, &children, k, &mut rng),
                };
                let covs = parent.iter().map(|p| vec![p.map_or(-1.0, |x| x as f64)]).collect();
                (r, Layout::Tree { parent }, identity, Some(covs))
            }
            ScenarioKind::OnlineBlocks { block_len, rate } => {
                let gap_mean = *block_len as f64 * (1.0 - rate) / rate;
                let gaps = Geometric::new(1.0 / (1.0 + gap_mean)).map_err(|e| Error::Scenario(e.to_string()))?;
                let mut r = vec![false; n];
                let mut i = gaps.sample(&mut rng) as usize;
                while i < n {
                    let end = (i + block_len).min(n);
                    r[i..end].iter_mut().for_each(|x| *x = true);
                    i = end.saturating_add(gaps.sample(&mut rng) as usize);
                }
                (r, Layout::Line, identity, None)
            }
            ScenarioKind::OnlineTree { root_fanout, fanout, levels, high_children, low_prior, high_prior, decay } => {
                let parent = tree_parents(*root_fanout, *fanout, *levels, true);
                let mut prob = vec![0.0; n];
                let mut prior = vec![None; n];
                let mut first: Vec<usize> = (0..*root_fanout).collect();
                first.shuffle(&mut rng);
                for (rank, &i) in first.iter().enumerate() {
                    prob[i] = if rank < *high_children { *high_prior } else { *low_prior };
                    prior[i] = Some(prob[i]);
                }
                let mut r = vec![false; n];
                for i in 0..n {
                    match parent[i] {
                        None => r[i] = rng.gen::<f64>() < prob[i],
                        Some(p) => {
                            let keep = 1.0 - decay[(i - *root_fanout) % fanout];
                            prob[i] = prob[p] * keep;
                            r[i] = r[p] && rng.gen::<f64>() < keep;
                        }
                    }
                }
                let covs = parent
                    .iter()
                    .zip(&prior)
                    .map(|(p, q)| vec![p.map_or(-1.0, |x| x as f64), q.unwrap_or(-1.0)])
                    .collect();
                (r, Layout::OnlineTree { parent, prior }, identity, Some(covs))
            }
        };
        let covariates: Vec<Vec<f64>> = covariates.unwrap_or_else(|| vec![Vec::new(); n]);
        let hyps = (0..n)
            .zip(covariates)
            .map(|(i, c)| {
                let mean = if truth[i] { self.mu } else { null_mean };
                Hypothesis::new(i, norm_sf(eps[i] + mean)).with_covariates(c)
            })
            .collect();
        Ok((Instance { hyps, layout, preorder }, Truth { nonnull: truth }))
    }
}

/// Node count of a complete tree: a root, `root_fanout` children, then
/// `fanout` children per node for the remaining levels.
pub fn tree_size(root_fanout: usize, fanout: usize, levels: usize) -> usize {
    let mut total = 1;
    let mut width = 1;
    for level in 1..levels {
        width *= if level == 1 { root_fanout } else { fanout };
        total += width;
    }
    total
}

/// Like [`tree_size`] without the root, with `levels` generations.
pub fn online_tree_size(root_fanout: usize, fanout: usize, levels: usize) -> usize {
    tree_size(root_fanout, fanout, levels + 1) - 1
}

// Level-order parent map. Without the root, the first generation has no parent.
fn tree_parents(root_fanout: usize, fanout: usize, levels: usize, rootless: bool) -> Vec<Option<usize>> {
    let mut parent: Vec<Option<usize>> = if rootless { vec![None; root_fanout] } else { vec![None] };
    let (mut start, mut width) = if rootless { (0, root_fanout) } else { (0, 1) };
    for g in 0..levels - 1 {
        let per = if !rootless && g == 0 { root_fanout } else { fanout };
        for node in start..start + width {
            parent.extend(std::iter::repeat(Some(node)).take(per));
        }
        start += width;
        width *= per;
    }
    parent
}

fn children_of(parent: &[Option<usize>]) -> Vec<Vec<usize>> {
    let mut children = vec![Vec::new(); parent.len()];
    for (i, p) in parent.iter().enumerate() {
        if let Some(p) = p {
            children[*p].push(i);
        }
    }
    children
}

fn grid_neighbours(i: usize, side: usize) -> Vec<usize> {
    let (x, y) = (i % side, i / side);
    let mut out = Vec::with_capacity(4);
    if x > 0 {
        out.push(i - 1);
    }
    if x + 1 < side {
        out.push(i + 1);
    }
    if y > 0 {
        out.push(i - side);
    }
    if y + 1 < side {
        out.push(i + side);
    }
    out
}

/// Grow a connected order from `start`, adding a uniformly random frontier
/// node each step. Nodes unreachable from `start` are never listed.
pub fn random_growth<R, F>(n: usize, start: usize, neighbours: F, rng: &mut R) -> Vec<usize>
where
    R: Rng + ?Sized,
    F: Fn(usize) -> Vec<usize>,
{
    let mut seen = vec![false; n];
    let mut frontier = vec![start];
    seen[start] = true;
    let mut order = Vec::with_capacity(n);
    while !frontier.is_empty() {
        let j = rng.gen_range(0..frontier.len());
        let node = frontier.swap_remove(j);
        order.push(node);
        for m in neighbours(node) {
            if !seen[m] {
                seen[m] = true;
                frontier.push(m);
            }
        }
    }
    order
}

// Random set of `k` nodes where every member's children are members.
fn upward_closed<R: Rng + ?Sized>(
    parent: &[Option<usize>],
    children: &[Vec<usize>],
    k: usize,
    rng: &mut R,
) -> Vec<bool> {
    let n = parent.len();
    let mut r = vec![false; n];
    let mut missing: Vec<usize> = children.iter().map(Vec::len).collect();
    let mut eligible: Vec<usize> = (0..n).filter(|&i| missing[i] == 0).collect();
    for _ in 0..k.min(n) {
        let j = rng.gen_range(0..eligible.len());
        let node = eligible.swap_remove(j);
        r[node] = true;
        if let Some(p) = parent[node] {
            missing[p] -= 1;
            if missing[p] == 0 {
                eligible.push(p);
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(sparsity: f64) -> Scenario {
        Scenario::new(ScenarioKind::SparsityLine { sparsity }, 10_000, 50, 3.0).with_seed(11)
    }

    #[test]
    fn sparsity_line_packs_nonnulls_in_front() {
        let (_, truth) = line(0.005).generate(0).unwrap();
        assert_eq!(truth.count(), 50);
        assert!(truth.nonnull[..50].iter().all(|&r| r));
        let (_, truth) = line(0.3).generate(0).unwrap();
        assert_eq!(truth.count(), 50);
        assert!(truth.nonnull[3000..].iter().all(|&r| !r));
    }

    #[test]
    fn sweeps_share_noise() {
        let (a, ta) = line(0.005).generate(4).unwrap();
        let (b, tb) = line(0.5).generate(4).unwrap();
        let same = (0..10_000).filter(|&i| ta.nonnull[i] == tb.nonnull[i]).all(|i| a.hyps[i].p == b.hyps[i].p);
        assert!(same);
        let (c, _) = line(0.005).generate(5).unwrap();
        assert_ne!(a.hyps[60].p, c.hyps[60].p);
    }

    #[test]
    fn grid_disc_has_149_cells_in_both_placements() {
        for placement in [Placement::Center, Placement::Corner] {
            let s = Scenario::new(ScenarioKind::GridBlock { side: 100, radius: 7.0, placement }, 10_000, 0, 1.5);
            let (inst, truth) = s.generate(0).unwrap();
            assert_eq!(truth.count(), 149);
            assert_eq!(inst.preorder.len(), 10_000);
            assert_eq!(inst.preorder[0], 5050);
            assert_eq!(inst.hyps[5050].covariates, vec![50.0, 50.0]);
        }
        let clipped = Scenario::new(
            ScenarioKind::GridBlock { side: 100, radius: 7.0, placement: Placement::At { x: 0.0, y: 0.0 } },
            10_000,
            0,
            1.5,
        );
        assert_eq!(clipped.generate(0).unwrap().1.count(), 45);
    }

    #[test]
    fn grid_preorder_stays_connected() {
        let s = Scenario::new(
            ScenarioKind::GridBlock { side: 20, radius: 3.0, placement: Placement::Center },
            400,
            0,
            1.0,
        );
        let (inst, _) = s.generate(2).unwrap();
        let mut inside = vec![false; 400];
        for &i in &inst.preorder {
            let touches = grid_neighbours(i, 20).into_iter().any(|j| inside[j]);
            assert!(touches || i == inst.preorder[0]);
            inside[i] = true;
        }
    }

    #[test]
    fn batch_tree_shapes() {
        assert_eq!(tree_size(20, 3, 5), 801);
        assert_eq!(tree_size(3, 3, 5), 121);
        let s = Scenario::new(
            ScenarioKind::BatchTree { root_fanout: 20, fanout: 3, levels: 5, signal: TreeSignal::Decreasing },
            801,
            7,
            2.0,
        );
        let (inst, truth) = s.generate(1).unwrap();
        let parent = inst.layout.parent().unwrap();
        assert_eq!(parent[0], None);
        assert!(parent[1..21].iter().all(|p| *p == Some(0)));
        assert_eq!(parent[21], Some(1));
        assert_eq!(truth.count(), 7);
        assert!(truth.nonnull[0]);
        for i in 1..801 {
            if truth.nonnull[i] {
                assert!(truth.nonnull[parent[i].unwrap()]);
            }
        }
    }

    #[test]
    fn increasing_tree_is_closed_under_children() {
        let s = Scenario::new(
            ScenarioKind::BatchTree { root_fanout: 3, fanout: 3, levels: 5, signal: TreeSignal::Increasing },
            121,
            7,
            2.0,
        );
        for rep in 0..20 {
            let (inst, truth) = s.generate(rep).unwrap();
            let children = children_of(inst.layout.parent().unwrap());
            assert_eq!(truth.count(), 7);
            for i in 0..121 {
                if truth.nonnull[i] {
                    assert!(children[i].iter().all(|&c| truth.nonnull[c]));
                }
            }
        }
    }

    #[test]
    fn unit_blocks_are_bernoulli() {
        let s = Scenario::new(ScenarioKind::OnlineBlocks { block_len: 1, rate: 0.05 }, 200_000, 0, 1.0);
        let (_, truth) = s.generate(0).unwrap();
        let frac = truth.count() as f64 / 200_000.0;
        assert!((frac - 0.05).abs() < 0.003, "{frac}");
    }

    #[test]
    fn long_blocks_hit_the_rate() {
        let s = Scenario::new(ScenarioKind::OnlineBlocks { block_len: 500, rate: 0.05 }, 2_000_000, 0, 1.0);
        let (_, truth) = s.generate(0).unwrap();
        let frac = truth.count() as f64 / 2_000_000.0;
        assert!((frac - 0.05).abs() < 0.015, "{frac}");
        let starts = (1..2_000_000).filter(|&i| truth.nonnull[i] && !truth.nonnull[i - 1]).count();
        assert!(starts > 100);
    }

    #[test]
    fn online_tree_follows_decay() {
        let s = Scenario::new(
            ScenarioKind::OnlineTree {
                root_fanout: 40,
                fanout: 3,
                levels: 4,
                high_children: 10,
                low_prior: 0.1,
                high_prior: 0.9,
                decay: vec![1.0, 0.2, 0.0],
            },
            online_tree_size(40, 3, 4),
            0,
            1.0,
        );
        assert_eq!(s.n, 40 + 120 + 360 + 1080);
        let (inst, truth) = s.generate(3).unwrap();
        let Layout::OnlineTree { parent, prior } = &inst.layout else { panic!() };
        assert_eq!(prior.iter().filter(|p| **p == Some(0.9)).count(), 10);
        for i in 40..s.n {
            let p = parent[i].unwrap();
            assert!(p < i);
            if (i - 40) % 3 == 0 {
                assert!(!truth.nonnull[i]);
            }
            if truth.nonnull[i] {
                assert!(truth.nonnull[p]);
            }
            if (i - 40) % 3 == 2 {
                assert_eq!(truth.nonnull[i], truth.nonnull[p]);
            }
        }
    }

    #[test]
    fn conservative_nulls_push_p_up() {
        let s = Scenario::new(ScenarioKind::ConservativeNulls { null_mean: -4.0 }, 1000, 100, 1.5);
        let (inst, truth) = s.generate(0).unwrap();
        let null_ps: Vec<f64> = (0..1000).filter(|&i| !truth.nonnull[i]).map(|i| inst.hyps[i].p).collect();
        let mean = null_ps.iter().sum::<f64>() / null_ps.len() as f64;
        assert!(mean > 0.5);
        assert_eq!(truth.count(), 100);
    }

    #[test]
    fn validation() {
        let mut s = line(0.1);
        s.n_nonnull = 20_000;
        assert!(s.validate().is_err());
        assert!(line(0.0).validate().is_err());
        assert!(line(0.1).with_mu(-1.0).validate().is_err());
        assert!(line(0.1).with_reps(0).validate().is_err());
        let g = Scenario::new(
            ScenarioKind::GridBlock { side: 10, radius: 2.0, placement: Placement::Center },
            99,
            0,
            1.0,
        );
        assert!(g.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = line(0.2).with_reps(100);
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"kind\":\"sparsity_line\""));
        let back: Scenario = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn engine_records_carry_no_truth() {
        let (inst, _) = line(0.2).generate(0).unwrap();
        let v = serde_json::to_value(&inst.hyps[0]).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        for k in keys {
            assert!(["id", "p", "covariates"].contains(&k.as_str()), "unexpected field {k}");
        }
    }
}
