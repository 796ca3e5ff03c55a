//! Figure datasets: each figure is a list of points, each point a scenario
//! with labelled methods. Output rows share one CSV schema.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gnt_core::engine::{Combiner, ImtSession, RejectionRule, Rule};
use gnt_core::masking::{mask, MaskScheme};
use gnt_core::structure::TreeDirection;
use gnt_core::{BoundaryFamily, BoundarySpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::condition::{condition_surface, linear_grid, log_grid, Required, MIN_DRAWS};
use crate::methods::{build_policy, Method, PolicyConfig};
use crate::power::{simulate, Estimate};
use crate::scenario::{Placement, Scenario, ScenarioKind, TreeSignal};
use crate::{Error, Result};

pub const ALPHA: f64 = 0.05;

/// Figure identifiers accepted by [`run_figure`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FigureId {
    F1a,
    F1b,
    F3,
    F4,
    F5,
    F6,
    F7,
    F8,
    F9,
    F10,
    F11,
    D,
    E,
}

impl FigureId {
    pub const ALL: [FigureId; 13] = [
        FigureId::F1a,
        FigureId::F1b,
        FigureId::F3,
        FigureId::F4,
        FigureId::F5,
        FigureId::F6,
        FigureId::F7,
        FigureId::F8,
        FigureId::F9,
        FigureId::F10,
        FigureId::F11,
        FigureId::D,
        FigureId::E,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FigureId::F1a => "1a",
            FigureId::F1b => "1b",
            FigureId::F3 => "3",
            FigureId::F4 => "4",
            FigureId::F5 => "5",
            FigureId::F6 => "6",
            FigureId::F7 => "7",
            FigureId::F8 => "8",
            FigureId::F9 => "9",
            FigureId::F10 => "10",
            FigureId::F11 => "11",
            FigureId::D => "D",
            FigureId::E => "E",
        }
    }

    pub fn file_name(self) -> String {
        format!("figure_{}.csv", self.as_str())
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureId::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s.trim_start_matches("fig")))
            .ok_or_else(|| Error::UnknownFigure(s.to_string()))
    }
}

/// Master seed and replicate count shared by all points of a figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FigureOptions {
    pub seed: u64,
    pub reps: usize,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self { seed: 0, reps: 500 }
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub x: f64,
    pub method: String,
    pub mean: f64,
    pub stderr: f64,
    pub reps: usize,
    pub censored: usize,
}

impl Row {
    fn from_estimate(x: f64, method: &str, e: Estimate) -> Self {
        Self { x, method: method.to_string(), mean: e.mean, stderr: e.stderr, reps: e.reps, censored: e.censored }
    }

    fn exact(x: f64, method: impl Into<String>, value: f64) -> Self {
        Self { x, method: method.into(), mean: value, stderr: 0.0, reps: 1, censored: 0 }
    }
}

/// A labelled method.
#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub label: String,
    pub method: Method,
}

fn arm(label: impl Into<String>, method: Method) -> Arm {
    Arm { label: label.into(), method }
}

/// A scenario and the methods run on it; all arms share each replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: f64,
    pub scenario: Scenario,
    pub arms: Vec<Arm>,
}

fn linear(m: f64) -> BoundarySpec {
    BoundarySpec::gaussian_linear(ALPHA, m)
}

fn stitched() -> BoundarySpec {
    BoundarySpec::gaussian_stitched(ALPHA)
}

fn mst(bound: BoundarySpec) -> Method {
    Method::Preordered { combiner: Combiner::Stouffer, bound }
}

fn imt(scheme: MaskScheme, bound: BoundarySpec, policy: PolicyConfig) -> Method {
    Method::Imt { scheme, rule: RejectionRule::Boundary { spec: bound }, policy }
}

fn calibrated(scheme: MaskScheme, policy: PolicyConfig) -> Method {
    Method::Imt { scheme, rule: RejectionRule::Ville { alpha: ALPHA }, policy }
}

const STOUFFER: Method = Method::BatchStouffer { alpha: ALPHA };
const GRID: PolicyConfig = PolicyConfig::Grid { knots: 5 };

// Figure settings.
const LINE_N: usize = 10_000;
const SPARSITIES: [f64; 8] = [0.005, 0.1, 0.2, 0.3, 0.4, 0.5, 0.7, 1.0];
pub const ONLINE_HORIZON: usize = 20_000;
pub const ONLINE_MUS: [f64; 6] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
pub const AMT_ONLINE_THRESHOLD: f64 = 0.05;
// AMT's statistic advances only on screened arrivals, so its linear bound
// is tuned in inclusion counts.
pub const AMT_ONLINE_M: f64 = 200.0;
const GRID_SIDE: usize = 100;
const GRID_RADIUS: f64 = 7.0;
pub const GRID_MUS: [f64; 7] = [0.0, 0.3, 0.6, 0.9, 1.2, 1.5, 1.8];
const BLOCK_HORIZON: usize = 20_000;
const FIG9_NULL_MEANS: [f64; 9] = [0.0, -0.5, -1.0, -1.5, -2.0, -2.5, -3.0, -3.5, -4.0];
pub const CALIBRATOR_CS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
const SNAPSHOT_KS: [u64; 6] = [10, 25, 50, 100, 150, 200];
const SNAPSHOT_MU: f64 = 1.2;

fn half_steps(hi: f64) -> Vec<f64> {
    linear_grid(0.0, hi, 0.5)
}

/// Scenario points for the simulation figures; `None` for figures that are
/// not Monte-Carlo power studies (3, 4, 10).
pub fn plan(id: FigureId, opts: &FigureOptions) -> Option<Vec<Point>> {
    let with = |s: Scenario| s.with_seed(opts.seed).with_reps(opts.reps);
    let points = match id {
        FigureId::F1a => SPARSITIES
            .iter()
            .map(|&sp| Point {
                x: sp,
                scenario: with(Scenario::new(ScenarioKind::SparsityLine { sparsity: sp }, LINE_N, 50, 3.0)),
                arms: vec![
                    arm("mst", mst(linear(LINE_N as f64 / 4.0))),
                    arm("amt_batch", Method::AmtBatch { scheme: MaskScheme::Tent, bound: linear(LINE_N as f64 / 4.0) }),
                    arm("amt_online", Method::AmtOnline { threshold: 0.01, bound: linear(200.0) }),
                    arm("batch_stouffer", STOUFFER),
                ],
            })
            .collect(),
        FigureId::F1b => ONLINE_MUS
            .iter()
            .map(|&mu| Point {
                x: mu,
                scenario: with(Scenario::new(
                    ScenarioKind::OnlineBlocks { block_len: 1, rate: 0.05 },
                    ONLINE_HORIZON,
                    0,
                    mu,
                )),
                arms: online_arms(),
            })
            .collect(),
        FigureId::F5 => GRID_MUS
            .iter()
            .flat_map(|&mu| {
                [("center", Placement::Center), ("corner", Placement::Corner)].map(|(tag, placement)| Point {
                    x: mu,
                    scenario: with(Scenario::new(
                        ScenarioKind::GridBlock { side: GRID_SIDE, radius: GRID_RADIUS, placement },
                        GRID_SIDE * GRID_SIDE,
                        0,
                        mu,
                    )),
                    arms: vec![
                        arm(format!("imt_grid/{tag}"), imt(MaskScheme::Tent, linear(2500.0), GRID)),
                        arm(format!("mst/{tag}"), mst(linear(2500.0))),
                        arm(format!("batch_stouffer/{tag}"), STOUFFER),
                    ],
                })
            })
            .collect(),
        FigureId::F6 => half_steps(4.0)
            .into_iter()
            .map(|mu| Point {
                x: mu,
                scenario: with(Scenario::new(
                    ScenarioKind::BatchTree { root_fanout: 20, fanout: 3, levels: 5, signal: TreeSignal::Decreasing },
                    crate::scenario::tree_size(20, 3, 5),
                    7,
                    mu,
                )),
                arms: vec![
                    arm("imt_tree", imt(MaskScheme::Tent, linear(200.0), PolicyConfig::TreeModelFree)),
                    arm("mst", mst(linear(200.0))),
                    arm("batch_stouffer", STOUFFER),
                ],
            })
            .collect(),
        FigureId::F7 => half_steps(3.0)
            .into_iter()
            .filter(|&mu| mu > 0.0)
            .flat_map(|mu| {
                let blocks = Point {
                    x: mu,
                    scenario: with(Scenario::new(
                        ScenarioKind::OnlineBlocks { block_len: 500, rate: 0.05 },
                        BLOCK_HORIZON,
                        0,
                        mu,
                    )),
                    arms: vec![
                        arm("imt_blocks/blocks", Method::ImtBlocks { base: 0.05, bound: stitched() }),
                        arm("amt_online/blocks", Method::AmtOnline { threshold: 0.05, bound: stitched() }),
                        arm("mst/blocks", mst(stitched())),
                        arm("online_bonferroni/blocks", Method::OnlineBonferroni { alpha: ALPHA }),
                    ],
                };
                let kind = online_tree_kind();
                let n = match &kind {
                    ScenarioKind::OnlineTree { root_fanout, fanout, levels, .. } => {
                        crate::scenario::online_tree_size(*root_fanout, *fanout, *levels)
                    }
                    _ => unreachable!(),
                };
                let tree = Point {
                    x: mu,
                    scenario: with(Scenario::new(kind, n, 0, mu)),
                    arms: vec![
                        arm("imt_online_tree/tree", Method::ImtOnlineTree { bound: stitched(), keep: 0.6 }),
                        arm("amt_online/tree", Method::AmtOnline { threshold: 0.05, bound: stitched() }),
                        arm("mst/tree", mst(stitched())),
                        arm("online_bonferroni/tree", Method::OnlineBonferroni { alpha: ALPHA }),
                    ],
                };
                [blocks, tree]
            })
            .collect(),
        FigureId::F8 => half_steps(4.0)
            .into_iter()
            .flat_map(|mu| {
                [
                    ("decreasing", TreeSignal::Decreasing, TreeDirection::Decreasing),
                    ("increasing", TreeSignal::Increasing, TreeDirection::Increasing),
                ]
                .map(|(tag, signal, direction)| Point {
                    x: mu,
                    scenario: with(Scenario::new(
                        ScenarioKind::BatchTree { root_fanout: 3, fanout: 3, levels: 5, signal },
                        crate::scenario::tree_size(3, 3, 5),
                        7,
                        mu,
                    )),
                    arms: vec![
                        arm(
                            format!("imt_tree_modeled/{tag}"),
                            imt(MaskScheme::Tent, linear(30.0), PolicyConfig::TreeModeled { direction }),
                        ),
                        arm(format!("mst/{tag}"), mst(linear(30.0))),
                    ],
                })
            })
            .collect(),
        FigureId::F9 => FIG9_NULL_MEANS
            .iter()
            .map(|&nm| Point {
                x: nm,
                scenario: with(Scenario::new(ScenarioKind::ConservativeNulls { null_mean: nm }, 1000, 100, 1.5)),
                arms: vec![
                    arm("imt_tent", imt(MaskScheme::Tent, linear(250.0), PolicyConfig::SmallestMasked)),
                    arm("imt_railway", imt(MaskScheme::Railway, linear(250.0), PolicyConfig::SmallestMasked)),
                    arm("mst", mst(linear(250.0))),
                    arm("batch_stouffer", STOUFFER),
                ],
            })
            .collect(),
        FigureId::F11 => GRID_MUS
            .iter()
            .filter(|&&mu| mu > 0.0)
            .map(|&mu| Point {
                x: mu,
                scenario: with(Scenario::new(
                    ScenarioKind::GridBlock { side: GRID_SIDE, radius: GRID_RADIUS, placement: Placement::Center },
                    GRID_SIDE * GRID_SIDE,
                    0,
                    mu,
                )),
                arms: fig11_arms(),
            })
            .collect(),
        FigureId::D => ordering_points(opts, false),
        FigureId::E => ordering_points(opts, true),
        FigureId::F3 | FigureId::F4 | FigureId::F10 => return None,
    };
    Some(points)
}

/// The online comparison on i.i.d. 5% non-nulls.
pub fn online_arms() -> Vec<Arm> {
    vec![
        arm("amt_online", Method::AmtOnline { threshold: AMT_ONLINE_THRESHOLD, bound: linear(AMT_ONLINE_M) }),
        arm("mst", mst(stitched())),
        arm("online_bonferroni", Method::OnlineBonferroni { alpha: ALPHA }),
    ]
}

/// Original bit versus calibrator bits, all with the grid policy.
pub fn fig11_arms() -> Vec<Arm> {
    let mut arms = vec![arm("tent", imt(MaskScheme::Tent, linear(2500.0), GRID))];
    for c in CALIBRATOR_CS {
        arms.push(arm(format!("calibrator_{c}"), calibrated(MaskScheme::Calibrator { c }, GRID)));
    }
    arms.push(arm("mixture", calibrated(MaskScheme::CalibratorMixture, GRID)));
    arms
}

fn online_tree_kind() -> ScenarioKind {
    ScenarioKind::OnlineTree {
        root_fanout: 40,
        fanout: 3,
        levels: 4,
        high_children: 10,
        low_prior: 0.1,
        high_prior: 0.9,
        decay: vec![1.0, 0.2, 0.0],
    }
}

// Boundary choices for a front-loaded line with non-nulls in the first `l`.
fn ordering_points(opts: &FigureOptions, fisher: bool) -> Vec<Point> {
    let n = LINE_N;
    let ls = [100usize, 1000, 2000, 3000, 4000, 5000, 6000, 7000, 8000, 9000, 10_000];
    ls.iter()
        .map(|&l| {
            let arms = if fisher {
                let exp = |m: f64| BoundarySpec::linear(BoundaryFamily::ExpLinear, ALPHA, m);
                let chi = |m: f64| BoundarySpec::linear(BoundaryFamily::ChiSqExpLinear, ALPHA, m);
                vec![
                    arm("fisher_linear", Method::Preordered { combiner: Combiner::Fisher, bound: exp(n as f64 / 4.0) }),
                    arm(
                        "fisher_curved",
                        Method::Preordered {
                            combiner: Combiner::Fisher,
                            bound: BoundarySpec::new(BoundaryFamily::GammaCurved, ALPHA),
                        },
                    ),
                    arm("chisq_linear", Method::Preordered { combiner: Combiner::ChiSq, bound: chi(n as f64 / 4.0) }),
                    arm(
                        "chisq_curved",
                        Method::Preordered {
                            combiner: Combiner::ChiSq,
                            bound: BoundarySpec::new(BoundaryFamily::ChiSqGammaCurved, ALPHA),
                        },
                    ),
                    arm("batch_fisher", Method::BatchFisher { alpha: ALPHA }),
                ]
            } else {
                vec![
                    arm("linear_n/4", mst(linear(n as f64 / 4.0))),
                    arm("linear_n/2", mst(linear(n as f64 / 2.0))),
                    arm("linear_3n/4", mst(linear(3.0 * n as f64 / 4.0))),
                    arm("linear_oracle", mst(linear(l as f64))),
                    arm("stitched", mst(stitched())),
                    arm("mixture", mst(BoundarySpec::new(BoundaryFamily::GaussianDiscreteMixture, ALPHA))),
                    arm(
                        "inverted",
                        mst(BoundarySpec::new(BoundaryFamily::GaussianInvertedStitching, ALPHA).with_horizon(n as u64)),
                    ),
                ]
            };
            Point {
                x: l as f64,
                scenario: Scenario::new(ScenarioKind::SparsityLine { sparsity: l as f64 / n as f64 }, n, 100, 1.5)
                    .with_seed(opts.seed)
                    .with_reps(opts.reps),
                arms,
            }
        })
        .collect()
}

/// Estimates for every arm of every point, in plan order.
pub fn run_points(points: &[Point]) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for pt in points {
        let methods: Vec<Method> = pt.arms.iter().map(|a| a.method.clone()).collect();
        let runs = simulate(&pt.scenario, &methods)?;
        for (j, a) in pt.arms.iter().enumerate() {
            let col: Vec<_> = runs.iter().map(|r| r[j]).collect();
            let est = if pt.scenario.is_online() {
                Estimate::detection_time(&col, pt.scenario.n as u64)
            } else {
                Estimate::power(&col)
            };
            rows.push(Row::from_estimate(pt.x, &a.label, est));
        }
    }
    Ok(rows)
}

/// All rows of a figure.
pub fn run_figure(id: FigureId, opts: &FigureOptions) -> Result<Vec<Row>> {
    if let Some(points) = plan(id, opts) {
        return run_points(&points);
    }
    match id {
        FigureId::F3 => condition_rows(opts),
        FigureId::F4 => snapshot_rows(opts),
        FigureId::F10 => Ok(curve_rows()),
        _ => unreachable!("every simulation figure has a plan"),
    }
}

/// Condition surface: x = N0, method = `n1=<N1>`, mean = required μ.
/// Cells above the grid have `mean = NaN` and `censored = 1`.
pub fn condition_rows(opts: &FigureOptions) -> Result<Vec<Row>> {
    let draws = opts.reps.max(MIN_DRAWS);
    let cells = condition_surface(
        &log_grid(1e2, 1e5, 4),
        &log_grid(1e2, 1e3, 4),
        ALPHA,
        ALPHA,
        &linear_grid(0.1, 6.0, 0.1),
        draws,
        opts.seed,
    )?;
    Ok(cells
        .into_iter()
        .map(|c| Row {
            x: c.n0 as f64,
            method: format!("n1={}", c.n1),
            mean: c.required.value().unwrap_or(f64::NAN),
            stderr: 0.0,
            reps: draws,
            censored: usize::from(c.required == Required::AboveGrid),
        })
        .collect())
}

/// Non-null fraction of `M_k` at several `k` for the grid policy on a
/// center block. Runs that stop before `k` do not contribute.
pub fn snapshot_rows(opts: &FigureOptions) -> Result<Vec<Row>> {
    let scenario = Scenario::new(
        ScenarioKind::GridBlock { side: GRID_SIDE, radius: GRID_RADIUS, placement: Placement::Center },
        GRID_SIDE * GRID_SIDE,
        0,
        SNAPSHOT_MU,
    )
    .with_seed(opts.seed)
    .with_reps(opts.reps);
    let rule = Rule::tabulated(linear(2500.0), scenario.n as u64)?;
    let per_rep: Vec<Vec<Option<f64>>> = (0..opts.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let (inst, truth) = scenario.generate(rep)?;
            let mut policy = build_policy(&GRID, &inst)?;
            let mut session = ImtSession::new(&inst.hyps, MaskScheme::Tent, rule.clone())?;
            let mut hits = 0usize;
            let mut out = vec![None; SNAPSHOT_KS.len()];
            let last = *SNAPSHOT_KS.last().expect("nonempty");
            while !session.state().stopped() && session.state().k < last {
                let Some(id) = policy.choose(&session.view()) else { break };
                session.pick(id)?;
                hits += usize::from(truth.nonnull[id]);
                let k = session.state().k;
                if let Some(j) = SNAPSHOT_KS.iter().position(|&s| s == k) {
                    out[j] = Some(hits as f64 / k as f64);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(SNAPSHOT_KS
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let vals: Vec<f64> = per_rep.iter().filter_map(|r| r[j]).collect();
            let (mean, sd) = crate::power::mean_sd(&vals);
            Row {
                x: k as f64,
                method: "imt_grid".into(),
                mean,
                stderr: sd / (vals.len().max(1) as f64).sqrt(),
                reps: vals.len(),
                censored: opts.reps - vals.len(),
            }
        })
        .collect())
}

/// Masking curves: `g(p)` for each scheme and the calibrator log-densities.
pub fn curve_rows() -> Vec<Row> {
    let ps: Vec<f64> = (1..200).map(|i| i as f64 / 200.0).collect();
    let mut schemes = vec![("tent", MaskScheme::Tent), ("railway", MaskScheme::Railway)];
    let cals: Vec<(String, MaskScheme)> = CALIBRATOR_CS
        .iter()
        .map(|&c| (format!("calibrator_{c}"), MaskScheme::Calibrator { c }))
        .chain([("mixture".to_string(), MaskScheme::CalibratorMixture)])
        .collect();
    let mut rows = Vec::new();
    for (name, s) in schemes.drain(..) {
        for &p in &ps {
            rows.push(Row::exact(p, format!("g/{name}"), mask(p, s).expect("valid p").masked));
        }
    }
    for (name, s) in &cals {
        for &p in &ps {
            rows.push(Row::exact(p, format!("g/{name}"), mask(p, *s).expect("valid p").masked));
        }
        for &p in &ps {
            rows.push(Row::exact(p, format!("log_f/{name}"), s.log_density(p)));
        }
    }
    rows
}

/// Write rows with the header `x,method,mean,stderr,reps,censored`.
pub fn write_csv<W: std::io::Write>(rows: &[Row], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["x", "method", "mean", "stderr", "reps", "censored"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Run a figure and write `figure_<id>.csv` under `dir`.
pub fn run_figure_to(id: FigureId, opts: &FigureOptions, dir: &Path) -> Result<PathBuf> {
    let rows = run_figure(id, opts)?;
    std::fs::create_dir_all(dir)?;
    let path = dir.join(id.file_name());
    write_csv(&rows, std::fs::File::create(&path)?)?;
    Ok(path)
}
