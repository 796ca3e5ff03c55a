//! Two-groups working model fitted by EM over masked and revealed p-values.
//!
//! A masked value has two preimages: the low one (`w = 1`), whose z-score is
//! `z_low`, and the high one (`w = 0`) with `z_high` and null-density ratio
//! `J`. Under the alternative the z-score is `N(μ, 1)`, so each preimage's
//! likelihood ratio against the null is `exp(μz - μ²/2)`. Revealed
//! hypotheses carry their signed z-score in `z_low`.

use serde::{Deserialize, Serialize};

use super::isotonic::tree_isotonic;
use super::logistic::{fit_logistic, MAX_NEWTON};
use super::spline::{SparseBasis, TensorSpline};
use crate::engine::SessionView;
use crate::masking::MaskScheme;
use crate::stats::norm_upper_quantile;
use crate::{Error, Result};

/// Per-hypothesis EM inputs, aligned with the caller's ordering.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmData {
    pub z_low: Vec<f64>,
    pub z_high: Vec<f64>,
    pub log_jac: Vec<f64>,
    pub jac: Vec<f64>,
    pub revealed: Vec<bool>,
}

impl EmData {
    pub fn len(&self) -> usize {
        self.z_low.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_low.is_empty()
    }

    /// All p-values revealed.
    pub fn complete(z: &[f64]) -> Self {
        let n = z.len();
        Self {
            z_low: z.to_vec(),
            z_high: vec![0.0; n],
            log_jac: vec![f64::NEG_INFINITY; n],
            jac: vec![0.0; n],
            revealed: vec![true; n],
        }
    }

    pub fn push_masked(&mut self, scheme: MaskScheme, masked: f64) {
        let (x, y, jac) = scheme.preimages(masked);
        self.z_low.push(norm_upper_quantile(x));
        self.z_high.push(norm_upper_quantile(y));
        self.log_jac.push(jac.ln());
        self.jac.push(jac);
        self.revealed.push(false);
    }

    pub fn push_revealed(&mut self, p: f64) {
        self.z_low.push(norm_upper_quantile(p));
        self.z_high.push(0.0);
        self.log_jac.push(f64::NEG_INFINITY);
        self.jac.push(0.0);
        self.revealed.push(true);
    }

    /// Replace entry `i` by its revealed p-value.
    pub fn reveal(&mut self, i: usize, p: f64) {
        self.z_low[i] = norm_upper_quantile(p);
        self.z_high[i] = 0.0;
        self.log_jac[i] = f64::NEG_INFINITY;
        self.jac[i] = 0.0;
        self.revealed[i] = true;
    }

    /// One entry per session entry, in entry order.
    pub fn from_view(view: &SessionView<'_>) -> Self {
        let mut data = Self::default();
        for e in view.entries {
            match view.revealed.p(e.id) {
                Some(p) => data.push_revealed(p),
                None => data.push_masked(view.scheme, e.masked),
            }
        }
        data
    }
}

/// How the non-null probabilities `π_i` are tied together.
#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    /// One probability shared by all hypotheses.
    Shared,
    /// Each hypothesis has its own probability.
    Free,
    /// `logit π_i` is a spline in the hypothesis's covariates.
    GridSpline { basis: SparseBasis },
    /// `π` is monotone along a rooted tree.
    TreeIsotonic { parent: Vec<Option<usize>>, direction: TreeDirection },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeDirection {
    /// Parents are at least as likely non-null as their children.
    Decreasing,
    /// Children are at least as likely non-null as their parents.
    Increasing,
}

impl Structure {
    pub fn grid_spline(points: &[[f64; 2]], knots_per_axis: usize) -> Self {
        Structure::GridSpline { basis: TensorSpline::fit_range(knots_per_axis, points).design(points) }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Structure::Shared => "shared",
            Structure::Free => "free",
            Structure::GridSpline { .. } => "grid_spline",
            Structure::TreeIsotonic { .. } => "tree_isotonic",
        }
    }

    fn coefficients(&self) -> usize {
        match self {
            Structure::Shared => 1,
            Structure::GridSpline { basis } => basis.dim,
            _ => 0,
        }
    }

    fn check_len(&self, n: usize) -> Result<()> {
        let m = match self {
            Structure::GridSpline { basis } => basis.len(),
            Structure::TreeIsotonic { parent, .. } => parent.len(),
            _ => n,
        };
        if m == n {
            Ok(())
        } else {
            Err(Error::Degenerate("structure size differs from data size"))
        }
    }
}

/// Alternative-mean model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanModel {
    #[default]
    Constant,
    /// Covariate-dependent means; reserved, rejected at fit time.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoGroupsModel {
    pub mu: f64,
    pub pi: Vec<f64>,
    /// Structure coefficients (logit scale) where the structure has any.
    pub beta: Vec<f64>,
}

impl TwoGroupsModel {
    pub fn constant(n: usize, mu: f64, pi: f64) -> Self {
        Self { mu, pi: vec![pi; n], beta: Vec::new() }
    }

    fn aligned(mut self, structure: &Structure) -> Self {
        let d = structure.coefficients();
        if self.beta.len() != d {
            let mean = self.pi.iter().sum::<f64>() / self.pi.len().max(1) as f64;
            let l = (mean.clamp(1e-6, 1.0 - 1e-6) / (1.0 - mean.clamp(1e-6, 1.0 - 1e-6))).ln();
            self.beta = vec![l; d];
        }
        self
    }
}

/// Posterior weights of the four `(non-null, w)` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad {
    /// Non-null, low preimage.
    pub a: f64,
    /// Null, low preimage.
    pub b: f64,
    /// Non-null, high preimage.
    pub c: f64,
    /// Null, high preimage.
    pub d: f64,
}

impl Quad {
    pub fn non_null(&self) -> f64 {
        self.a + self.c
    }

    pub fn low(&self) -> f64 {
        self.a + self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EStep {
    pub quads: Vec<Quad>,
    /// Observed-data log-likelihood relative to the global null.
    pub loglik: f64,
    /// Entries whose weights underflowed and were set uniform.
    pub fallbacks: usize,
}

impl EStep {
    pub fn posterior(&self) -> Vec<f64> {
        self.quads.iter().map(Quad::non_null).collect()
    }
}

fn ln_or_neg_inf(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Compute cell weights under `model`.
pub fn e_step(data: &EmData, model: &TwoGroupsModel) -> EStep {
    let mu = model.mu;
    let half = 0.5 * mu * mu;
    let mut quads = Vec::with_capacity(data.len());
    let mut loglik = 0.0;
    let mut fallbacks = 0;
    for i in 0..data.len() {
        let pi = model.pi[i];
        let (el, eh) = (mu * data.z_low[i] - half, mu * data.z_high[i] - half);
        // Linear scale when nothing can overflow, log scale otherwise.
        if el.abs() < 600.0 && eh.abs() < 600.0 && (0.0..=1.0).contains(&pi) {
            let (wa, wb) = (pi * el.exp(), 1.0 - pi);
            let (wc, wd) = if data.revealed[i] {
                (0.0, 0.0)
            } else {
                let j = data.jac[i];
                (pi * eh.exp() * j, (1.0 - pi) * j)
            };
            let total = wa + wb + wc + wd;
            if total > 0.0 && total.is_finite() {
                loglik += total.ln();
                quads.push(Quad { a: wa / total, b: wb / total, c: wc / total, d: wd / total });
                continue;
            }
        }
        let (lp, lq) = (ln_or_neg_inf(pi), ln_or_neg_inf(1.0 - pi));
        let la = lp + el;
        let lb = lq;
        let (lc, ld) = if data.revealed[i] {
            (f64::NEG_INFINITY, f64::NEG_INFINITY)
        } else {
            (lp + eh + data.log_jac[i], lq + data.log_jac[i])
        };
        let top = la.max(lb).max(lc).max(ld);
        let w = |l: f64| if l == f64::NEG_INFINITY { 0.0 } else { (l - top).exp() };
        let (wa, wb, wc, wd) = (w(la), w(lb), w(lc), w(ld));
        let total = wa + wb + wc + wd;
        if !top.is_finite() || !total.is_finite() || total <= 0.0 {
            fallbacks += 1;
            quads.push(if data.revealed[i] {
                Quad { a: 0.5, b: 0.5, c: 0.0, d: 0.0 }
            } else {
                Quad { a: 0.25, b: 0.25, c: 0.25, d: 0.25 }
            });
            continue;
        }
        loglik += top + total.ln();
        quads.push(Quad { a: wa / total, b: wb / total, c: wc / total, d: wd / total });
    }
    EStep { quads, loglik, fallbacks }
}

/// Maximize the expected complete-data log-likelihood given cell weights.
pub fn m_step(data: &EmData, e: &EStep, model: &TwoGroupsModel, structure: &Structure) -> Result<TwoGroupsModel> {
    m_step_with(data, e, model, structure, MAX_NEWTON)
}

fn m_step_with(
    data: &EmData,
    e: &EStep,
    model: &TwoGroupsModel,
    structure: &Structure,
    newton: usize,
) -> Result<TwoGroupsModel> {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, q) in e.quads.iter().enumerate() {
        num += q.a * data.z_low[i] + q.c * data.z_high[i];
        den += q.a + q.c;
    }
    if den <= 0.0 || !num.is_finite() {
        return Err(Error::Degenerate("no posterior mass on the alternative"));
    }
    let mu = num / den;
    let y = e.posterior();
    let n = y.len();
    let (pi, beta) = match structure {
        Structure::Shared => {
            let p = den / n as f64;
            (vec![p; n], vec![(p / (1.0 - p)).ln()])
        }
        Structure::Free => (y, Vec::new()),
        Structure::GridSpline { basis } => {
            let fit = fit_logistic(basis, &y, &model.beta, newton);
            (fit.fitted, fit.beta)
        }
        Structure::TreeIsotonic { parent, direction } => match direction {
            TreeDirection::Decreasing => (tree_isotonic(&y, parent), Vec::new()),
            TreeDirection::Increasing => {
                let neg: Vec<f64> = y.iter().map(|v| -v).collect();
                (tree_isotonic(&neg, parent).into_iter().map(|v| -v).collect(), Vec::new())
            }
        },
    };
    Ok(TwoGroupsModel { mu, pi, beta })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop when the log-likelihood gain falls below `tol * (1 + |ℓ|)`.
    pub tol: f64,
    /// Newton iterations per logistic M-step; fewer gives a generalized EM
    /// that still never lowers the likelihood.
    pub newton_steps: usize,
    pub mean_model: MeanModel,
}

impl EmConfig {
    /// Budget for refits inside an interactive session: a few warm-started
    /// generalized EM sweeps with one Newton step each.
    pub fn interactive() -> Self {
        Self { max_iters: 10, tol: 1e-6, newton_steps: 1, mean_model: MeanModel::Constant }
    }
}

impl Default for EmConfig {
    fn default() -> Self {
        Self { max_iters: 500, tol: 1e-10, newton_steps: MAX_NEWTON, mean_model: MeanModel::Constant }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmFit {
    pub model: TwoGroupsModel,
    /// Posterior non-null probabilities under the final model.
    pub posterior: Vec<f64>,
    pub loglik: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when weights underflowed or the fit hit the iteration cap.
    pub flagged: bool,
}

/// Alternate E and M steps from `init` until the likelihood settles.
pub fn em_fit(data: &EmData, structure: &Structure, init: TwoGroupsModel, cfg: &EmConfig) -> Result<EmFit> {
    if cfg.mean_model != MeanModel::Constant {
        return Err(Error::Unsupported("covariate-dependent alternative means"));
    }
    if init.pi.len() != data.len() {
        return Err(Error::Degenerate("model size differs from data size"));
    }
    structure.check_len(data.len())?;
    let mut model = init.aligned(structure);
    let mut e = e_step(data, &model);
    let mut trace = vec![e.loglik];
    let mut flagged = e.fallbacks > 0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let next = match m_step_with(data, &e, &model, structure, cfg.newton_steps.max(1)) {
            Ok(m) => m,
            Err(_) => {
                flagged = true;
                break;
            }
        };
        iterations += 1;
        let e_next = e_step(data, &next);
        flagged |= e_next.fallbacks > 0;
        let gain = e_next.loglik - e.loglik;
        model = next;
        e = e_next;
        trace.push(e.loglik);
        if gain.abs() <= cfg.tol * (1.0 + e.loglik.abs()) {
            converged = true;
            break;
        }
    }
    flagged |= !converged;
    Ok(EmFit { posterior: e.posterior(), model, loglik: trace, iterations, converged, flagged })
}
