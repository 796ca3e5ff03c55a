//! Sufficient signal strength for the batch adaptively ordered test.
//!
//! For `N1` non-nulls `Z ~ N(μ, 1)` sorted by decreasing `|Z|`, the test at
//! level α has power at least `1 - β` if some `j ≤ N1` satisfies
//!
//! ```text
//! Σ_{s≤j} (2 P(Z_(s) > 0) - 1) ≥ (C_n^α + C_n^{β/2}) · sqrt(j + t_j),
//! t_j = smallest t with P(Bin(N0, q_j) ≥ t) ≤ β / (2 N1),
//! q_j = P(|Z(0)| > |Z_(j)|),  n = N0 + N1.
//! ```
//!
//! The order-statistic expectations are estimated by Monte Carlo. `|Z|` has
//! survival `G(a) = Φ̄(a - μ) + Φ̄(a + μ)`, so `|Z_(s)| = G⁻¹(U_(s))` with
//! `U_(s)` the `s`-th smallest of `N1` uniforms, drawn from exponential
//! spacings. Given `|Z| = a` the sign is positive with probability
//! `σ(2μa)`, so `2P(Z_(s) > 0) - 1 = E tanh(μ|Z_(s)|)`, and
//! `q_j = E 2Φ̄(|Z_(j)|)`. All grid values of μ reuse the same uniforms.

use gnt_core::boundaries::CurveConstant;
use gnt_core::roots::bisect_increasing;
use gnt_core::stats::{binom_upper_tail, norm_sf};
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seeds::{stream, Purpose};
use crate::{Error, Result};

/// Inputs of the sufficient-condition search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerConditionInputs {
    pub n0: u64,
    pub n1: u64,
    pub alpha: f64,
    pub beta: f64,
    pub mu_grid: Vec<f64>,
    pub mc_draws: usize,
    #[serde(default)]
    pub seed: u64,
}

impl PowerConditionInputs {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Condition(m.to_string()));
        if self.n0 == 0 || self.n1 == 0 {
            return bad("counts must be positive");
        }
        if self.mc_draws < MIN_DRAWS {
            return bad("too few Monte-Carlo draws");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0 && self.beta > 0.0 && self.beta < 1.0) {
            return bad("alpha and beta must lie in (0, 1)");
        }
        if self.mu_grid.is_empty() || !self.mu_grid.iter().all(|&m| m > 0.0 && m.is_finite()) {
            return bad("mu grid must be nonempty and positive");
        }
        if self.mu_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("mu grid must be strictly increasing");
        }
        Ok(())
    }
}

/// Result of the search on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Required {
    Mu(f64),
    AboveGrid,
}

impl Required {
    pub fn value(self) -> Option<f64> {
        match self {
            Required::Mu(m) => Some(m),
            Required::AboveGrid => None,
        }
    }
}

impl std::fmt::Display for Required {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Required::Mu(m) => write!(f, "{m}"),
            Required::AboveGrid => f.write_str("above grid"),
        }
    }
}

/// Monte-Carlo order-statistic expectations for one `(N1, μ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderMoments {
    pub mu: f64,
    /// `2P(Z_(s) > 0) - 1` for `s = 1..=N1`.
    pub sign: Vec<f64>,
    /// `q_s` for `s = 1..=N1`.
    pub q: Vec<f64>,
}

// Grid in v = -ln G(a) on which a(v) and its summaries are tabulated.
const V_MAX: f64 = 60.0;
const V_NODES: usize = 8192;
const CHUNK: usize = 1000;
/// Fewest draws accepted by [`amt_sufficient_mu`].
pub const MIN_DRAWS: usize = 100_000;

fn v_step() -> f64 {
    V_MAX / (V_NODES - 1) as f64
}

// |Z| quantile: the a with -ln G(a) = v.
fn abs_quantile(mu: f64, v: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let g = |a: f64| -(norm_sf(a - mu) + norm_sf(a + mu)).ln() - v;
    let mut hi = mu + 1.0;
    while g(hi) < 0.0 && hi < 1e3 {
        hi *= 2.0;
    }
    bisect_increasing(g, 0.0, hi, 1e-13, 0.0).unwrap_or(hi)
}

/// Order-statistic moments for every μ in `mu_grid`, sharing draws.
pub fn order_moments(n1: usize, mu_grid: &[f64], draws: usize, seed: u64) -> Vec<OrderMoments> {
    let m = mu_grid.len();
    // Tables interleaved by μ so one node's values are contiguous.
    let mut sign_t = vec![0.0; V_NODES * m];
    let mut q_t = vec![0.0; V_NODES * m];
    let dv = v_step();
    for (j, &mu) in mu_grid.iter().enumerate() {
        for i in 0..V_NODES {
            let a = abs_quantile(mu, i as f64 * dv);
            sign_t[i * m + j] = (mu * a).tanh();
            q_t[i * m + j] = 2.0 * norm_sf(a);
        }
    }
    let chunks = draws.div_ceil(CHUNK);
    let (sign_sum, q_sum) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, c as u64, Purpose::Noise);
            let count = CHUNK.min(draws - c * CHUNK);
            let mut acc_s = vec![0.0; n1 * m];
            let mut acc_q = vec![0.0; n1 * m];
            let mut cum = vec![0.0; n1];
            for _ in 0..count {
                let mut total = 0.0;
                for x in cum.iter_mut() {
                    total += rng.sample::<f64, _>(Exp1);
                    *x = total;
                }
                total += rng.sample::<f64, _>(Exp1);
                let ln_total = total.ln();
                for s in 0..n1 {
                    let v = (ln_total - cum[s].ln()) / dv;
                    let (idx, frac) = if v >= (V_NODES - 1) as f64 {
                        (V_NODES - 2, 1.0)
                    } else {
                        (v as usize, v - v.floor())
                    };
                    let lo = idx * m;
                    let row = s * m;
                    for j in 0..m {
                        let (a, b) = (sign_t[lo + j], sign_t[lo + m + j]);
                        acc_s[row + j] += a + frac * (b - a);
                        let (a, b) = (q_t[lo + j], q_t[lo + m + j]);
                        acc_q[row + j] += a + frac * (b - a);
                    }
                }
            }
            (acc_s, acc_q)
        })
        .reduce(
            || (vec![0.0; n1 * m], vec![0.0; n1 * m]),
            |(mut s1, mut q1), (s2, q2)| {
                s1.iter_mut().zip(&s2).for_each(|(a, b)| *a += b);
                q1.iter_mut().zip(&q2).for_each(|(a, b)| *a += b);
                (s1, q1)
            },
        );
    let scale = 1.0 / draws as f64;
    mu_grid
        .iter()
        .enumerate()
        .map(|(j, &mu)| OrderMoments {
            mu,
            sign: (0..n1).map(|s| sign_sum[s * m + j] * scale).collect(),
            q: (0..n1).map(|s| q_sum[s * m + j] * scale).collect(),
        })
        .collect()
}

/// `C_n^α + C_n^{β/2}` for `n = N0 + N1`.
pub fn curve_margin(n: u64, alpha: f64, beta: f64) -> Result<f64> {
    Ok(CurveConstant::new(n, alpha)?.value + CurveConstant::new(n, beta / 2.0)?.value)
}

/// Whether some `j` satisfies the sufficient condition.
pub fn condition_holds(moments: &OrderMoments, n0: u64, alpha: f64, beta: f64) -> Result<bool> {
    let n1 = moments.sign.len() as u64;
    let c = curve_margin(n0 + n1, alpha, beta)?;
    let level = beta / (2.0 * n1 as f64);
    let mut lhs = 0.0;
    for (j0, (&s, &q)) in moments.sign.iter().zip(&moments.q).enumerate() {
        lhs += s;
        let j = (j0 + 1) as f64;
        if lhs <= 0.0 {
            continue;
        }
        // t_j ≤ T exactly when P(Bin(N0, q_j) ≥ T) ≤ level.
        let slack = (lhs / c).powi(2) - j;
        if slack < 0.0 {
            continue;
        }
        let t = slack.floor() as u64;
        if binom_upper_tail(n0, q.clamp(0.0, 1.0), t) <= level {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Smallest grid μ meeting the sufficient condition.
pub fn amt_sufficient_mu(inputs: &PowerConditionInputs) -> Result<Required> {
    inputs.validate()?;
    let moments = order_moments(inputs.n1 as usize, &inputs.mu_grid, inputs.mc_draws, inputs.seed);
    required_mu(&moments, inputs.n0, inputs.alpha, inputs.beta)
}

/// First entry of `moments` (in grid order) meeting the condition.
pub fn required_mu(moments: &[OrderMoments], n0: u64, alpha: f64, beta: f64) -> Result<Required> {
    for m in moments {
        if condition_holds(m, n0, alpha, beta)? {
            return Ok(Required::Mu(m.mu));
        }
    }
    Ok(Required::AboveGrid)
}

/// One cell of a condition surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceCell {
    pub n0: u64,
    pub n1: u64,
    pub required: Required,
}

/// Required μ on an `(N0, N1)` grid; moments are shared across `N0`.
pub fn condition_surface(
    n0s: &[u64],
    n1s: &[u64],
    alpha: f64,
    beta: f64,
    mu_grid: &[f64],
    draws: usize,
    seed: u64,
) -> Result<Vec<SurfaceCell>> {
    let mut out = Vec::new();
    for &n1 in n1s {
        let probe = PowerConditionInputs { n0: 1, n1, alpha, beta, mu_grid: mu_grid.to_vec(), mc_draws: draws, seed };
        probe.validate()?;
        let moments = order_moments(n1 as usize, mu_grid, draws, seed);
        for &n0 in n0s {
            if n0 == 0 {
                return Err(Error::Condition("N0 must be positive".into()));
            }
            out.push(SurfaceCell { n0, n1, required: required_mu(&moments, n0, alpha, beta)? });
        }
    }
    Ok(out)
}

/// `lo, lo + step, ..., ≤ hi`.
pub fn linear_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9).collect()
}

/// `count` points spaced evenly in log scale from `lo` to `hi`, rounded.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<u64> {
    if count == 1 {
        return vec![lo.round() as u64];
    }
    (0..count)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (count - 1) as f64).exp().round() as u64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use gnt_core::stats::binom_upper_quantile;

    #[test]
    fn binomial_quantile_tail_sum() {
        assert_eq!(binom_upper_quantile(10, 0.5, 0.05), 9);
        assert!((binom_upper_tail(10, 0.5, 8) - 0.0546875).abs() < 1e-12);
        assert!((binom_upper_tail(10, 0.5, 9) - 0.0107421875).abs() < 1e-12);
    }

    #[test]
    fn abs_quantile_inverts_survival() {
        for mu in [0.5, 2.0, 4.0] {
            for v in [0.1, 1.0, 5.0, 20.0] {
                let a = abs_quantile(mu, v);
                let back = -(norm_sf(a - mu) + norm_sf(a + mu)).ln();
                assert!((back - v).abs() < 1e-8, "{mu} {v} {back}");
            }
        }
    }

    #[test]
    fn single_non_null_moments_match_quadrature() {
        // With N1 = 1, |Z_(1)| = |Z|: E tanh(μ|Z|) = 2Φ(μ) - 1.
        let mu = 1.3;
        let m = &order_moments(1, &[mu], 40_000, 4)[0];
        let want = 1.0 - 2.0 * norm_sf(mu);
        assert!((m.sign[0] - want).abs() < 0.01, "{} vs {want}", m.sign[0]);
        // q = P(|Z0| > |Z|) for independent Z0 ~ N(0,1), Z ~ N(μ,1): by quadrature.
        let mut q = 0.0;
        let h = 1e-3;
        let mut a = h / 2.0;
        while a < 12.0 {
            let dens = gnt_core::stats::norm_pdf(a - mu) + gnt_core::stats::norm_pdf(a + mu);
            q += 2.0 * norm_sf(a) * dens * h;
            a += h;
        }
        assert!((m.q[0] - q).abs() < 0.01, "{} vs {q}", m.q[0]);
    }

    #[test]
    fn moments_are_ordered() {
        let ms = order_moments(50, &[1.0, 2.0], 2000, 1);
        for m in &ms {
            assert!(m.sign.windows(2).all(|w| w[0] >= w[1] - 1e-12));
            assert!(m.q.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        }
        for s in 0..50 {
            assert!(ms[1].sign[s] >= ms[0].sign[s]);
            assert!(ms[1].q[s] <= ms[0].q[s]);
        }
    }

    #[test]
    fn strong_dense_signal_satisfies_the_condition() {
        let moments = order_moments(1000, &linear_grid(0.1, 6.0, 0.1), 2000, 3);
        let r = required_mu(&moments, 100, 0.05, 0.05).unwrap();
        assert!(r.value().is_some_and(|m| m < 1.5), "{r}");
        let weak = order_moments(10, &[0.5, 1.0], 2000, 3);
        assert_eq!(required_mu(&weak, 100_000, 0.05, 0.05).unwrap(), Required::AboveGrid);
    }

    #[test]
    fn invalid_inputs() {
        let ok = PowerConditionInputs {
            n0: 10,
            n1: 10,
            alpha: 0.05,
            beta: 0.05,
            mu_grid: vec![1.0],
            mc_draws: MIN_DRAWS,
            seed: 0,
        };
        assert!(ok.validate().is_ok());
        assert!(PowerConditionInputs { n0: 0, ..ok.clone() }.validate().is_err());
        assert!(PowerConditionInputs { mc_draws: 10, ..ok.clone() }.validate().is_err());
        assert!(PowerConditionInputs { alpha: 1.0, ..ok.clone() }.validate().is_err());
        assert!(PowerConditionInputs { mu_grid: vec![], ..ok.clone() }.validate().is_err());
        assert!(PowerConditionInputs { mu_grid: vec![2.0, 1.0], ..ok }.validate().is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(linear_grid(0.1, 0.5, 0.1), vec![0.1, 0.2, 0.3, 0.4, 0.5]);
        assert_eq!(log_grid(100.0, 100_000.0, 4), vec![100, 1000, 10_000, 100_000]);
    }
}
