//! Uniform crossing boundaries for sub-Gaussian, sub-exponential and
//! sub-Gamma martingales, and their inverses in `alpha`.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::roots::{bisect_increasing, solve_increasing};
use crate::{Error, Result};

/// Smallest value returned by [`invert_boundary`].
pub const P_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryFamily {
    GaussianLinear,
    GaussianStitched,
    GaussianDiscreteMixture,
    GaussianInvertedStitching,
    ExpLinear,
    GammaCurved,
    ChiSqExpLinear,
    ChiSqGammaCurved,
}

/// Which increments a boundary family is calibrated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncrementClass {
    Gaussian,
    Fisher,
    ChiSq,
}

impl BoundaryFamily {
    pub const ALL: [BoundaryFamily; 8] = [
        BoundaryFamily::GaussianLinear,
        BoundaryFamily::GaussianStitched,
        BoundaryFamily::GaussianDiscreteMixture,
        BoundaryFamily::GaussianInvertedStitching,
        BoundaryFamily::ExpLinear,
        BoundaryFamily::GammaCurved,
        BoundaryFamily::ChiSqExpLinear,
        BoundaryFamily::ChiSqGammaCurved,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryFamily::GaussianLinear => "GaussianLinear",
            BoundaryFamily::GaussianStitched => "GaussianStitched",
            BoundaryFamily::GaussianDiscreteMixture => "GaussianDiscreteMixture",
            BoundaryFamily::GaussianInvertedStitching => "GaussianInvertedStitching",
            BoundaryFamily::ExpLinear => "ExpLinear",
            BoundaryFamily::GammaCurved => "GammaCurved",
            BoundaryFamily::ChiSqExpLinear => "ChiSqExpLinear",
            BoundaryFamily::ChiSqGammaCurved => "ChiSqGammaCurved",
        }
    }

    pub fn increments(self) -> IncrementClass {
        use BoundaryFamily::*;
        match self {
            GaussianLinear | GaussianStitched | GaussianDiscreteMixture | GaussianInvertedStitching => {
                IncrementClass::Gaussian
            }
            ExpLinear | GammaCurved => IncrementClass::Fisher,
            ChiSqExpLinear | ChiSqGammaCurved => IncrementClass::ChiSq,
        }
    }

    pub fn is_linear(self) -> bool {
        matches!(
            self,
            BoundaryFamily::GaussianLinear | BoundaryFamily::ExpLinear | BoundaryFamily::ChiSqExpLinear
        )
    }
}

impl std::fmt::Display for BoundaryFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A boundary `u_α(k)`: family, level, and the family's tuning knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub family: BoundaryFamily,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
}

impl BoundarySpec {
    pub fn new(family: BoundaryFamily, alpha: f64) -> Self {
        Self { family, alpha, m: None, horizon: None }
    }

    pub fn linear(family: BoundaryFamily, alpha: f64, m: f64) -> Self {
        Self { family, alpha, m: Some(m), horizon: None }
    }

    pub fn gaussian_linear(alpha: f64, m: f64) -> Self {
        Self::linear(BoundaryFamily::GaussianLinear, alpha, m)
    }

    pub fn gaussian_stitched(alpha: f64) -> Self {
        Self::new(BoundaryFamily::GaussianStitched, alpha)
    }

    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.family.is_linear() {
            match self.m {
                None => return Err(Error::MissingParameter(self.family.name(), "m")),
                Some(m) if !(m > 0.0 && m.is_finite()) => return Err(Error::InvalidM(m)),
                _ => {}
            }
        }
        if self.family == BoundaryFamily::GaussianInvertedStitching {
            match self.horizon {
                None => return Err(Error::MissingParameter(self.family.name(), "horizon")),
                Some(0) => return Err(Error::ZeroStep),
                _ => {}
            }
        }
        Ok(())
    }

    pub fn compile(&self) -> Result<CompiledBoundary> {
        CompiledBoundary::new(*self)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

/// Anything that yields a threshold for step `k` (1-based).
pub trait Boundary {
    fn value(&self, k: u64) -> f64;
    fn spec(&self) -> &BoundarySpec;
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Linear { slope: f64, offset: f64 },
    Stitched { level: f64 },
    Mixture,
    Inverted { level: f64, horizon: u64 },
    ExpLinear { slope: f64, m: f64, x: f64 },
    ChiSqLinear { slope: f64, m: f64, x: f64 },
    Gamma { sqrt_coef: f64, level: f64 },
}

/// A validated spec with its `alpha`-dependent constants evaluated once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompiledBoundary {
    spec: BoundarySpec,
    shape: Shape,
}

fn loglog2k(k: f64) -> f64 {
    (2.0 * k).ln().ln()
}

fn stitch_level(alpha: f64) -> f64 {
    0.72 * (5.2 / alpha).ln()
}

fn inverted_level(alpha: f64) -> f64 {
    4.7 * (1.0 / alpha).ln() / 20f64.ln()
}

fn exp_slope(m: f64, x: f64) -> f64 {
    (1.41 * m / x + 2.0) * (1.0 + 1.41 * x / m).ln() - 2.0
}

fn chisq_slope(m: f64, x: f64) -> f64 {
    (m / (2.0 * x) + 1.0) * (1.0 + 2.0 * x / m).ln() - 1.0
}

impl CompiledBoundary {
    pub fn new(spec: BoundarySpec) -> Result<Self> {
        spec.validate()?;
        let a = spec.alpha;
        let shape = match spec.family {
            BoundaryFamily::GaussianLinear => {
                let m = spec.m.unwrap_or_default();
                let la = -a.ln();
                Shape::Linear { slope: (la / (2.0 * m)).sqrt(), offset: (m * la / 2.0).sqrt() }
            }
            BoundaryFamily::GaussianStitched => Shape::Stitched { level: stitch_level(a) },
            BoundaryFamily::GaussianDiscreteMixture => Shape::Mixture,
            BoundaryFamily::GaussianInvertedStitching => Shape::Inverted {
                level: inverted_level(a),
                horizon: spec.horizon.unwrap_or_default(),
            },
            BoundaryFamily::ExpLinear => {
                let m = spec.m.unwrap_or_default();
                let x = exp_linear_threshold(a, m, ExpKind::Fisher)?;
                Shape::ExpLinear { slope: exp_slope(m, x), m, x }
            }
            BoundaryFamily::ChiSqExpLinear => {
                let m = spec.m.unwrap_or_default();
                let x = exp_linear_threshold(a, m, ExpKind::ChiSq)?;
                Shape::ChiSqLinear { slope: chisq_slope(m, x), m, x }
            }
            BoundaryFamily::GammaCurved => Shape::Gamma { sqrt_coef: 4.07, level: stitch_level(a) },
            BoundaryFamily::ChiSqGammaCurved => Shape::Gamma { sqrt_coef: 3.42, level: stitch_level(a) },
        };
        Ok(Self { spec, shape })
    }

    /// Checked evaluation: rejects `k = 0` and steps past a finite horizon.
    pub fn eval(&self, k: u64) -> Result<f64> {
        if k == 0 {
            return Err(Error::ZeroStep);
        }
        if let Shape::Inverted { horizon, .. } = self.shape {
            if k > horizon {
                return Err(Error::HorizonExceeded { k, horizon });
            }
        }
        Ok(self.value(k))
    }

    /// Precompute `u_α(1..=horizon)`.
    pub fn tabulate(&self, horizon: u64) -> BoundaryTable {
        let values = (1..=horizon).map(|k| self.value(k)).collect();
        BoundaryTable { compiled: *self, values }
    }
}

impl Boundary for CompiledBoundary {
    /// `u_α(k)`; infinite beyond a finite horizon so it can never be crossed.
    fn value(&self, k: u64) -> f64 {
        debug_assert!(k >= 1);
        let kf = k as f64;
        match self.shape {
            Shape::Linear { slope, offset } => slope * kf + offset,
            Shape::Stitched { level } => 1.7 * (kf * (loglog2k(kf) + level)).sqrt(),
            Shape::Mixture => mixture_root(self.spec.alpha, kf),
            Shape::Inverted { level, horizon } => {
                if k > horizon {
                    f64::INFINITY
                } else {
                    2.42 * (kf * (std::f64::consts::E * kf).ln().ln() + level).sqrt()
                }
            }
            Shape::ExpLinear { slope, m, x } => slope * (kf - m) + 2.82 * x,
            Shape::ChiSqLinear { slope, m, x } => slope * (kf - m) + 2.0 * x,
            Shape::Gamma { sqrt_coef, level } => {
                let l = loglog2k(kf) + level;
                sqrt_coef * (kf * l).sqrt() + 9.66 * l
            }
        }
    }

    fn spec(&self) -> &BoundarySpec {
        &self.spec
    }
}

/// Boundary values cached for `k = 1..=len`, falling back to direct evaluation.
#[derive(Debug, Clone)]
pub struct BoundaryTable {
    compiled: CompiledBoundary,
    values: Vec<f64>,
}

impl BoundaryTable {
    pub fn compiled(&self) -> &CompiledBoundary {
        &self.compiled
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Boundary for BoundaryTable {
    fn value(&self, k: u64) -> f64 {
        match self.values.get((k as usize).wrapping_sub(1)) {
            Some(&v) => v,
            None => self.compiled.value(k),
        }
    }

    fn spec(&self) -> &BoundarySpec {
        self.compiled.spec()
    }
}

/// `u_α(k)` for a spec.
pub fn eval_boundary(spec: &BoundarySpec, k: u64) -> Result<f64> {
    spec.compile()?.eval(k)
}

/// Normalized curve constant `C_k^γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveConstant {
    pub k: u64,
    pub gamma: f64,
    pub value: f64,
}

impl CurveConstant {
    pub fn new(k: u64, gamma: f64) -> Result<Self> {
        check_alpha(gamma)?;
        if k == 0 {
            return Err(Error::ZeroStep);
        }
        let kf = k as f64;
        let value = 1.7 * (loglog2k(kf) + stitch_level(gamma)).sqrt();
        Ok(Self { k, gamma, value })
    }
}

// Discrete mixture. Writing λ_i = r_i·λ_max, the weights ω_i do not depend on
// α: the λ_max factors cancel inside f(1.05 λ_i).
const MIXTURE_TERMS: usize = 10_000;
const TAYLOR_CUTOFF: f64 = 1e-6;

struct MixtureSeries {
    ratio: Vec<f64>,
    weight: Vec<f64>,
    // suffix[j][i] = Σ_{l ≥ i} ω_l r_l^j
    suffix: [Vec<f64>; 5],
}

fn mixture_series() -> &'static MixtureSeries {
    static SERIES: OnceLock<MixtureSeries> = OnceLock::new();
    SERIES.get_or_init(|| {
        let ln11 = 1.1f64.ln();
        let mut ratio = Vec::with_capacity(MIXTURE_TERMS);
        let mut weight = Vec::with_capacity(MIXTURE_TERMS);
        for i in 0..MIXTURE_TERMS {
            let e = i as f64 + 0.5;
            let r = (-e * ln11).exp();
            let w = if 1.05 * r > 1.0 {
                0.0
            } else {
                let log_term = 1.0 - 1.05f64.ln() + e * ln11;
                0.4 * (-0.5 * ln11).exp() / (10.5 * log_term.powf(1.4))
            };
            ratio.push(r);
            weight.push(w);
        }
        let mut suffix: [Vec<f64>; 5] = Default::default();
        for (j, col) in suffix.iter_mut().enumerate() {
            let mut acc = vec![0.0; MIXTURE_TERMS + 1];
            for i in (0..MIXTURE_TERMS).rev() {
                acc[i] = acc[i + 1] + weight[i] * ratio[i].powi(j as i32);
            }
            *col = acc;
        }
        MixtureSeries { ratio, weight, suffix }
    })
}

/// `Σ_i ω_i exp(λ_i s − λ_i² k / 2)` for the level-`alpha` mixture.
pub fn mixture_sum(alpha: f64, s: f64, k: f64) -> f64 {
    let ser = mixture_series();
    let lmax = (2.0 * (1.0 / alpha).ln()).sqrt();
    let mut total = 0.0;
    for i in 0..MIXTURE_TERMS {
        let lam = lmax * ser.ratio[i];
        let x = lam * s - 0.5 * lam * lam * k;
        if ser.weight[i] == 0.0 {
            continue;
        }
        if lam * (s.abs() + 0.5 * lam * k) < TAYLOR_CUTOFF {
            // exp(x) ≈ 1 + x + x²/2 summed through precomputed moments.
            let w = |j: usize| ser.suffix[j][i] * lmax.powi(j as i32);
            let lin = s * w(1) - 0.5 * k * w(2);
            let quad = s * s * w(2) - s * k * w(3) + 0.25 * k * k * w(4);
            return total + w(0) + lin + 0.5 * quad;
        }
        total += ser.weight[i] * x.exp();
    }
    total
}

// Relative precision for the mixture root; tighter than the generic default so
// the mixture sum at the root matches 1/α to ~1e-11.
const MIXTURE_REL_TOL: f64 = 1e-13;

fn mixture_root(alpha: f64, k: f64) -> f64 {
    let target = 1.0 / alpha;
    let f = |s: f64| mixture_sum(alpha, s, k) - target;
    // The sum at s = 0 is below Σω < 1 < 1/α, so the root is positive.
    let hi = crate::roots::grow_upper(f, k.sqrt()).expect("mixture sum is unbounded in s");
    let lo = if f(hi / 2.0) < 0.0 { hi / 2.0 } else { 0.0 };
    bisect_increasing(f, lo, hi, 0.0, MIXTURE_REL_TOL).unwrap_or(hi)
}

/// The discrete-mixture boundary at level `alpha`, step `k`.
pub fn discrete_mixture_boundary(alpha: f64, k: u64) -> Result<f64> {
    check_alpha(alpha)?;
    if k == 0 {
        return Err(Error::ZeroStep);
    }
    Ok(mixture_root(alpha, k as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExpKind {
    Fisher,
    ChiSq,
}

fn exp_exponent(x: f64, m: f64, kind: ExpKind) -> f64 {
    match kind {
        ExpKind::Fisher => -0.71 * x + 0.5 * m * (1.0 + 1.41 * x / m).ln(),
        ExpKind::ChiSq => -0.5 * x + 0.25 * m * (1.0 + 2.0 * x / m).ln(),
    }
}

/// `x_{m,α}`: smallest `x` with `exp(exponent(x)) <= alpha`.
pub fn exp_linear_threshold(alpha: f64, m: f64, kind: ExpKind) -> Result<f64> {
    check_alpha(alpha)?;
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidM(m));
    }
    let la = alpha.ln();
    let x = solve_exp(|x| la - exp_exponent(x, m, kind), m.max(1.0))?;
    Ok(x)
}

fn solve_exp<F: FnMut(f64) -> f64>(mut f: F, start: f64) -> Result<f64> {
    // The exponent is concave and decreasing on x > 0, so f is increasing.
    let hi = crate::roots::grow_upper(&mut f, start)?;
    let lo = if f(hi / 2.0) < 0.0 { hi / 2.0 } else { 0.0 };
    bisect_increasing(f, lo, hi, 0.0, 1e-15)
        .map_err(|_| Error::RootNotFound("exp-linear threshold"))
}

/// `u⁻¹(s; k)`: the level at which the boundary passes through `s` at step `k`.
///
/// Statistics at or below the `alpha → 1` limit of the boundary map to 1;
/// statistics beyond every level map to [`P_FLOOR`].
pub fn invert_boundary(spec: &BoundarySpec, s: f64, k: u64) -> Result<f64> {
    let template = spec.with_alpha(0.5);
    template.validate()?;
    if k == 0 {
        return Err(Error::ZeroStep);
    }
    if let (BoundaryFamily::GaussianInvertedStitching, Some(h)) = (spec.family, spec.horizon) {
        if k > h {
            return Err(Error::HorizonExceeded { k, horizon: h });
        }
    }
    if s.is_nan() {
        return Err(Error::NonFinite(s));
    }
    if s <= 0.0 {
        return Ok(1.0);
    }
    let kf = k as f64;
    let alpha = match spec.family {
        BoundaryFamily::GaussianLinear => {
            let m = spec.m.unwrap_or_default();
            (-2.0 * m * s * s / ((kf + m) * (kf + m))).exp()
        }
        BoundaryFamily::GaussianStitched => {
            let l = (s / 1.7).powi(2) / kf - loglog2k(kf);
            5.2 * (-l / 0.72).exp()
        }
        BoundaryFamily::GammaCurved | BoundaryFamily::ChiSqGammaCurved => {
            let a = if spec.family == BoundaryFamily::GammaCurved { 4.07 } else { 3.42 };
            let b = 9.66;
            let y = (-a * kf.sqrt() + (a * a * kf + 4.0 * b * s).sqrt()) / (2.0 * b);
            5.2 * (-(y * y - loglog2k(kf)) / 0.72).exp()
        }
        BoundaryFamily::GaussianInvertedStitching => {
            let level = (s / 2.42).powi(2) - kf * (std::f64::consts::E * kf).ln().ln();
            if level <= 0.0 {
                1.0
            } else {
                (-level * 20f64.ln() / 4.7).exp()
            }
        }
        BoundaryFamily::ExpLinear | BoundaryFamily::ChiSqExpLinear => {
            let m = spec.m.unwrap_or_default();
            let (kind, slope, cx): (ExpKind, fn(f64, f64) -> f64, f64) = match spec.family {
                BoundaryFamily::ExpLinear => (ExpKind::Fisher, exp_slope, 2.82),
                _ => (ExpKind::ChiSq, chisq_slope, 2.0),
            };
            let b = |x: f64| slope(m, x) * (kf - m) + cx * x;
            // The boundary is increasing in x; x → 0 is the α → 1 limit.
            let x0 = 1e-12 * m;
            if s <= b(x0) {
                1.0
            } else {
                match solve_increasing(|x| b(x) - s, x0, m) {
                    Ok(x) => exp_exponent(x, m, kind).exp(),
                    Err(_) => P_FLOOR,
                }
            }
        }
        BoundaryFamily::GaussianDiscreteMixture => invert_mixture(s, kf),
    };
    Ok(alpha.clamp(P_FLOOR, 1.0))
}

/// The level in `(0, 1)` minimizing the mixture boundary at step `k`.
///
/// As `alpha → 1` the mixing grid `λ_i` collapses toward 0 and the boundary
/// grows again, so the mixture is decreasing in `alpha` only up to this point.
pub fn mixture_turning_level(k: u64) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&a) = cache.lock().expect("cache poisoned").get(&k) {
        return a;
    }
    let kf = k as f64;
    let u = |la: f64| mixture_root(la.exp(), kf);
    // Golden-section search on log α over [log 0.5, log(1 - 1e-9)].
    let (mut lo, mut hi) = (0.5f64.ln(), (1.0 - 1e-9f64).ln());
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (u(x1), u(x2));
    while hi - lo > 1e-9 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = u(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = u(x2);
        }
    }
    let a = (0.5 * (lo + hi)).exp();
    cache.lock().expect("cache poisoned").insert(k, a);
    a
}

fn invert_mixture(s: f64, k: f64) -> f64 {
    // On (0, turning level], u_α(k) >= s exactly when α · M_α(s, k) <= 1.
    let g = |la: f64| {
        let a = la.exp();
        a * mixture_sum(a, s, k) - 1.0
    };
    let (lo, hi) = (P_FLOOR.ln(), mixture_turning_level(k as u64).ln());
    if g(hi) <= 0.0 {
        return 1.0;
    }
    if g(lo) > 0.0 {
        return P_FLOOR;
    }
    // g(lo) <= 0 < g(hi); g increasing in log α on this bracket.
    bisect_increasing(g, lo, hi, 1e-13, 0.0).map(f64::exp).unwrap_or(P_FLOOR)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_specs(alpha: f64) -> Vec<BoundarySpec> {
        BoundaryFamily::ALL
            .iter()
            .map(|&f| {
                let mut s = BoundarySpec::new(f, alpha);
                if f.is_linear() {
                    s.m = Some(100.0);
                }
                if f == BoundaryFamily::GaussianInvertedStitching {
                    s.horizon = Some(10_000);
                }
                s
            })
            .collect()
    }

    #[test]
    fn linear_values() {
        let spec = BoundarySpec::gaussian_linear(0.05, 100.0);
        assert!((eval_boundary(&spec, 100).unwrap() - 24.477468).abs() < 1e-5);
        assert!((eval_boundary(&spec, 200).unwrap() - 36.716202).abs() < 1e-5);
    }

    #[test]
    fn stitched_at_one() {
        let spec = BoundarySpec::gaussian_stitched(0.05);
        assert!((eval_boundary(&spec, 1).unwrap() - 2.933399).abs() < 1e-5);
    }

    #[test]
    fn rejects_bad_input() {
        let spec = BoundarySpec::gaussian_stitched(0.05);
        assert_eq!(eval_boundary(&spec, 0), Err(Error::ZeroStep));
        assert!(matches!(eval_boundary(&spec.with_alpha(1.0), 1), Err(Error::InvalidAlpha(_))));
        assert!(matches!(
            eval_boundary(&BoundarySpec::new(BoundaryFamily::GaussianLinear, 0.05), 1),
            Err(Error::MissingParameter(..))
        ));
        assert!(matches!(
            eval_boundary(&BoundarySpec::gaussian_linear(0.05, -1.0), 1),
            Err(Error::InvalidM(_))
        ));
        let inv = BoundarySpec::new(BoundaryFamily::GaussianInvertedStitching, 0.05).with_horizon(10);
        assert!(matches!(eval_boundary(&inv, 11), Err(Error::HorizonExceeded { .. })));
        assert!(eval_boundary(&inv, 10).is_ok());
    }

    #[test]
    fn inverted_stitching_matches_printed_form_at_005() {
        let spec = BoundarySpec::new(BoundaryFamily::GaussianInvertedStitching, 0.05).with_horizon(100);
        let k = 37.0f64;
        let want = 2.42 * (k * (std::f64::consts::E * k).ln().ln() + 4.7).sqrt();
        assert!((eval_boundary(&spec, 37).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn decreasing_in_alpha_and_positive() {
        let alphas = [0.001, 0.01, 0.05, 0.1, 0.3, 0.6, 0.8, 0.9, 0.99];
        for k in [1u64, 2, 10, 100, 1000, 10_000] {
            for fam in 0..8 {
                let top = if fam == 2 { mixture_turning_level(k) } else { 1.0 };
                let vals: Vec<f64> = alphas
                    .iter()
                    .filter(|&&a| a <= top)
                    .map(|&a| eval_boundary(&all_specs(a)[fam], k).unwrap())
                    .collect();
                for w in vals.windows(2) {
                    assert!(w[0] > w[1], "family {fam} k {k}: {vals:?}");
                }
                assert!(vals.iter().all(|&v| v > 0.0), "family {fam} k {k}: {vals:?}");
            }
        }
    }

    #[test]
    fn mixture_root_solves_definition() {
        for &alpha in &[0.01, 0.05, 0.2] {
            for k in [1u64, 7, 100, 5000] {
                let s = discrete_mixture_boundary(alpha, k).unwrap();
                let m = mixture_sum(alpha, s, k as f64);
                assert!((m * alpha - 1.0).abs() < 1e-9, "alpha {alpha} k {k}: {m}");
            }
        }
    }

    #[test]
    fn mixture_turns_near_one() {
        for k in [1u64, 10, 1000] {
            let a = mixture_turning_level(k);
            assert!(a > 0.8 && a < 1.0, "k {k}: {a}");
            let u = |x: f64| discrete_mixture_boundary(x, k).unwrap();
            assert!(u(a) < u(0.8) && u(a) < u((1.0 + a) / 2.0));
        }
    }

    #[test]
    fn mixture_nondecreasing_in_k() {
        let mut prev = 0.0;
        for k in 1..=100 {
            let s = discrete_mixture_boundary(0.05, k).unwrap();
            assert!(s >= prev);
            prev = s;
        }
    }

    #[test]
    fn mixture_taylor_tail_matches_exact_sum() {
        // Exact summation over all terms against the split evaluation.
        let ser = mixture_series();
        let alpha: f64 = 0.05;
        let lmax = (2.0 * (1.0 / alpha).ln()).sqrt();
        for &(s, k) in &[(3.0, 1.0), (30.0, 100.0), (250.0, 10_000.0)] {
            let exact: f64 = (0..MIXTURE_TERMS)
                .map(|i| {
                    let lam = lmax * ser.ratio[i];
                    ser.weight[i] * (lam * s - 0.5 * lam * lam * k).exp()
                })
                .sum();
            assert!((mixture_sum(alpha, s, k) / exact - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_weights_match_direct_formula() {
        let ser = mixture_series();
        let alpha: f64 = 0.05;
        let lmax = (2.0 * (1.0 / alpha).ln()).sqrt();
        let f = |x: f64| {
            if (0.0..=lmax).contains(&x) {
                0.4 / (x * (std::f64::consts::E * lmax / x).ln().powf(1.4))
            } else {
                0.0
            }
        };
        for i in [0usize, 1, 2, 10, 100, 500] {
            let lam = 1.1f64.powf(-(i as f64 + 0.5)) * lmax;
            let w = 1.1f64.powf(-(i as f64 + 1.0)) * lmax * f(1.05 * lam) / 10.0;
            assert!((ser.weight[i] - w).abs() <= 1e-12 * w.max(1e-300), "i {i}");
        }
        assert_eq!(ser.weight[0], 0.0);
    }

    #[test]
    fn exp_threshold_solves_definition() {
        for kind in [ExpKind::Fisher, ExpKind::ChiSq] {
            let mut prev = 0.0;
            for &alpha in &[0.1, 0.05, 0.01] {
                let x = exp_linear_threshold(alpha, 2500.0, kind).unwrap();
                assert!((exp_exponent(x, 2500.0, kind).exp() - alpha).abs() < 1e-9);
                assert!(x > prev);
                prev = x;
            }
        }
    }

    #[test]
    fn linear_inverse_examples() {
        let spec = BoundarySpec::gaussian_linear(0.05, 100.0);
        for k in [1u64, 100, 10_000] {
            let s = eval_boundary(&spec, k).unwrap();
            assert!((invert_boundary(&spec, s, k).unwrap() - 0.05).abs() < 1e-10);
        }
        let a = invert_boundary(&spec, 24.4775, 100).unwrap();
        assert!((a - 0.05).abs() < 1e-5);
        assert!(a < 0.05);
    }

    #[test]
    fn stitched_inverse_round_trip() {
        let spec = BoundarySpec::gaussian_stitched(0.2);
        let s = eval_boundary(&spec, 50).unwrap();
        assert!((invert_boundary(&spec, s, 50).unwrap() - 0.2).abs() < 1e-8);
    }

    #[test]
    fn round_trip_all_families() {
        let alphas = [0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8];
        let ks = [1u64, 2, 5, 10, 50, 100, 500, 1000, 5000, 10_000];
        for &a in &alphas {
            for spec in all_specs(a) {
                for &k in &ks {
                    let s = eval_boundary(&spec, k).unwrap();
                    let back = invert_boundary(&spec, s, k).unwrap();
                    assert!((back - a).abs() < 1e-8, "{:?} a {a} k {k}: {back}", spec.family);
                }
            }
        }
    }

    #[test]
    fn inverse_clamps() {
        for spec in all_specs(0.05) {
            assert_eq!(invert_boundary(&spec, 0.0, 10).unwrap(), 1.0);
            assert_eq!(invert_boundary(&spec, -3.0, 10).unwrap(), 1.0);
            assert_eq!(invert_boundary(&spec, 1e9, 10).unwrap(), P_FLOOR);
        }
    }

    #[test]
    fn curve_constant_is_normalized_stitching() {
        for k in [1u64, 3, 99, 12345] {
            for &g in &[0.01, 0.05, 0.3] {
                let c = CurveConstant::new(k, g).unwrap().value;
                let u = eval_boundary(&BoundarySpec::gaussian_stitched(g), k).unwrap();
                assert!((c - u / (k as f64).sqrt()).abs() < 1e-12);
            }
        }
        assert!(CurveConstant::new(10, 0.05).unwrap().value < CurveConstant::new(11, 0.05).unwrap().value);
        assert!(CurveConstant::new(10, 0.05).unwrap().value > CurveConstant::new(10, 0.1).unwrap().value);
    }

    #[test]
    fn linear_crosses_stitched() {
        let n = 10_000.0;
        let lin = BoundarySpec::gaussian_linear(0.05, n / 4.0).compile().unwrap();
        let cur = BoundarySpec::gaussian_stitched(0.05).compile().unwrap();
        let below = (1..=100_000u64).any(|k| lin.value(k) < cur.value(k));
        let above_late = lin.value(100_000) > cur.value(100_000);
        let above_early = lin.value(1) > cur.value(1);
        assert!(below && above_late && above_early);
    }

    #[test]
    fn table_matches_direct() {
        let c = BoundarySpec::new(BoundaryFamily::GaussianDiscreteMixture, 0.05).compile().unwrap();
        let t = c.tabulate(50);
        for k in [1u64, 25, 50, 51] {
            assert_eq!(t.value(k), c.value(k));
        }
    }

    #[test]
    fn spec_json_shape() {
        let spec = BoundarySpec::gaussian_linear(0.05, 10.0);
        let v = serde_json::to_value(spec).unwrap();
        assert_eq!(v, serde_json::json!({"family": "GaussianLinear", "alpha": 0.05, "m": 10.0}));
        let back: BoundarySpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, spec);
        let inv: BoundarySpec =
            serde_json::from_str(r#"{"family":"GaussianInvertedStitching","alpha":0.1,"horizon":50}"#).unwrap();
        assert_eq!(inv.horizon, Some(50));
    }
}
