//! Splitting a p-value into a hidden bit and a revealed masked value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::roots::{bisect_increasing, newton_increasing};
use crate::{Error, Result};

/// Saturation applied to p-values before taking logarithms.
pub const CALIBRATOR_LO: f64 = 1e-300;
pub const CALIBRATOR_HI: f64 = 1.0 - 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum MaskScheme {
    Tent,
    Railway,
    Calibrator { c: f64 },
    CalibratorMixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskPair {
    /// ±1 for tent and railway; `log f(p)` for calibrators.
    pub bit: f64,
    pub masked: f64,
}

fn sign_bit(p: f64) -> f64 {
    if p < 0.5 {
        1.0
    } else {
        -1.0
    }
}

fn check_p(p: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(Error::InvalidPValue(p))
    }
}

fn clip(p: f64) -> f64 {
    p.clamp(CALIBRATOR_LO, CALIBRATOR_HI)
}

// (e^u - 1 - u) / u², the mixture calibrator at p = e^{-u}.
fn mixture_log_f_of_u(u: f64) -> f64 {
    if u < 1e-3 {
        (0.5 + u / 6.0 + u * u / 24.0 + u * u * u / 120.0).ln()
    } else if u < 1.0 {
        ((u.exp_m1() - u) / (u * u)).ln()
    } else {
        u + (-(1.0 + u) * (-u).exp()).ln_1p() - 2.0 * u.ln()
    }
}

// (x - 1) / log x, continuous at x = 1 and 0 at x = 0.
fn mixture_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let u = -x.ln();
    if u.abs() < 1e-12 {
        1.0
    } else {
        -(-u).exp_m1() / u
    }
}

fn mixture_p_star() -> f64 {
    static P: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
    *P.get_or_init(|| {
        // log f is increasing in u; f = 1 at p_*.
        let u = bisect_increasing(mixture_log_f_of_u, 0.0, 10.0, 1e-15, 0.0).unwrap_or(1.7933);
        (-u).exp()
    })
}

impl MaskScheme {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MaskScheme::Calibrator { c } if !(c > 0.0 && c < 1.0) => Err(Error::InvalidCalibrator(c)),
            _ => Ok(()),
        }
    }

    pub fn is_calibrator(&self) -> bool {
        matches!(self, MaskScheme::Calibrator { .. } | MaskScheme::CalibratorMixture)
    }

    /// Upper end of the masked range.
    pub fn masked_max(&self) -> f64 {
        match *self {
            MaskScheme::Tent | MaskScheme::Railway => 0.5,
            _ => self.p_star(),
        }
    }

    /// Where the calibrator density equals 1 (0.5 for the sign-based schemes).
    pub fn p_star(&self) -> f64 {
        match *self {
            MaskScheme::Tent | MaskScheme::Railway => 0.5,
            MaskScheme::Calibrator { c } => c.powf(1.0 / (1.0 - c)),
            MaskScheme::CalibratorMixture => mixture_p_star(),
        }
    }

    /// `log f(p)` for the calibrator schemes, after saturation.
    pub fn log_density(&self, p: f64) -> f64 {
        self.log_density_at_log(-clip(p).ln())
    }

    /// `log f(e^{-u})` without saturation.
    pub fn log_density_at_log(&self, u: f64) -> f64 {
        match *self {
            MaskScheme::Calibrator { c } => c.ln() + (1.0 - c) * u,
            MaskScheme::CalibratorMixture => mixture_log_f_of_u(u),
            MaskScheme::Tent | MaskScheme::Railway => 0.0,
        }
    }

    /// `H(x) = F(x) - x` where `F` integrates the calibrator density.
    pub fn h(&self, x: f64) -> f64 {
        match *self {
            MaskScheme::Calibrator { c } => x.powf(c) - x,
            MaskScheme::CalibratorMixture => mixture_cdf(x) - x,
            MaskScheme::Tent | MaskScheme::Railway => 0.0,
        }
    }

    fn p_from_log_density(&self, bit: f64) -> f64 {
        match *self {
            MaskScheme::Calibrator { c } => ((bit - c.ln()) / (c - 1.0)).exp(),
            _ => {
                let u = bisect_increasing(|u| mixture_log_f_of_u(u) - bit, 0.0, 700.0, 0.0, 1e-15)
                    .unwrap_or(0.0);
                (-u).exp()
            }
        }
    }

    // The point in [0, p_*] sharing H with some p in (p_*, 1].
    fn low_preimage(&self, p: f64) -> f64 {
        let target = self.h(p);
        let ps = self.p_star();
        if target <= 0.0 {
            return 0.0;
        }
        // H increases on [0, p_*]; search in log x to resolve tiny roots.
        let g = |lx: f64| self.h(lx.exp()) - target;
        let dg = |lx: f64| (self.log_density_at_log(-lx).exp() - 1.0) * lx.exp();
        let lo = CALIBRATOR_LO.ln();
        if g(lo) >= 0.0 {
            return CALIBRATOR_LO;
        }
        newton_increasing(g, dg, lo, ps.ln(), 1e-14, 0.0).map(f64::exp).unwrap_or(ps)
    }

    // The point in [p_*, 1] sharing H with x in [0, p_*].
    fn high_preimage(&self, x: f64) -> f64 {
        let target = self.h(x);
        let ps = self.p_star();
        // H decreases on [p_*, 1].
        let slope = |y: f64| 1.0 - self.log_density_at_log(-y.ln()).exp();
        newton_increasing(|y| target - self.h(y), slope, ps, 1.0, 1e-16, 0.0).unwrap_or(1.0)
    }

    /// The two p-values consistent with a masked value, with the
    /// density ratio `|dp_high/dg|` of the second preimage.
    ///
    /// The first entry is the small-p preimage (bit +1 for tent and railway).
    pub fn preimages(&self, masked: f64) -> (f64, f64, f64) {
        match *self {
            MaskScheme::Tent => (masked, 1.0 - masked, 1.0),
            MaskScheme::Railway => (masked, masked + 0.5, 1.0),
            _ => {
                let x = masked.max(CALIBRATOR_LO);
                let y = self.high_preimage(x);
                let fx = self.log_density(x).exp();
                let fy = self.log_density(y).exp();
                let jac = if 1.0 - fy > 0.0 { ((fx - 1.0) / (1.0 - fy)).max(0.0) } else { 1.0 };
                (x, y, jac)
            }
        }
    }
}

/// Decompose `p` under `scheme`.
pub fn mask(p: f64, scheme: MaskScheme) -> Result<MaskPair> {
    check_p(p)?;
    scheme.validate()?;
    Ok(match scheme {
        MaskScheme::Tent => MaskPair { bit: sign_bit(p), masked: p.min(1.0 - p) },
        MaskScheme::Railway => MaskPair { bit: sign_bit(p), masked: p.min((p + 0.5) % 1.0) },
        MaskScheme::Calibrator { .. } | MaskScheme::CalibratorMixture => {
            let q = clip(p);
            let masked = if q <= scheme.p_star() { q } else { scheme.low_preimage(q) };
            MaskPair { bit: scheme.log_density(q), masked }
        }
    })
}

/// Recover `p` from a pair produced by [`mask`].
pub fn unmask(pair: MaskPair, scheme: MaskScheme) -> Result<f64> {
    scheme.validate()?;
    let MaskPair { bit, masked } = pair;
    let bad = || Error::InconsistentPair { bit, masked };
    if !bit.is_finite() || !masked.is_finite() {
        return Err(bad());
    }
    match scheme {
        MaskScheme::Tent => match bit {
            b if b == 1.0 && (0.0..0.5).contains(&masked) => Ok(masked),
            b if b == -1.0 && (0.0..=0.5).contains(&masked) => Ok(1.0 - masked),
            _ => Err(bad()),
        },
        MaskScheme::Railway => match bit {
            b if b == 1.0 && (0.0..0.5).contains(&masked) => Ok(masked),
            b if b == -1.0 && (0.0..=0.5).contains(&masked) => Ok(masked + 0.5),
            _ => Err(bad()),
        },
        _ => {
            let p = scheme.p_from_log_density(bit);
            let expect = mask(p, scheme)?.masked;
            if (expect - masked).abs() <= 1e-8 * expect.max(1e-12) + 1e-12 {
                Ok(p)
            } else {
                Err(bad())
            }
        }
    }
}

/// Sign and magnitude of a symmetric statistic; zero maps to the negative sign.
pub fn mask_statistic(t: f64) -> Result<MaskPair> {
    if !t.is_finite() {
        return Err(Error::NonFinite(t));
    }
    Ok(MaskPair { bit: if t > 0.0 { 1.0 } else { -1.0 }, masked: t.abs() })
}

/// Largest deviation between the overall mean of the inference quantity and its
/// mean within each decile of the masked value, under uniform p-values.
///
/// The inference quantity is the bit for tent and railway and the density
/// factor `f(p) = exp(bit)` for calibrators.
pub fn mean_independence_check(scheme: MaskScheme, n_draws: usize, seed: u64) -> Result<f64> {
    scheme.validate()?;
    if n_draws < 10_000 {
        return Err(Error::Degenerate("mean_independence_check needs at least 10^4 draws"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws: Vec<(f64, f64)> = (0..n_draws)
        .map(|_| {
            let p: f64 = rng.gen();
            let pair = mask(p, scheme).expect("uniform draw is a valid p-value");
            let v = if scheme.is_calibrator() { pair.bit.exp() } else { pair.bit };
            (pair.masked, v)
        })
        .collect();
    draws.sort_by(|a, b| a.0.total_cmp(&b.0));
    let overall = draws.iter().map(|d| d.1).sum::<f64>() / n_draws as f64;
    let mut worst: f64 = 0.0;
    for b in 0..10 {
        let chunk = &draws[b * n_draws / 10..(b + 1) * n_draws / 10];
        let mean = chunk.iter().map(|d| d.1).sum::<f64>() / chunk.len() as f64;
        worst = worst.max((mean - overall).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    const C05: MaskScheme = MaskScheme::Calibrator { c: 0.5 };

    #[test]
    fn tent_and_railway_examples() {
        assert_eq!(mask(0.7, MaskScheme::Tent).unwrap(), MaskPair { bit: -1.0, masked: 0.30000000000000004 });
        let r = mask(0.99, MaskScheme::Railway).unwrap();
        assert!((r.masked - 0.49).abs() < 1e-12);
        assert_eq!(r.bit, -1.0);
        assert_eq!(mask(0.5, MaskScheme::Tent).unwrap().bit, -1.0);
        assert_eq!(mask(0.5, MaskScheme::Railway).unwrap().masked, 0.0);
    }

    #[test]
    fn unmask_examples() {
        let p = unmask(MaskPair { bit: -1.0, masked: 0.3 }, MaskScheme::Tent).unwrap();
        assert!((p - 0.7).abs() < 1e-15);
        assert_eq!(unmask(MaskPair { bit: 1.0, masked: 0.49 }, MaskScheme::Railway).unwrap(), 0.49);
        assert_eq!(unmask(MaskPair { bit: -1.0, masked: 0.49 }, MaskScheme::Railway).unwrap(), 0.99);
        assert!(unmask(MaskPair { bit: 1.0, masked: 0.6 }, MaskScheme::Tent).is_err());
        assert!(unmask(MaskPair { bit: 0.3, masked: 0.1 }, MaskScheme::Tent).is_err());
        assert!(unmask(MaskPair { bit: 0.0, masked: 0.2 }, C05).is_err());
    }

    #[test]
    fn calibrator_examples() {
        let pair = mask(0.81, C05).unwrap();
        assert!((pair.masked - 0.01).abs() < 1e-10);
        assert!((C05.p_star() - 0.25).abs() < 1e-15);
        assert!(mask(0.25, C05).unwrap().bit.abs() < 1e-15);
        let e1 = (-1.0f64).exp();
        let m = mask(e1, MaskScheme::CalibratorMixture).unwrap();
        assert!((m.bit - (std::f64::consts::E - 2.0).ln()).abs() < 1e-12);
        assert!((m.bit + 0.330893).abs() < 1e-6);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(mask(-0.1, MaskScheme::Tent).is_err());
        assert!(mask(1.1, C05).is_err());
        assert!(mask(f64::NAN, MaskScheme::Railway).is_err());
        assert!(mask(0.5, MaskScheme::Calibrator { c: 1.0 }).is_err());
        assert!(mask(0.0, C05).unwrap().bit.is_finite());
        assert!(mask(1.0, MaskScheme::CalibratorMixture).unwrap().bit.is_finite());
    }

    #[test]
    fn statistic_masking() {
        assert_eq!(mask_statistic(2.3).unwrap(), MaskPair { bit: 1.0, masked: 2.3 });
        assert_eq!(mask_statistic(-2.3).unwrap(), MaskPair { bit: -1.0, masked: 2.3 });
        assert_eq!(mask_statistic(0.0).unwrap(), MaskPair { bit: -1.0, masked: 0.0 });
        assert!(mask_statistic(f64::INFINITY).is_err());
    }

    fn schemes() -> Vec<MaskScheme> {
        vec![
            MaskScheme::Tent,
            MaskScheme::Railway,
            MaskScheme::Calibrator { c: 0.2 },
            C05,
            MaskScheme::Calibrator { c: 0.8 },
            MaskScheme::CalibratorMixture,
        ]
    }

    #[test]
    fn round_trip_many_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for scheme in schemes() {
            let n = if scheme.is_calibrator() { 20_000 } else { 100_000 };
            for _ in 0..n {
                let p: f64 = rng.gen();
                let pair = mask(p, scheme).unwrap();
                assert!(pair.masked >= 0.0 && pair.masked <= scheme.masked_max() + 1e-15);
                let back = unmask(pair, scheme).unwrap();
                let tol = if scheme.is_calibrator() { 1e-10 } else { 1e-12 };
                assert!((back - p).abs() < tol, "{scheme:?} p {p} back {back}");
            }
        }
    }

    #[test]
    fn masked_uniform_under_null() {
        let n = 100_000;
        for scheme in [MaskScheme::Tent, MaskScheme::Railway] {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mut g: Vec<f64> = (0..n).map(|_| mask(rng.gen(), scheme).unwrap().masked).collect();
            g.sort_by(f64::total_cmp);
            let ks = g
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = 2.0 * x;
                    ((i + 1) as f64 / n as f64 - f).abs().max((f - i as f64 / n as f64).abs())
                })
                .fold(0.0, f64::max);
            assert!(ks < 0.006, "{scheme:?}: {ks}");
        }
    }

    #[test]
    fn bit_uncorrelated_with_masked() {
        let n = 100_000;
        for scheme in [MaskScheme::Tent, MaskScheme::Railway] {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let pairs: Vec<MaskPair> = (0..n).map(|_| mask(rng.gen(), scheme).unwrap()).collect();
            let mb = pairs.iter().map(|q| q.bit).sum::<f64>() / n as f64;
            let mg = pairs.iter().map(|q| q.masked).sum::<f64>() / n as f64;
            let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
            for q in &pairs {
                sxy += (q.bit - mb) * (q.masked - mg);
                sxx += (q.bit - mb).powi(2);
                syy += (q.masked - mg).powi(2);
            }
            let r = sxy / (sxx * syy).sqrt();
            assert!(r.abs() < 4.0 / (n as f64).sqrt(), "{scheme:?}: {r}");
        }
    }

    fn integrate_density(scheme: MaskScheme) -> f64 {
        // p = e^{-u}, u = v / (1 - v): a bounded integrand on v in [0, 1].
        let n = 200_000;
        let h = 1.0 / n as f64;
        let g = |v: f64| {
            let v = v.min(1.0 - 1e-9);
            let u = v / (1.0 - v);
            (scheme.log_density_at_log(u) - u).exp() / ((1.0 - v) * (1.0 - v))
        };
        let mut s = g(0.0) + g(1.0);
        for i in 1..n {
            let t = i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(t);
        }
        s * h / 3.0
    }

    #[test]
    fn calibrators_integrate_to_one() {
        for c in [0.2, 0.4, 0.6, 0.8] {
            let v = integrate_density(MaskScheme::Calibrator { c });
            assert!((v - 1.0).abs() < 1e-6, "c {c}: {v}");
        }
        let v = integrate_density(MaskScheme::CalibratorMixture);
        assert!((v - 1.0).abs() < 1e-6, "mixture: {v}");
    }

    #[test]
    fn h_has_one_low_solution() {
        for scheme in [MaskScheme::Calibrator { c: 0.3 }, C05, MaskScheme::CalibratorMixture] {
            let ps = scheme.p_star();
            let grid: Vec<f64> = (0..=2000).map(|i| ps * i as f64 / 2000.0).collect();
            for j in 1..50 {
                let p = ps + (1.0 - ps) * j as f64 / 50.0;
                let target = scheme.h(p);
                let crossings = grid
                    .windows(2)
                    .filter(|w| (scheme.h(w[0]) - target) * (scheme.h(w[1]) - target) <= 0.0)
                    .count();
                assert_eq!(crossings, 1, "{scheme:?} p {p}");
            }
        }
    }

    #[test]
    fn preimages_share_masked_value() {
        for scheme in schemes() {
            for &g in &[0.001, 0.05, 0.1, 0.2] {
                if g >= scheme.masked_max() {
                    continue;
                }
                let (lo, hi, jac) = scheme.preimages(g);
                assert!((mask(lo, scheme).unwrap().masked - g).abs() < 1e-9);
                assert!((mask(hi, scheme).unwrap().masked - g).abs() < 1e-8, "{scheme:?} {g}");
                assert!(jac > 0.0);
            }
        }
    }

    #[test]
    fn mixture_p_star_is_where_density_is_one() {
        let ps = MaskScheme::CalibratorMixture.p_star();
        assert!(MaskScheme::CalibratorMixture.log_density(ps).abs() < 1e-12);
        assert!((ps - 0.1664).abs() < 1e-3);
    }

    #[test]
    fn scheme_json() {
        assert_eq!(serde_json::to_string(&C05).unwrap(), r#"{"kind":"Calibrator","c":0.5}"#);
        let t: MaskScheme = serde_json::from_str(r#"{"kind":"Railway"}"#).unwrap();
        assert_eq!(t, MaskScheme::Railway);
    }

    #[test]
    fn sign_schemes_mean_independent() {
        for scheme in [MaskScheme::Tent, MaskScheme::Railway] {
            let v = mean_independence_check(scheme, 1_000_000, 3).unwrap();
            assert!(v < 0.01, "{scheme:?}: {v}");
        }
        assert!(mean_independence_check(MaskScheme::Tent, 10, 0).is_err());
    }

    #[test]
    fn calibrator_factor_mean_independent() {
        // Finite-variance calibrator: the Monte-Carlo deviation is small.
        let v = mean_independence_check(MaskScheme::Calibrator { c: 0.8 }, 1_000_000, 3).unwrap();
        assert!(v < 0.01, "{v}");
        // At c = 0.5 the factor has infinite variance, so the deviation only
        // shrinks like sqrt(log n / n); allow for that.
        let v = mean_independence_check(C05, 1_000_000, 3).unwrap();
        assert!(v < 0.03, "{v}");
    }

    #[test]
    fn calibrator_conditional_mean_is_one() {
        // Given g, p is one of two preimages with relative weights 1 and |dy/dx|.
        for scheme in [MaskScheme::Calibrator { c: 0.3 }, C05, MaskScheme::CalibratorMixture] {
            for i in 1..40 {
                let g = scheme.p_star() * i as f64 / 40.0;
                let (x, y, jac) = scheme.preimages(g);
                let fx = scheme.log_density(x).exp();
                let fy = scheme.log_density(y).exp();
                let m = (fx + jac * fy) / (1.0 + jac);
                assert!((m - 1.0).abs() < 1e-7, "{scheme:?} g {g}: {m}");
            }
        }
    }

    #[test]
    fn log_factor_is_not_mean_independent() {
        // Near p_* both preimages have log f ≈ 0, while the overall mean of log f is
        // c - 1 - log(1/c) < 0; the log scale is therefore the wrong quantity to check.
        let scheme = C05;
        let (x, y, _) = scheme.preimages(0.999 * scheme.p_star());
        assert!(scheme.log_density(x).abs() < 0.01 && scheme.log_density(y).abs() < 0.01);
        let overall = 0.5f64.ln() + 0.5;
        assert!(overall < -0.19);
    }
}
