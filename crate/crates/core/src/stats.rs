//! Gaussian, chi-square and binomial helpers.

use statrs::function::beta::beta_reg;
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::gamma_ur;

use crate::roots::{bisect_increasing, grow_upper};

/// Clip applied before Gaussian quantiles.
pub const QUANTILE_CLIP: f64 = 1e-16;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Upper tail `1 - Φ(x)`, accurate far into the tail.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// `Φ⁻¹(1 - p)`, computed from the tail so small `p` keeps full precision.
pub fn norm_upper_quantile(p: f64) -> f64 {
    let p = p.clamp(QUANTILE_CLIP, 1.0 - QUANTILE_CLIP);
    SQRT_2 * erfc_inv(2.0 * p)
}

pub fn norm_quantile(p: f64) -> f64 {
    -norm_upper_quantile(p)
}

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
pub fn chisq_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        gamma_ur(df / 2.0, x / 2.0)
    }
}

/// The `1 - alpha` quantile of chi-square(`df`).
pub fn chisq_upper_quantile(alpha: f64, df: f64) -> f64 {
    let f = |x: f64| alpha - chisq_sf(x, df);
    let hi = grow_upper(f, df.max(1.0)).unwrap_or(f64::INFINITY);
    bisect_increasing(f, 0.0, hi, 1e-12, 1e-13).unwrap_or(hi)
}

/// `P(Bin(n, q) >= t)`.
pub fn binom_upper_tail(n: u64, q: f64, t: u64) -> f64 {
    if t == 0 {
        1.0
    } else if t > n {
        0.0
    } else if q <= 0.0 {
        0.0
    } else if q >= 1.0 {
        1.0
    } else {
        beta_reg(t as f64, (n - t + 1) as f64, q)
    }
}

/// Smallest `t` with `P(Bin(n, q) >= t) <= beta`.
pub fn binom_upper_quantile(n: u64, q: f64, beta: f64) -> u64 {
    let (mut lo, mut hi) = (0u64, n + 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if binom_upper_tail(n, q, mid) <= beta {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
