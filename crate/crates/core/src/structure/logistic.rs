//! Logistic regression with fractional responses, fitted by damped Newton.

use nalgebra::{DMatrix, DVector};

use super::spline::SparseBasis;

pub const MAX_NEWTON: usize = 50;
pub const GRAD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub beta: Vec<f64>,
    /// Fitted probabilities `σ(Xβ)`.
    pub fitted: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
}

// (log(1 + e^η), σ(η)) from one exponential.
fn softplus_sigmoid(eta: f64) -> (f64, f64) {
    let e = (-eta.abs()).exp();
    let sp = eta.max(0.0) + e.ln_1p();
    let sg = if eta >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
    (sp, sg)
}

// Objective and fitted probabilities at linear predictor `eta`.
fn evaluate(y: &[f64], eta: &[f64], fitted: &mut [f64]) -> f64 {
    let mut obj = 0.0;
    for ((&yi, &e), f) in y.iter().zip(eta).zip(fitted.iter_mut()) {
        let (sp, sg) = softplus_sigmoid(e);
        obj += yi * e - sp;
        *f = sg;
    }
    obj
}

/// Maximize `Σ y_i log σ(η_i) + (1 - y_i) log(1 - σ(η_i))` over `β`, where
/// `η = Xβ` and `y_i ∈ [0, 1]`. Each accepted step increases the objective.
pub fn fit_logistic(basis: &SparseBasis, y: &[f64], start: &[f64], max_iters: usize) -> LogisticFit {
    let d = basis.dim;
    let n = basis.len();
    let mut beta = start.to_vec();
    beta.resize(d, 0.0);
    let mut eta = basis.mul(&beta);
    let mut fitted = vec![0.0; n];
    let mut obj = evaluate(y, &eta, &mut fitted);
    let mut iterations = 0;
    let mut converged = false;
    let mut cand_eta = vec![0.0; n];
    let mut cand_fit = vec![0.0; n];
    while iterations < max_iters {
        let resid: Vec<f64> = y.iter().zip(&fitted).map(|(yi, p)| yi - p).collect();
        let w: Vec<f64> = fitted.iter().map(|p| p * (1.0 - p)).collect();
        let grad = DVector::from_vec(basis.mul_transpose(&resid));
        if grad.amax() < GRAD_TOL {
            converged = true;
            break;
        }
        let gram = basis.weighted_gram(&w);
        let mut hess = DMatrix::<f64>::zeros(d, d);
        for a in 0..d {
            for b in a..d {
                hess[(a, b)] = gram[a * d + b];
                hess[(b, a)] = gram[a * d + b];
            }
        }
        let scale = (0..d).map(|a| hess[(a, a)]).fold(0.0_f64, f64::max).max(1e-300);
        let mut jitter = 1e-12 * scale;
        let step = loop {
            let mut h = hess.clone();
            for a in 0..d {
                h[(a, a)] += jitter;
            }
            if let Some(ch) = h.cholesky() {
                break ch.solve(&grad);
            }
            jitter *= 100.0;
            if jitter > 1e6 * scale {
                break grad.clone() / scale;
            }
        };
        let dir = basis.mul(step.as_slice());
        iterations += 1;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            for ((c, &e), &s) in cand_eta.iter_mut().zip(&eta).zip(&dir) {
                *c = e + t * s;
            }
            let o = evaluate(y, &cand_eta, &mut cand_fit);
            if o >= obj {
                let gain = o - obj;
                beta.iter_mut().zip(step.iter()).for_each(|(b, s)| *b += t * s);
                std::mem::swap(&mut eta, &mut cand_eta);
                std::mem::swap(&mut fitted, &mut cand_fit);
                obj = o;
                accepted = true;
                if gain <= 1e-15 * obj.abs().max(1.0) {
                    converged = true;
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted || converged {
            converged = true;
            break;
        }
    }
    LogisticFit { beta, fitted, iterations, converged, objective: obj }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::sigmoid;

    #[test]
    fn fitted_matches_coefficients() {
        let basis = SparseBasis::new(2, (0..20).map(|i| vec![(0, 1.0), (1, i as f64 / 10.0)]).collect());
        let y: Vec<f64> = (0..20).map(|i| if i % 3 == 0 { 0.9 } else { 0.2 }).collect();
        let fit = fit_logistic(&basis, &y, &[0.0, 0.0], 3);
        for i in 0..20 {
            assert!((fit.fitted[i] - sigmoid(basis.dot(i, &fit.beta))).abs() < 1e-12);
        }
    }

    #[test]
    fn intercept_only_recovers_mean() {
        let y = [0.1, 0.3, 0.2, 0.6];
        let fit = fit_logistic(&SparseBasis::intercept(4), &y, &[0.0], MAX_NEWTON);
        assert!(fit.converged);
        assert!((sigmoid(fit.beta[0]) - 0.3).abs() < 1e-10);
    }

    #[test]
    fn two_groups_recover_group_means() {
        let basis = SparseBasis::new(2, (0..10).map(|i| vec![(usize::from(i >= 5), 1.0)]).collect());
        let y: Vec<f64> = (0..10).map(|i| if i < 5 { 0.2 } else { 0.7 }).collect();
        let fit = fit_logistic(&basis, &y, &[0.0, 0.0], MAX_NEWTON);
        assert!((sigmoid(fit.beta[0]) - 0.2).abs() < 1e-9);
        assert!((sigmoid(fit.beta[1]) - 0.7).abs() < 1e-9);
    }
}
