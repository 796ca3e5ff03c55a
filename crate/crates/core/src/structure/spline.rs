//! Clamped cubic B-splines and their tensor products.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Values of the `n_break - 1 + degree` clamped B-splines at `x`, with
/// breakpoints spread uniformly over `[lo, hi]`.
pub fn bspline_basis(x: f64, lo: f64, hi: f64, n_break: usize, degree: usize) -> Vec<f64> {
    let (first, vals) = bspline_local(x, lo, hi, n_break, degree);
    let mut out = vec![0.0; n_break - 1 + degree];
    for (j, v) in vals.into_iter().enumerate() {
        out[first + j] = v;
    }
    out
}

// Nonzero basis values at x: index of the first one and the degree + 1 values.
fn bspline_local(x: f64, lo: f64, hi: f64, n_break: usize, degree: usize) -> (usize, Vec<f64>) {
    let intervals = n_break - 1;
    let width = if hi > lo { (hi - lo) / intervals as f64 } else { 1.0 };
    let knot = |i: isize| -> f64 {
        // Clamped knot vector: degree+1 copies at each end.
        let j = (i - degree as isize).clamp(0, intervals as isize);
        lo + j as f64 * width
    };
    let u = ((x - lo) / width).clamp(0.0, intervals as f64);
    let span = (u.floor() as usize).min(intervals - 1);
    // Knot index of the left end of the span in the extended vector.
    let s = span + degree;
    let mut n = vec![0.0; degree + 1];
    n[0] = 1.0;
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    let x = x.clamp(lo, hi);
    for j in 1..=degree {
        left[j] = x - knot(s as isize + 1 - j as isize);
        right[j] = knot(s as isize + j as isize) - x;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom > 0.0 { n[r] / denom } else { 0.0 };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    (span, n)
}

/// Tensor-product cubic spline basis on two covariates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorSpline {
    pub knots_per_axis: usize,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl TensorSpline {
    pub const DEGREE: usize = 3;

    pub fn fit_range(knots_per_axis: usize, points: &[[f64; 2]]) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        Self { knots_per_axis: knots_per_axis.max(2), lo, hi }
    }

    pub fn per_axis(&self) -> usize {
        self.knots_per_axis - 1 + Self::DEGREE
    }

    pub fn dim(&self) -> usize {
        self.per_axis().pow(2)
    }

    /// Sparse row: `(column, value)` pairs for one point.
    pub fn row(&self, point: [f64; 2]) -> Vec<(usize, f64)> {
        let (fx, vx) = bspline_local(point[0], self.lo[0], self.hi[0], self.knots_per_axis, Self::DEGREE);
        let (fy, vy) = bspline_local(point[1], self.lo[1], self.hi[1], self.knots_per_axis, Self::DEGREE);
        let d = self.per_axis();
        let mut out = Vec::with_capacity(vx.len() * vy.len());
        for (i, &a) in vx.iter().enumerate() {
            for (j, &b) in vy.iter().enumerate() {
                out.push(((fx + i) * d + fy + j, a * b));
            }
        }
        out
    }

    pub fn design(&self, points: &[[f64; 2]]) -> SparseBasis {
        let d = self.per_axis();
        let mut groups: Vec<AxisGroup> = Vec::new();
        let mut by_key: HashMap<(usize, [u64; 4]), usize> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            let (fx, vx) = bspline_local(p[0], self.lo[0], self.hi[0], self.knots_per_axis, Self::DEGREE);
            let (fy, vy) = bspline_local(p[1], self.lo[1], self.hi[1], self.knots_per_axis, Self::DEGREE);
            let vx: [f64; 4] = [vx[0], vx[1], vx[2], vx[3]];
            let key = (fx, vx.map(f64::to_bits));
            let g = *by_key.entry(key).or_insert_with(|| {
                groups.push(AxisGroup { first: fx, values: vx, members: Vec::new() });
                groups.len() - 1
            });
            groups[g].members.push((i, fy, [vy[0], vy[1], vy[2], vy[3]]));
        }
        SparseBasis {
            dim: self.dim(),
            rows: points.iter().map(|&p| self.row(p)).collect(),
            tensor: Some(TensorRows { per_axis: d, groups }),
        }
    }
}

/// Rows sharing one first-axis factor; each member carries its second-axis factor.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct AxisGroup {
    pub first: usize,
    pub values: [f64; 4],
    pub members: Vec<(usize, usize, [f64; 4])>,
}

/// Cubic tensor rows in factored form, for fast weighted Gram matrices.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TensorRows {
    pub per_axis: usize,
    pub groups: Vec<AxisGroup>,
}

/// Design matrix stored row-wise with few nonzeros per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseBasis {
    pub dim: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub(crate) tensor: Option<TensorRows>,
}

impl SparseBasis {
    pub fn new(dim: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        Self { dim, rows, tensor: None }
    }

    /// A single intercept column.
    pub fn intercept(n: usize) -> Self {
        Self::new(1, vec![vec![(0, 1.0)]; n])
    }

    /// `Σ w_i x_i x_iᵀ`, row-major; only the upper triangle is guaranteed.
    pub fn weighted_gram(&self, w: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut h = vec![0.0; d * d];
        match &self.tensor {
            Some(t) => {
                let q = t.per_axis;
                let mut inner = vec![0.0; q * q];
                for g in &t.groups {
                    inner.iter_mut().for_each(|v| *v = 0.0);
                    let (mut lo, mut hi) = (q, 0);
                    for &(i, fy, vy) in &g.members {
                        let wi = w[i];
                        for b in 0..4 {
                            let wb = wi * vy[b];
                            let row = (fy + b) * q + fy;
                            for c in b..4 {
                                inner[row + c] += wb * vy[c];
                            }
                        }
                        lo = lo.min(fy);
                        hi = hi.max(fy + 4);
                    }
                    for a in 0..4 {
                        for c in 0..4 {
                            let coef = g.values[a] * g.values[c];
                            let (ra, rc) = ((g.first + a) * q, (g.first + c) * q);
                            for b in lo..hi {
                                for e in b..hi {
                                    let v = coef * inner[b * q + e];
                                    if v == 0.0 {
                                        continue;
                                    }
                                    let (r, cidx) = (ra + b, rc + e);
                                    h[r * d + cidx] += v;
                                    if b != e {
                                        let (r2, c2) = (ra + e, rc + b);
                                        h[r2 * d + c2] += v;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            None => {
                for (i, row) in self.rows.iter().enumerate() {
                    for &(a, va) in row {
                        let wa = w[i] * va;
                        for &(b, vb) in row {
                            if b >= a {
                                h[a * d + b] += wa * vb;
                            }
                        }
                    }
                }
            }
        }
        h
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dot(&self, i: usize, beta: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(j, v)| v * beta[j]).sum()
    }

    /// `Xβ`.
    pub fn mul(&self, beta: &[f64]) -> Vec<f64> {
        let Some(t) = &self.tensor else {
            return (0..self.len()).map(|i| self.dot(i, beta)).collect();
        };
        let q = t.per_axis;
        let mut out = vec![0.0; self.len()];
        let mut gamma = vec![0.0; q];
        for g in &t.groups {
            for (b, gb) in gamma.iter_mut().enumerate() {
                *gb = (0..4).map(|a| g.values[a] * beta[(g.first + a) * q + b]).sum();
            }
            for &(i, fy, vy) in &g.members {
                out[i] = (0..4).map(|c| vy[c] * gamma[fy + c]).sum();
            }
        }
        out
    }

    /// `Xᵀr`.
    pub fn mul_transpose(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        let Some(t) = &self.tensor else {
            for (row, &ri) in self.rows.iter().zip(r) {
                for &(a, va) in row {
                    out[a] += ri * va;
                }
            }
            return out;
        };
        let q = t.per_axis;
        let mut acc = vec![0.0; q];
        for g in &t.groups {
            acc.iter_mut().for_each(|v| *v = 0.0);
            for &(i, fy, vy) in &g.members {
                for c in 0..4 {
                    acc[fy + c] += r[i] * vy[c];
                }
            }
            for a in 0..4 {
                for (b, &ab) in acc.iter().enumerate() {
                    out[(g.first + a) * q + b] += g.values[a] * ab;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factored_products_match_rows() {
        let pts: Vec<[f64; 2]> = (0..150).map(|i| [(i % 15) as f64, (i / 15) as f64 * 1.3]).collect();
        let basis = TensorSpline::fit_range(5, &pts).design(&pts);
        let beta: Vec<f64> = (0..basis.dim).map(|j| (j as f64 * 0.37).sin()).collect();
        let r: Vec<f64> = (0..pts.len()).map(|i| (i as f64 * 0.11).cos()).collect();
        let plain = SparseBasis::new(basis.dim, basis.rows.clone());
        for (a, b) in basis.mul(&beta).iter().zip(plain.mul(&beta)) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in basis.mul_transpose(&r).iter().zip(plain.mul_transpose(&r)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn partition_of_unity_and_dimension() {
        for i in 0..=100 {
            let x = i as f64 / 10.0;
            let b = bspline_basis(x, 0.0, 10.0, 5, 3);
            assert_eq!(b.len(), 7);
            assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12, "x {x}");
            assert!(b.iter().all(|&v| v >= -1e-15));
        }
    }

    #[test]
    fn endpoints_interpolate() {
        let b = bspline_basis(0.0, 0.0, 1.0, 5, 3);
        assert!((b[0] - 1.0).abs() < 1e-15);
        let b = bspline_basis(1.0, 0.0, 1.0, 5, 3);
        assert!((b[6] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matches_cox_de_boor_recursion() {
        // Direct recursion on the clamped knot vector.
        let knots = [0.0, 0.0, 0.0, 0.0, 0.25, 0.5, 0.75, 1.0, 1.0, 1.0, 1.0];
        fn n(i: usize, p: usize, x: f64, t: &[f64]) -> f64 {
            if p == 0 {
                let last = i + 1 == t.len() - 1 - 3 && x == 1.0;
                return if (t[i] <= x && x < t[i + 1]) || (last && t[i] < t[i + 1]) { 1.0 } else { 0.0 };
            }
            let a = if t[i + p] > t[i] { (x - t[i]) / (t[i + p] - t[i]) * n(i, p - 1, x, t) } else { 0.0 };
            let b = if t[i + p + 1] > t[i + 1] {
                (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * n(i + 1, p - 1, x, t)
            } else {
                0.0
            };
            a + b
        }
        for k in 0..40 {
            let x = k as f64 / 40.0 + 0.003;
            let ours = bspline_basis(x, 0.0, 1.0, 5, 3);
            for (i, &v) in ours.iter().enumerate() {
                assert!((v - n(i, 3, x, &knots)).abs() < 1e-12, "x {x} i {i}");
            }
        }
    }

    #[test]
    fn tensor_rows_are_sparse() {
        let s = TensorSpline::fit_range(5, &[[0.0, 0.0], [99.0, 99.0]]);
        assert_eq!(s.dim(), 49);
        let r = s.row([50.0, 12.0]);
        assert_eq!(r.len(), 16);
        assert!((r.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn factored_gram_matches_row_gram() {
        let pts: Vec<[f64; 2]> = (0..300).map(|i| [(i % 17) as f64 * 0.7, ((i * 7) % 23) as f64]).collect();
        let s = TensorSpline::fit_range(5, &pts);
        let fast = s.design(&pts);
        let slow = SparseBasis::new(fast.dim, fast.rows.clone());
        let w: Vec<f64> = (0..300).map(|i| 0.1 + (i % 5) as f64 * 0.2).collect();
        let (a, b) = (fast.weighted_gram(&w), slow.weighted_gram(&w));
        let d = fast.dim;
        for r in 0..d {
            for c in r..d {
                assert!((a[r * d + c] - b[r * d + c]).abs() < 1e-10, "{r} {c}");
            }
        }
    }
}
