//! Numerical realizations of the product fractional integral (iterated
//! 1D convolutions on grids), the tail factor, truncated dyadic fractional
//! maximal operators over atomic measures, weak-type quotients, and
//! bilinear lower bounds for operator norms.
//!
//! Grid convolutions fix the summation order inside every slice, so
//! results are bitwise identical no matter how slices are scheduled.

use crate::error::{Error, Result};
use crate::indices::ProductIndices;
use crate::weights::{GridFunction, Rectangle};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// The decaying tail factor of a rectangle,
/// `ŝ(x, y) = (1 + |x − c_I|/s)^{α−m} (1 + |y − c_J|/t)^{β−n}`.
#[derive(Debug, Clone)]
pub struct TailFunction {
    pub rectangle: Rectangle,
    pub alpha: f64,
    pub beta: f64,
}

impl TailFunction {
    pub fn new(rectangle: Rectangle, alpha: f64, beta: f64) -> Result<Self> {
        let (m, n) = (rectangle.m() as f64, rectangle.n() as f64);
        if alpha >= m || beta >= n {
            return Err(Error::domain(format!(
                "tail requires alpha < m and beta < n, got alpha={alpha}, m={m}, beta={beta}, n={n}"
            )));
        }
        Ok(TailFunction { rectangle, alpha, beta })
    }

    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let r = &self.rectangle;
        let dx = dist(x, &r.center1);
        let dy = dist(y, &r.center2);
        let m = r.m() as f64;
        let n = r.n() as f64;
        (1.0 + dx / r.s).powf(self.alpha - m) * (1.0 + dy / r.t).powf(self.beta - n)
    }
}

fn dist(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Sampled nonnegative function on an interval (cell midpoints).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1 {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub values: Vec<f64>,
}

impl Grid1 {
    pub fn from_fn(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let h = (b - a) / n as f64;
        let values = (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).collect();
        Grid1 { a, b, n, values }
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    pub fn mid(&self, i: usize) -> f64 {
        self.a + (i as f64 + 0.5) * self.h()
    }
}

/// `∫_cell |x − u|^{α−1} du` over the cell `[lo, hi]` containing `x`,
/// by the exact antiderivative.
fn singular_cell_integral(alpha: f64, x: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo - 1e-12 <= x && x <= hi + 1e-12);
    let left = (x - lo).max(0.0);
    let right = (hi - x).max(0.0);
    (left.powf(alpha) + right.powf(alpha)) / alpha
}

/// 1D fractional integral `I_α f(x) = ∫ |x − u|^{α−1} f(u) du` of a
/// compactly supported grid sample, evaluated at arbitrary points.
/// Midpoint rule, with the cell containing the evaluation point replaced
/// by its exact kernel integral.
pub fn fractional_integral_eval_1d(f: &Grid1, alpha: f64, points: &[f64]) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("fractional order must lie in (0,1), got {alpha}")));
    }
    let h = f.h();
    let out = points
        .iter()
        .map(|&x| {
            let mut acc = 0.0;
            for k in 0..f.n {
                let u = f.mid(k);
                let lo = f.a + k as f64 * h;
                let hi = lo + h;
                let w = if x >= lo && x <= hi {
                    singular_cell_integral(alpha, x, lo, hi)
                } else {
                    (x - u).abs().powf(alpha - 1.0) * h
                };
                acc += w * f.values[k];
            }
            acc
        })
        .collect();
    Ok(out)
}

/// 1D fractional integral sampled back onto an output grid.
pub fn fractional_integral_1d(f: &Grid1, alpha: f64, out_a: f64, out_b: f64, out_n: usize) -> Result<Grid1> {
    let h_out = (out_b - out_a) / out_n as f64;
    let points: Vec<f64> = (0..out_n).map(|i| out_a + (i as f64 + 0.5) * h_out).collect();
    let values = fractional_integral_eval_1d(f, alpha, &points)?;
    Ok(Grid1 { a: out_a, b: out_b, n: out_n, values })
}

/// Kernel weights for one axis pass when the output grid coincides with
/// the input grid: weight[d] multiplies the input cell at offset d.
fn axis_kernel(alpha: f64, h: f64, n: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n);
    // offset 0: exact integral over the centered cell, (h/2)^α · 2/α.
    w.push(2.0 * (h / 2.0).powf(alpha) / alpha);
    for d in 1..n {
        w.push((d as f64 * h).powf(alpha - 1.0) * h);
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    First,
    Second,
}

fn axis_pass(g: &GridFunction, alpha: f64, axis: Axis) -> GridFunction {
    let (len, slices, h) = match axis {
        Axis::First => (g.nx, g.ny, g.hx()),
        Axis::Second => (g.ny, g.nx, g.hy()),
    };
    let kernel = axis_kernel(alpha, h, len);
    let mut out = GridFunction::zeros(g.x0, g.x1, g.y0, g.y1, g.nx, g.ny);
    let get = |i: usize, s: usize| match axis {
        Axis::First => g.get(i, s),
        Axis::Second => g.get(s, i),
    };
    // One output slice at a time; summation order inside a slice is fixed.
    let rows: Vec<Vec<f64>> = (0..slices)
        .into_par_iter()
        .map(|s| {
            let mut row = vec![0.0; len];
            for (i, out_v) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for k in 0..len {
                    acc += kernel[i.abs_diff(k)] * get(k, s);
                }
                *out_v = acc;
            }
            row
        })
        .collect();
    for (s, row) in rows.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            match axis {
                Axis::First => out.values[i * g.ny + s] = *v,
                Axis::Second => out.values[s * g.ny + i] = *v,
            }
        }
    }
    out
}

/// Product fractional integral on an `m = n = 1` grid, computed by
/// iterating the 1D operator along each axis. `order` picks which axis
/// factor is applied first; both orders agree (finite Fubini).
pub fn product_fractional_integral(f: &GridFunction, alpha: f64, beta: f64, first: Axis) -> Result<GridFunction> {
    for (name, a) in [("alpha", alpha), ("beta", beta)] {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::domain(format!("{name} must lie in (0,1), got {a}")));
        }
    }
    if f.values.iter().any(|v| *v < 0.0) {
        return Err(Error::domain("input grid must be nonnegative"));
    }
    let out = match first {
        Axis::First => axis_pass(&axis_pass(f, alpha, Axis::First), beta, Axis::Second),
        Axis::Second => axis_pass(&axis_pass(f, beta, Axis::Second), alpha, Axis::First),
    };
    Ok(out)
}

/// Product fractional integral evaluated at a list of points (no output
/// grid): the first axis is convolved only at the x-coordinates that are
/// actually needed.
pub fn product_fractional_eval(f: &GridFunction, alpha: f64, beta: f64, points: &[(f64, f64)]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(points.len());
    for &(x, y) in points {
        // I_α along axis 1 for every y-slice, evaluated at x.
        let mut slice = Grid1 { a: f.y0, b: f.y1, n: f.ny, values: vec![0.0; f.ny] };
        for iy in 0..f.ny {
            let col = Grid1 {
                a: f.x0,
                b: f.x1,
                n: f.nx,
                values: (0..f.nx).map(|ix| f.get(ix, iy)).collect(),
            };
            slice.values[iy] = fractional_integral_eval_1d(&col, alpha, &[x])?[0];
        }
        out.push(fractional_integral_eval_1d(&slice, beta, &[y])?[0]);
    }
    Ok(out)
}

/// Truncated dyadic generation range: cubes of side `2^k`, `k_min ≤ k ≤ k_max`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DyadicConfig {
    pub k_min: i32,
    pub k_max: i32,
}

impl DyadicConfig {
    pub fn new(k_min: i32, k_max: i32) -> Result<Self> {
        if k_min > k_max {
            return Err(Error::domain("empty dyadic generation range"));
        }
        Ok(DyadicConfig { k_min, k_max })
    }
}

impl Default for DyadicConfig {
    fn default() -> Self {
        DyadicConfig { k_min: -20, k_max: 20 }
    }
}

/// The dyadic cube of generation `k` containing `x`, as (lower corner, side).
fn dyadic_cube(x: &[f64], k: i32) -> (Vec<f64>, f64) {
    let side = 2f64.powi(k);
    let corner = x.iter().map(|&c| (c / side).floor() * side).collect();
    (corner, side)
}

fn in_cube(corner: &[f64], side: f64, pt: &[f64]) -> bool {
    corner.iter().zip(pt).all(|(lo, x)| *x >= *lo && *x < lo + side)
}

/// Result of a truncated maximal evaluation at one point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MaximalValue {
    pub value: f64,
    /// The maximizing cube touched the truncation boundary.
    pub truncated: bool,
}

/// Weighted atoms: positions in the ambient space plus `f·mass` weights.
fn atom_mass_in(atoms: &[(Vec<f64>, f64)], corner: &[f64], side: f64) -> f64 {
    atoms
        .iter()
        .filter(|(pt, _)| in_cube(corner, side, pt))
        .map(|(_, m)| m)
        .sum()
}

/// 1-parameter dyadic fractional maximal function of an atomic measure in
/// `R^d`: `sup over dyadic cubes Q ∋ x of ℓ(Q)^{α−d} μ(Q)`, exact over atoms.
/// The factor is the side length to the power `α − d`, matching the
/// convention `|I|^{α/m − 1} = ℓ^{α−m}` used for rectangles.
pub fn dyadic_fractional_maximal_1d(
    atoms: &[(Vec<f64>, f64)],
    alpha: f64,
    d: u32,
    cfg: &DyadicConfig,
    eval_points: &[Vec<f64>],
) -> Result<Vec<MaximalValue>> {
    if cfg.k_min > cfg.k_max {
        return Err(Error::domain("empty dyadic generation range"));
    }
    let out = eval_points
        .iter()
        .map(|x| {
            let mut best = 0.0f64;
            let mut best_k = cfg.k_min;
            for k in cfg.k_min..=cfg.k_max {
                let (corner, side) = dyadic_cube(x, k);
                let mass = atom_mass_in(atoms, &corner, side);
                if mass > 0.0 {
                    let v = side.powf(alpha - d as f64) * mass;
                    if v > best {
                        best = v;
                        best_k = k;
                    }
                }
            }
            MaximalValue { value: best, truncated: best > 0.0 && (best_k == cfg.k_min || best_k == cfg.k_max) }
        })
        .collect();
    Ok(out)
}

/// Product dyadic fractional maximal function over atomic measures:
/// `sup over dyadic rectangles I × J ∋ (x,y)` of
/// `ℓ(I)^{α−m} ℓ(J)^{β−n} μ(I × J)`, exact over atoms.
pub fn product_dyadic_maximal(
    atoms: &[(Vec<f64>, f64)],
    idx: &ProductIndices,
    cfg1: &DyadicConfig,
    cfg2: &DyadicConfig,
    eval_points: &[(Vec<f64>, Vec<f64>)],
) -> Result<Vec<MaximalValue>> {
    let m = idx.m as usize;
    let alpha = idx.alpha.value();
    let beta = idx.beta.value();
    let md = idx.m as f64;
    let nd = idx.n as f64;
    let out = eval_points
        .par_iter()
        .map(|(x, y)| {
            let mut best = 0.0f64;
            let mut at_edge = false;
            for k1 in cfg1.k_min..=cfg1.k_max {
                let (c1, s1) = dyadic_cube(x, k1);
                // Atoms whose first factor lies in the k1-cube.
                let sub: Vec<&(Vec<f64>, f64)> = atoms
                    .iter()
                    .filter(|(pt, _)| in_cube(&c1, s1, &pt[..m]))
                    .collect();
                if sub.is_empty() {
                    continue;
                }
                let f1 = s1.powf(alpha - md);
                for k2 in cfg2.k_min..=cfg2.k_max {
                    let (c2, s2) = dyadic_cube(y, k2);
                    let mass: f64 = sub
                        .iter()
                        .filter(|(pt, _)| in_cube(&c2, s2, &pt[m..]))
                        .map(|(_, w)| w)
                        .sum();
                    if mass > 0.0 {
                        let v = f1 * s2.powf(beta - nd) * mass;
                        if v > best {
                            best = v;
                            at_edge = k1 == cfg1.k_min
                                || k1 == cfg1.k_max
                                || k2 == cfg2.k_min
                                || k2 == cfg2.k_max;
                        }
                    }
                }
            }
            MaximalValue { value: best, truncated: best > 0.0 && at_edge }
        })
        .collect();
    Ok(out)
}

/// Weak-type quotient `sup_λ λ |{M > λ}|_ω^{1/q} / ‖f‖_{L^p(σ)}`, where the
/// maximal values are known at the atoms of `ω` so level sets are exact.
/// The supremum over λ is attained in the limit from below at the attained
/// values, i.e. it equals `max over values v of v · ω{M ≥ v}^{1/q}`.
pub fn weak_type_quotient(maximal_at_atoms: &[(f64, f64)], q: f64, f_norm_p_sigma: f64) -> Result<f64> {
    if !(f_norm_p_sigma > 0.0) {
        return Err(Error::domain("zero f-norm in weak-type quotient"));
    }
    let mut pairs: Vec<(f64, f64)> = maximal_at_atoms.to_vec();
    // Sort by maximal value descending; suffix masses give ω{M ≥ v}.
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut best = 0.0f64;
    let mut cum = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let v = pairs[i].0;
        // absorb ties so that cum = ω{M ≥ v}
        while i < pairs.len() && pairs[i].0 == v {
            cum += pairs[i].1;
            i += 1;
        }
        if v > 0.0 {
            best = best.max(v * cum.powf(1.0 / q));
        }
    }
    Ok(best / f_norm_p_sigma)
}

/// Test functions for bilinear norm lower bounds.
#[derive(Debug, Clone)]
pub enum TestFunction {
    /// Indicator of a rectangle.
    RectIndicator { rect: Rectangle },
    /// `1_{B(0,R) × B(0,R)} · ŝ_rect^{p′−1}`, the tail-power family.
    TailPower { rect: Rectangle, radius: f64 },
}

impl TestFunction {
    fn eval(&self, x: &[f64], y: &[f64], p_prime: f64, alpha: f64, beta: f64) -> f64 {
        match self {
            TestFunction::RectIndicator { rect } => {
                if rect.contains(x, y) {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::TailPower { rect, radius } => {
                if dist(x, &vec![0.0; x.len()]) <= *radius && dist(y, &vec![0.0; y.len()]) <= *radius {
                    let tf = TailFunction { rectangle: rect.clone(), alpha, beta };
                    tf.value(x, y).powf(p_prime - 1.0)
                } else {
                    0.0
                }
            }
        }
    }
}

fn kernel(x: &[f64], y: &[f64], u: &[f64], t: &[f64], alpha: f64, beta: f64) -> f64 {
    let m = x.len() as f64;
    let n = y.len() as f64;
    let dx = dist(x, u);
    let dy = dist(y, t);
    let fx = if dx == 0.0 { f64::INFINITY } else { dx.powf(alpha - m) };
    let fy = if dy == 0.0 { f64::INFINITY } else { dy.powf(beta - n) };
    fx * fy
}

/// Certified lower bound on the operator norm `N(σ, ω)` over a family of
/// test functions, for atomic `σ` and `ω`: every quotient
/// `‖I(fσ)‖_{L^q(ω)} / ‖f‖_{L^p(σ)}` is computed exactly over the atoms.
/// Degenerate test functions (zero norm) are skipped.
pub fn norm_lower_bound_atomic(
    sigma: &[(Vec<f64>, f64)],
    omega: &[(Vec<f64>, f64)],
    idx: &ProductIndices,
    family: &[TestFunction],
) -> Result<f64> {
    let m = idx.m as usize;
    let p = idx.p.value();
    let q = idx.q.value();
    let p_prime = idx.p_prime().value();
    let alpha = idx.alpha.value();
    let beta = idx.beta.value();
    let mut best = 0.0f64;
    for tf in family {
        let mut f_norm_p = 0.0;
        for (pt, mass) in sigma {
            let (x, y) = pt.split_at(m);
            let fv = tf.eval(x, y, p_prime, alpha, beta);
            f_norm_p += fv.powf(p) * mass;
        }
        if f_norm_p <= 0.0 {
            continue;
        }
        let mut out_q = 0.0;
        for (opt, omass) in omega {
            let (ox, oy) = opt.split_at(m);
            let mut i_val = 0.0;
            for (spt, smass) in sigma {
                let (sx, sy) = spt.split_at(m);
                let fv = tf.eval(sx, sy, p_prime, alpha, beta);
                if fv > 0.0 {
                    i_val += kernel(ox, oy, sx, sy, alpha, beta) * fv * smass;
                }
            }
            out_q += i_val.powf(q) * omass;
        }
        best = best.max(out_q.powf(1.0 / q) / f_norm_p.powf(1.0 / p));
    }
    Ok(best)
}

/// `∫_I |x − u|^{α−1} du` over an interval, exact.
pub fn kernel_interval_integral(alpha: f64, x: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo <= hi);
    if x <= lo {
        ((hi - x).powf(alpha) - (lo - x).powf(alpha)) / alpha
    } else if x >= hi {
        ((x - lo).powf(alpha) - (x - hi).powf(alpha)) / alpha
    } else {
        ((x - lo).powf(alpha) + (hi - x).powf(alpha)) / alpha
    }
}
