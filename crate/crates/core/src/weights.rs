//! Symbolic weights and measures with rectangle integrals.
//!
//! Masses of rectangles under power-law densities are computed by closed
//! form wherever the rectangle is anchored at the origin (the
//! positive-orthant reduction), exactly for one-dimensional factors, and
//! by midpoint quadrature with an exact radial correction on the
//! singular cell otherwise. Divergent integrals are not errors: they
//! come back as a tagged infinity, since finiteness laws consume
//! divergence as information.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Unit-ball volumes for the dimensions the quadrature paths support.
fn unit_ball_volume(d: u32) -> f64 {
    use std::f64::consts::PI;
    match d {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        4 => PI * PI / 2.0,
        5 => 8.0 * PI * PI / 15.0,
        6 => PI * PI * PI / 6.0,
        _ => {
            // Γ-recursion v_d = v_{d-2} · 2π/d
            let mut v = if d % 2 == 0 { 1.0 } else { 2.0 };
            let mut k = if d % 2 == 0 { 2 } else { 3 };
            while k <= d {
                v *= 2.0 * PI / k as f64;
                k += 2;
            }
            v
        }
    }
}

/// A nonnegative mass which may be a tagged infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mass {
    pub value: f64,
    pub diverging: bool,
}

impl Mass {
    pub fn finite(value: f64) -> Mass {
        Mass { value, diverging: false }
    }

    pub fn diverging() -> Mass {
        Mass { value: f64::INFINITY, diverging: true }
    }

    pub fn powf(self, e: f64) -> f64 {
        if self.diverging {
            f64::INFINITY
        } else {
            self.value.powf(e)
        }
    }
}

/// A product rectangle `I × J`: axis-aligned cubes with centers `c_I ∈ R^m`,
/// `c_J ∈ R^n` and side lengths `s`, `t`. Membership uses half-open faces
/// `[c − side/2, c + side/2)` so lattice points are never double counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub center1: Vec<f64>,
    pub center2: Vec<f64>,
    pub s: f64,
    pub t: f64,
}

impl Rectangle {
    pub fn new(center1: Vec<f64>, center2: Vec<f64>, s: f64, t: f64) -> Self {
        assert!(s > 0.0 && t > 0.0, "rectangle sides must be positive");
        Rectangle { center1, center2, s, t }
    }

    /// Both factors centered at a single coordinate (m = n = 1 shorthand).
    pub fn square_1d(cx: f64, cy: f64, s: f64, t: f64) -> Self {
        Rectangle::new(vec![cx], vec![cy], s, t)
    }

    pub fn m(&self) -> u32 {
        self.center1.len() as u32
    }

    pub fn n(&self) -> u32 {
        self.center2.len() as u32
    }

    pub fn volume(&self) -> f64 {
        self.s.powi(self.m() as i32) * self.t.powi(self.n() as i32)
    }

    pub fn contains(&self, x: &[f64], y: &[f64]) -> bool {
        cube_contains(&self.center1, self.s, x) && cube_contains(&self.center2, self.t, y)
    }

    /// Dilate both factors about their centers.
    pub fn dilate(&self, lambda1: f64, lambda2: f64) -> Rectangle {
        Rectangle::new(self.center1.clone(), self.center2.clone(), self.s * lambda1, self.t * lambda2)
    }
}

fn cube_contains(center: &[f64], side: f64, x: &[f64]) -> bool {
    debug_assert_eq!(center.len(), x.len());
    let h = side / 2.0;
    center
        .iter()
        .zip(x)
        .all(|(c, xi)| *xi >= c - h && *xi < c + h)
}

/// Nonnegative samples on a 2D box, taken at cell midpoints (m = n = 1
/// grid pipeline). Values are stored row-major: `values[ix * ny + iy]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 || values.len() != nx * ny {
            return Err(Error::domain("grid resolution does not match value count"));
        }
        if !(x1 > x0 && y1 > y0) {
            return Err(Error::domain("grid box must have positive extent"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain("grid values must be finite and nonnegative"));
        }
        Ok(GridFunction { x0, x1, y0, y1, nx, ny, values })
    }

    pub fn zeros(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Self {
        GridFunction { x0, x1, y0, y1, nx, ny, values: vec![0.0; nx * ny] }
    }

    pub fn from_fn(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(nx * ny);
        for ix in 0..nx {
            let x = x0 + (ix as f64 + 0.5) * (x1 - x0) / nx as f64;
            for iy in 0..ny {
                let y = y0 + (iy as f64 + 0.5) * (y1 - y0) / ny as f64;
                values.push(f(x, y));
            }
        }
        GridFunction { x0, x1, y0, y1, nx, ny, values }
    }

    pub fn hx(&self) -> f64 {
        (self.x1 - self.x0) / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y1 - self.y0) / self.ny as f64
    }

    pub fn x_mid(&self, ix: usize) -> f64 {
        self.x0 + (ix as f64 + 0.5) * self.hx()
    }

    pub fn y_mid(&self, iy: usize) -> f64 {
        self.y0 + (iy as f64 + 0.5) * self.hy()
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix * self.ny + iy]
    }

    /// Midpoint-rule integral over the whole box.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.hx() * self.hy()
    }

    /// Value of the piecewise-constant extension at a point, 0 outside the box.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        if x < self.x0 || x >= self.x1 || y < self.y0 || y >= self.y1 {
            return 0.0;
        }
        let ix = (((x - self.x0) / self.hx()) as usize).min(self.nx - 1);
        let iy = (((y - self.y0) / self.hy()) as usize).min(self.ny - 1);
        self.get(ix, iy)
    }

    /// CSV layout: header `x0,x1,y0,y1,nx,ny`, then `nx` rows of `ny` values.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{},{},{},{},{},{}\n", self.x0, self.x1, self.y0, self.y1, self.nx, self.ny));
        for ix in 0..self.nx {
            let row: Vec<String> = (0..self.ny).map(|iy| format!("{}", self.get(ix, iy))).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty grid CSV".into()))?;
        let head: Vec<&str> = header.split(',').collect();
        if head.len() != 6 {
            return Err(Error::Parse(format!("grid CSV header needs 6 fields, got {}", head.len())));
        }
        let parse = |i: usize| -> Result<f64> {
            head[i]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad header field {:?} (line 1, column {})", head[i], i + 1)))
        };
        let (x0, x1, y0, y1) = (parse(0)?, parse(1)?, parse(2)?, parse(3)?);
        let nx: usize = head[4].trim().parse().map_err(|_| Error::Parse("bad nx".into()))?;
        let ny: usize = head[5].trim().parse().map_err(|_| Error::Parse("bad ny".into()))?;
        let mut values = Vec::with_capacity(nx * ny);
        for (row, line) in lines.enumerate() {
            for (col, tok) in line.split(',').enumerate() {
                let v: f64 = tok.trim().parse().map_err(|_| {
                    Error::Parse(format!("bad value {:?} (line {}, column {})", tok, row + 2, col + 1))
                })?;
                values.push(v);
            }
        }
        GridFunction::new(x0, x1, y0, y1, nx, ny, values)
    }
}

/// Symbolic weight on `R^m × R^n` (or on a single factor when used inside
/// `product`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    Constant { c: f64 },
    /// `|(x,y)|^e` on the full space, or `|x|^e` when used as a factor.
    RadialPower { exponent: f64 },
    /// `|x|^{e1} · |y|^{e2}`.
    ProductPower { e1: f64, e2: f64 },
    /// `(1 + |x|)^e` applied to the chosen factor variable (1 or 2).
    ShiftedPower { exponent: f64, factor: u8 },
    /// Pointwise product of a weight in the first and second variables.
    Product { left: Box<WeightSpec>, right: Box<WeightSpec> },
    Tabulated { grid: GridFunction },
}

impl WeightSpec {
    /// Pointwise value at `(x, y)`; returns `+∞` at non-integrable points
    /// of negative powers.
    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            WeightSpec::Constant { c } => *c,
            WeightSpec::RadialPower { exponent } => {
                let r2: f64 = x.iter().chain(y).map(|v| v * v).sum();
                power_or_inf(r2.sqrt(), *exponent)
            }
            WeightSpec::ProductPower { e1, e2 } => {
                let rx = norm(x);
                let ry = norm(y);
                power_or_inf(rx, *e1) * power_or_inf(ry, *e2)
            }
            WeightSpec::ShiftedPower { exponent, factor } => {
                let r = if *factor == 1 { norm(x) } else { norm(y) };
                (1.0 + r).powf(*exponent)
            }
            WeightSpec::Product { left, right } => left.eval_factor(x) * right.eval_factor(y),
            WeightSpec::Tabulated { grid } => {
                debug_assert!(x.len() == 1 && y.len() == 1);
                grid.eval(x[0], y[0])
            }
        }
    }

    /// Value as a weight on a single factor space.
    pub fn eval_factor(&self, x: &[f64]) -> f64 {
        match self {
            WeightSpec::Constant { c } => *c,
            WeightSpec::RadialPower { exponent } => power_or_inf(norm(x), *exponent),
            WeightSpec::ShiftedPower { exponent, .. } => (1.0 + norm(x)).powf(*exponent),
            WeightSpec::ProductPower { .. } | WeightSpec::Product { .. } | WeightSpec::Tabulated { .. } => {
                f64::NAN // not meaningful on a single factor; callers reject earlier
            }
        }
    }

    /// `w^power`, simplified symbolically.
    pub fn pow(&self, power: f64) -> WeightSpec {
        match self {
            WeightSpec::Constant { c } => WeightSpec::Constant { c: c.powf(power) },
            WeightSpec::RadialPower { exponent } => WeightSpec::RadialPower { exponent: exponent * power },
            WeightSpec::ProductPower { e1, e2 } => WeightSpec::ProductPower { e1: e1 * power, e2: e2 * power },
            WeightSpec::ShiftedPower { exponent, factor } => {
                WeightSpec::ShiftedPower { exponent: exponent * power, factor: *factor }
            }
            WeightSpec::Product { left, right } => WeightSpec::Product {
                left: Box::new(left.pow(power)),
                right: Box::new(right.pow(power)),
            },
            WeightSpec::Tabulated { grid } => {
                let mut g = grid.clone();
                for v in &mut g.values {
                    *v = v.powf(power);
                }
                WeightSpec::Tabulated { grid: g }
            }
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn power_or_inf(r: f64, e: f64) -> f64 {
    if r == 0.0 && e < 0.0 {
        f64::INFINITY
    } else if r == 0.0 && e == 0.0 {
        1.0
    } else {
        r.powf(e)
    }
}

/// Locally finite measure on `R^m × R^n` (or on a factor inside `product`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    /// Point masses; points are flat coordinate vectors of length `m + n`
    /// (length `m` or `n` when used as a factor measure).
    Atomic { atoms: Vec<(Vec<f64>, f64)> },
    /// `dμ = weight^power dxdy`.
    Density { weight: WeightSpec, power: f64 },
    /// Product of factor measures.
    Product { mu1: Box<MeasureSpec>, mu2: Box<MeasureSpec> },
    /// Unit mass at the origin.
    DiracOrigin,
}

impl MeasureSpec {
    pub fn lebesgue() -> MeasureSpec {
        MeasureSpec::Density { weight: WeightSpec::Constant { c: 1.0 }, power: 1.0 }
    }

    pub fn atomic(atoms: Vec<(Vec<f64>, f64)>) -> Result<MeasureSpec> {
        for (pt, mass) in &atoms {
            if !(mass.is_finite() && *mass > 0.0) {
                return Err(Error::domain("atomic masses must be strictly positive"));
            }
            if pt.iter().any(|c| !c.is_finite()) {
                return Err(Error::domain("atom coordinates must be finite"));
            }
        }
        Ok(MeasureSpec::Atomic { atoms })
    }

    /// Density with the power folded into the weight.
    fn effective_weight(&self) -> Option<WeightSpec> {
        match self {
            MeasureSpec::Density { weight, power } => Some(weight.pow(*power)),
            _ => None,
        }
    }
}

/// Controls for the midpoint quadrature fallback.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Base cells per axis for boxes of total dimension ≤ 2; higher
    /// dimensions divide a fixed cell budget across the axes.
    pub cells_per_axis: usize,
    /// Stop refining once the relative change between successive
    /// refinements falls below this.
    pub rel_tol: f64,
    /// Hard cap on the number of cells in one pass.
    pub max_cells: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { cells_per_axis: 256, rel_tol: 1e-4, max_cells: 1 << 22 }
    }
}

impl QuadratureConfig {
    fn base_per_axis(&self, dim: u32) -> usize {
        if dim <= 2 {
            self.cells_per_axis
        } else {
            let budget = (self.cells_per_axis * self.cells_per_axis) as f64;
            (budget.powf(1.0 / dim as f64).round() as usize).clamp(4, self.cells_per_axis)
        }
    }
}

/// Comparison value of the local integral
/// `I_{(0,0);(s,t)}(η) ≍ ∬_{[0,s]^m × [0,t]^n} (Σx_i + Σy_j)^η`.
///
/// For `s ≤ t` this is `s^{m − (n+η)₋} t^{(n+η)₊}`, with the endpoint
/// convention that an exactly vanishing exponent pair contributes
/// `1 + ln(t/s)` (the exact evaluation of the log case, which for
/// `m = n = 1` is asymptotically tight); symmetrically for `t ≤ s`.
/// Diverges when `m + n + η ≤ 0`.
pub fn sans_serif_local_integral(m: u32, n: u32, s: f64, t: f64, eta: f64) -> Result<Mass> {
    if !(s > 0.0 && t > 0.0) {
        return Err(Error::domain("sides must be positive"));
    }
    let md = m as f64;
    let nd = n as f64;
    if md + nd + eta <= 0.0 {
        return Ok(Mass::diverging());
    }
    const LOG_EPS: f64 = 1e-12;
    let value = if s <= t {
        let c = nd + eta;
        if c.abs() <= LOG_EPS {
            s.powf(md) * (1.0 + (t / s).ln())
        } else {
            s.powf(md - (-c).max(0.0)) * t.powf(c.max(0.0))
        }
    } else {
        let c = md + eta;
        if c.abs() <= LOG_EPS {
            t.powf(nd) * (1.0 + (s / t).ln())
        } else {
            s.powf(c.max(0.0)) * t.powf(nd - (-c).max(0.0))
        }
    };
    Ok(Mass::finite(value))
}

/// `∫_{|z| < r} |z|^e dz` in `R^d`, diverging when `d + e ≤ 0`.
pub fn radial_ball_integral(e: f64, d: u32, r: f64) -> Mass {
    let dd = d as f64;
    if dd + e <= 0.0 {
        return Mass::diverging();
    }
    Mass::finite(dd * unit_ball_volume(d) * r.powf(dd + e) / (dd + e))
}

/// Exact `∫_a^b |x|^e dx`, splitting at 0 when needed.
fn power_interval_integral(e: f64, a: f64, b: f64) -> Mass {
    debug_assert!(a <= b);
    fn one_side(e: f64, hi: f64) -> Mass {
        // ∫_0^hi x^e dx
        if hi <= 0.0 {
            return Mass::finite(0.0);
        }
        if e <= -1.0 {
            return Mass::diverging();
        }
        Mass::finite(hi.powf(e + 1.0) / (e + 1.0))
    }
    if a >= 0.0 {
        if a == 0.0 {
            return one_side(e, b);
        }
        if (e + 1.0).abs() <= 1e-14 {
            return Mass::finite((b / a).ln());
        }
        return Mass::finite((b.powf(e + 1.0) - a.powf(e + 1.0)) / (e + 1.0));
    }
    if b <= 0.0 {
        return power_interval_integral(e, -b, -a);
    }
    let left = power_interval_integral(e, 0.0, -a);
    let right = one_side(e, b);
    if left.diverging || right.diverging {
        Mass::diverging()
    } else {
        Mass::finite(left.value + right.value)
    }
}

/// Exact `∫_a^b (1 + |x|)^e dx`.
fn shifted_interval_integral(e: f64, a: f64, b: f64) -> f64 {
    debug_assert!(a <= b);
    fn anti(e: f64, x: f64) -> f64 {
        // ∫_0^x (1+u)^e du for x ≥ 0
        if (e + 1.0).abs() <= 1e-14 {
            (1.0 + x).ln()
        } else {
            ((1.0 + x).powf(e + 1.0) - 1.0) / (e + 1.0)
        }
    }
    if a >= 0.0 {
        anti(e, b) - anti(e, a)
    } else if b <= 0.0 {
        anti(e, -a) - anti(e, -b)
    } else {
        anti(e, -a) + anti(e, b)
    }
}

fn cube_touches_origin(center: &[f64], side: f64) -> bool {
    let h = side / 2.0;
    center.iter().all(|c| c.abs() <= h + 1e-12 * side)
}

/// Exact `∫_box (z_1 + … + z_d)^e dz` over a box with nonnegative corners,
/// by inclusion–exclusion over the iterated antiderivative
/// `(Σz)^{e+d} / ∏_{k=1}^d (e+k)`. Returns `None` on the log cases
/// (`e + k = 0` for some `k ≤ d`).
///
/// This is the positive-orthant comparison form of the radial power
/// `|z|^e`: the two agree up to a constant depending only on `d` and `e`.
fn l1_power_box_integral(e: f64, lo: &[f64], hi: &[f64]) -> Option<f64> {
    let d = lo.len();
    let mut denom = 1.0;
    for k in 1..=d {
        let f = e + k as f64;
        if f.abs() < 1e-9 {
            return None;
        }
        denom *= f;
    }
    let s_lo: f64 = lo.iter().sum();
    let s_hi: f64 = hi.iter().sum();
    // Far-field guard: inclusion–exclusion of nearly equal corner values
    // cancels catastrophically; the integrand is then nearly constant.
    if s_lo > 0.0 && (s_hi - s_lo) / s_lo < 1e-5 {
        let vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
        return Some((0.5 * (s_lo + s_hi)).powf(e) * vol);
    }
    let mut total = 0.0;
    for mask in 0..(1usize << d) {
        let bits = (mask as u32).count_ones() as usize;
        let sign = if (d - bits) % 2 == 0 { 1.0 } else { -1.0 };
        let mut sum = 0.0;
        for (i, (a, b)) in lo.iter().zip(hi).enumerate() {
            sum += if mask >> i & 1 == 1 { *b } else { *a };
        }
        if sum > 0.0 {
            total += sign * sum.powf(e + d as f64);
        }
    }
    Some(total / denom)
}

/// Log-endpoint cases of [`l1_power_box_integral`] in two variables.
fn l1_log_box_integral_2d(e: f64, lo: &[f64], hi: &[f64]) -> f64 {
    let anti: fn(f64) -> f64 = if (e + 1.0).abs() < 1e-9 {
        |v| if v == 0.0 { 0.0 } else { v * v.ln() - v }
    } else {
        // e = −2: corners must stay off the origin (checked by callers)
        |v| -v.ln()
    };
    let mut total = 0.0;
    for mask in 0..4usize {
        let bits = (mask as u32).count_ones() as usize;
        let sign = if bits % 2 == 0 { 1.0 } else { -1.0 };
        let x = if mask & 1 == 1 { hi[0] } else { lo[0] };
        let y = if mask & 2 == 2 { hi[1] } else { lo[1] };
        total += sign * anti(x + y);
    }
    total
}

/// `∫_box |z|^e dz` in the ℓ¹ comparison form, for an arbitrary box in
/// `R^d`: split every axis at 0, reflect each piece into the nonnegative
/// orthant, and evaluate the exact closed form piecewise. Exactly
/// homogeneous under dilation about the origin.
fn radial_power_box_mass(e: f64, lo: &[f64], hi: &[f64], quad: &QuadratureConfig) -> Mass {
    let d = lo.len();
    if lo.iter().zip(hi).all(|(a, b)| *a <= 0.0 && *b >= 0.0) && d as f64 + e <= 0.0 {
        return Mass::diverging();
    }
    // Enumerate sign pieces per axis: (lo,0] and [0,hi) where applicable.
    let mut pieces: Vec<(Vec<f64>, Vec<f64>)> = vec![(vec![], vec![])];
    for i in 0..d {
        let mut next = Vec::with_capacity(pieces.len() * 2);
        let mut spans: Vec<(f64, f64)> = Vec::with_capacity(2);
        if lo[i] < 0.0 {
            // reflected: |z| spans [max(0,-hi), -lo]
            spans.push(((-hi[i]).max(0.0), -lo[i]));
        }
        if hi[i] > 0.0 {
            spans.push((lo[i].max(0.0), hi[i]));
        }
        for (a, b) in spans {
            if b <= a {
                continue;
            }
            for (plo, phi) in &pieces {
                let mut nlo = plo.clone();
                let mut nhi = phi.clone();
                nlo.push(a);
                nhi.push(b);
                next.push((nlo, nhi));
            }
        }
        pieces = next;
    }
    let mut total = 0.0;
    for (plo, phi) in &pieces {
        match l1_power_box_integral(e, plo, phi) {
            Some(v) => total += v,
            None => {
                if d == 2 {
                    total += l1_log_box_integral_2d(e, plo, phi);
                } else {
                    // rare log endpoint in d ≠ 2: midpoint fallback
                    total += quad_box(&|z| power_or_inf(z.iter().sum::<f64>(), e), plo, phi, None, quad);
                }
            }
        }
    }
    Mass::finite(total)
}

/// Midpoint quadrature of `f` over a box, with an optional exact radial
/// correction on the cell containing the origin. Refines by doubling the
/// per-axis counts until the relative change drops below tolerance.
fn quad_box(
    f: &dyn Fn(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    singular_exponent: Option<f64>,
    quad: &QuadratureConfig,
) -> f64 {
    let d = lo.len() as u32;
    let mut n = quad.base_per_axis(d);
    let mut prev: Option<f64> = None;
    loop {
        let total = (n as f64).powi(d as i32);
        if total > quad.max_cells as f64 {
            return prev.unwrap_or_else(|| quad_box_once(f, lo, hi, singular_exponent, quad.base_per_axis(d)));
        }
        let cur = quad_box_once(f, lo, hi, singular_exponent, n);
        if let Some(p) = prev {
            if (cur - p).abs() <= quad.rel_tol * cur.abs().max(1e-300) {
                return cur;
            }
        }
        prev = Some(cur);
        n *= 2;
    }
}

fn quad_box_once(f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], singular_exponent: Option<f64>, n: usize) -> f64 {
    let d = lo.len();
    let h: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| (b - a) / n as f64).collect();
    let cell_vol: f64 = h.iter().product();
    // Index of the cell containing the origin, if inside the box.
    let origin_cell: Option<Vec<usize>> = if singular_exponent.is_some()
        && lo.iter().zip(hi).all(|(a, b)| *a <= 0.0 && 0.0 <= *b)
    {
        Some(
            lo.iter()
                .zip(&h)
                .map(|(a, hk)| (((0.0 - a) / hk) as usize).min(n - 1))
                .collect(),
        )
    } else {
        None
    };

    let mut idx = vec![0usize; d];
    let mut point = vec![0.0f64; d];
    let mut sum = 0.0;
    loop {
        for k in 0..d {
            point[k] = lo[k] + (idx[k] as f64 + 0.5) * h[k];
        }
        let is_origin_cell = origin_cell.as_deref() == Some(idx.as_slice());
        if is_origin_cell {
            // Exact radial closed form on the singular cell, via the
            // volume-matched ball.
            let e = singular_exponent.unwrap();
            let r = (cell_vol / unit_ball_volume(d as u32)).powf(1.0 / d as f64);
            let ball = radial_ball_integral(e, d as u32, r);
            sum += if ball.diverging { f64::INFINITY } else { ball.value };
        } else {
            sum += f(&point) * cell_vol;
        }
        // advance mixed-radix counter
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == d {
                return sum;
            }
        }
    }
}

/// `∫_cube |x|^e dx` over the cube of the given center and side in `R^d`:
/// exact for `d = 1`, the ℓ¹ comparison closed form for `d ≥ 2`.
pub fn power_cube_integral(e: f64, d: u32, center: &[f64], side: f64, quad: &QuadratureConfig) -> Mass {
    debug_assert_eq!(center.len(), d as usize);
    let dd = d as f64;
    if cube_touches_origin(center, side) && dd + e <= 0.0 {
        return Mass::diverging();
    }
    if d == 1 {
        let (a, b) = (center[0] - side / 2.0, center[0] + side / 2.0);
        return power_interval_integral(e, a, b);
    }
    let lo: Vec<f64> = center.iter().map(|c| c - side / 2.0).collect();
    let hi: Vec<f64> = center.iter().map(|c| c + side / 2.0).collect();
    radial_power_box_mass(e, &lo, &hi, quad)
}

/// `∫_cube (1 + |x|)^e dx` in `R^d`.
pub fn shifted_cube_integral(e: f64, d: u32, center: &[f64], side: f64, quad: &QuadratureConfig) -> Mass {
    if d == 1 {
        let (a, b) = (center[0] - side / 2.0, center[0] + side / 2.0);
        return Mass::finite(shifted_interval_integral(e, a, b));
    }
    let lo: Vec<f64> = center.iter().map(|c| c - side / 2.0).collect();
    let hi: Vec<f64> = center.iter().map(|c| c + side / 2.0).collect();
    Mass::finite(quad_box(&|x| (1.0 + norm(x)).powf(e), &lo, &hi, None, quad))
}

/// Mass of a factor cube under a measure living on a single factor space.
pub fn factor_mass(mu: &MeasureSpec, center: &[f64], side: f64, dim: u32, quad: &QuadratureConfig) -> Result<Mass> {
    match mu {
        MeasureSpec::Atomic { atoms } => {
            let mut total = 0.0;
            for (pt, mass) in atoms {
                if pt.len() != dim as usize {
                    return Err(Error::Dimension { expected: dim as usize, got: pt.len() });
                }
                if cube_contains(center, side, pt) {
                    total += mass;
                }
            }
            Ok(Mass::finite(total))
        }
        MeasureSpec::DiracOrigin => {
            let origin = vec![0.0; dim as usize];
            Ok(Mass::finite(if cube_contains(center, side, &origin) { 1.0 } else { 0.0 }))
        }
        MeasureSpec::Density { .. } => {
            let w = mu.effective_weight().unwrap();
            factor_density_mass(&w, center, side, dim, quad)
        }
        MeasureSpec::Product { .. } => Err(Error::Unsupported(
            "product measure nested inside a factor".into(),
        )),
    }
}

fn factor_density_mass(w: &WeightSpec, center: &[f64], side: f64, dim: u32, quad: &QuadratureConfig) -> Result<Mass> {
    match w {
        WeightSpec::Constant { c } => Ok(Mass::finite(c * side.powi(dim as i32))),
        WeightSpec::RadialPower { exponent } => Ok(power_cube_integral(*exponent, dim, center, side, quad)),
        WeightSpec::ShiftedPower { exponent, .. } => Ok(shifted_cube_integral(*exponent, dim, center, side, quad)),
        _ => Err(Error::Unsupported("factor density must be constant, power or shifted power".into())),
    }
}

/// Mass `μ(I × J)` of a rectangle. Atomic masses are exact; power-law
/// densities use origin-anchored closed forms where possible and midpoint
/// quadrature with a singular-cell correction otherwise.
pub fn rectangle_mass(mu: &MeasureSpec, rect: &Rectangle, quad: &QuadratureConfig) -> Result<Mass> {
    let (m, n) = (rect.m(), rect.n());
    match mu {
        MeasureSpec::Atomic { atoms } => {
            let mut total = 0.0;
            for (pt, mass) in atoms {
                if pt.len() != (m + n) as usize {
                    return Err(Error::Dimension { expected: (m + n) as usize, got: pt.len() });
                }
                let (x, y) = pt.split_at(m as usize);
                if rect.contains(x, y) {
                    total += mass;
                }
            }
            Ok(Mass::finite(total))
        }
        MeasureSpec::DiracOrigin => {
            let zx = vec![0.0; m as usize];
            let zy = vec![0.0; n as usize];
            Ok(Mass::finite(if rect.contains(&zx, &zy) { 1.0 } else { 0.0 }))
        }
        MeasureSpec::Product { mu1, mu2 } => {
            let a = factor_mass(mu1, &rect.center1, rect.s, m, quad)?;
            let b = factor_mass(mu2, &rect.center2, rect.t, n, quad)?;
            if a.diverging || b.diverging {
                Ok(Mass::diverging())
            } else {
                Ok(Mass::finite(a.value * b.value))
            }
        }
        MeasureSpec::Density { .. } => {
            let w = mu.effective_weight().unwrap();
            density_rectangle_mass(&w, rect, quad)
        }
    }
}

fn density_rectangle_mass(w: &WeightSpec, rect: &Rectangle, quad: &QuadratureConfig) -> Result<Mass> {
    let (m, n) = (rect.m(), rect.n());
    match w {
        WeightSpec::Constant { c } => Ok(Mass::finite(c * rect.volume())),
        WeightSpec::ProductPower { e1, e2 } => {
            let a = power_cube_integral(*e1, m, &rect.center1, rect.s, quad);
            let b = power_cube_integral(*e2, n, &rect.center2, rect.t, quad);
            if a.diverging || b.diverging {
                Ok(Mass::diverging())
            } else {
                Ok(Mass::finite(a.value * b.value))
            }
        }
        WeightSpec::ShiftedPower { exponent, factor } => {
            let (sh, other) = if *factor == 1 {
                (shifted_cube_integral(*exponent, m, &rect.center1, rect.s, quad), rect.t.powi(n as i32))
            } else {
                (shifted_cube_integral(*exponent, n, &rect.center2, rect.t, quad), rect.s.powi(m as i32))
            };
            if sh.diverging {
                Ok(Mass::diverging())
            } else {
                Ok(Mass::finite(sh.value * other))
            }
        }
        WeightSpec::Product { left, right } => {
            let a = factor_density_mass(left, &rect.center1, rect.s, m, quad)?;
            let b = factor_density_mass(right, &rect.center2, rect.t, n, quad)?;
            if a.diverging || b.diverging {
                Ok(Mass::diverging())
            } else {
                Ok(Mass::finite(a.value * b.value))
            }
        }
        WeightSpec::RadialPower { exponent } => Ok(radial_rectangle_mass(*exponent, rect, quad)),
        WeightSpec::Tabulated { grid } => {
            if m != 1 || n != 1 {
                return Err(Error::Unsupported("tabulated weights are m = n = 1 only".into()));
            }
            let mut total = 0.0;
            for ix in 0..grid.nx {
                let x = [grid.x_mid(ix)];
                for iy in 0..grid.ny {
                    let y = [grid.y_mid(iy)];
                    if rect.contains(&x, &y) {
                        total += grid.get(ix, iy);
                    }
                }
            }
            Ok(Mass::finite(total * grid.hx() * grid.hy()))
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Anchor {
    Centered,
    Cornered,
    Other,
}

fn anchor_type(center: &[f64], side: f64) -> Anchor {
    let tol = 1e-12 * side;
    if center.iter().all(|c| c.abs() <= tol) {
        Anchor::Centered
    } else if center.iter().all(|c| (c.abs() - side / 2.0).abs() <= tol) {
        Anchor::Cornered
    } else {
        Anchor::Other
    }
}

fn radial_rectangle_mass(e: f64, rect: &Rectangle, quad: &QuadratureConfig) -> Mass {
    let (m, n) = (rect.m(), rect.n());
    let touches = cube_touches_origin(&rect.center1, rect.s) && cube_touches_origin(&rect.center2, rect.t);
    if touches && (m + n) as f64 + e <= 0.0 {
        return Mass::diverging();
    }
    // Origin-anchored rectangles take the sans-serif monomial form: exact
    // power laws in (s, t), so dyadic rays see exact slopes.
    let a1 = anchor_type(&rect.center1, rect.s);
    let a2 = anchor_type(&rect.center2, rect.t);
    if a1 != Anchor::Other && a2 != Anchor::Other {
        let (s_eff, folds1) = if a1 == Anchor::Centered { (rect.s / 2.0, m) } else { (rect.s, 0) };
        let (t_eff, folds2) = if a2 == Anchor::Centered { (rect.t / 2.0, n) } else { (rect.t, 0) };
        let base = sans_serif_local_integral(m, n, s_eff, t_eff, e).expect("positive sides");
        if base.diverging {
            return base;
        }
        return Mass::finite(base.value * 2f64.powi((folds1 + folds2) as i32));
    }
    let mut lo: Vec<f64> = rect.center1.iter().map(|c| c - rect.s / 2.0).collect();
    let mut hi: Vec<f64> = rect.center1.iter().map(|c| c + rect.s / 2.0).collect();
    lo.extend(rect.center2.iter().map(|c| c - rect.t / 2.0));
    hi.extend(rect.center2.iter().map(|c| c + rect.t / 2.0));
    radial_power_box_mass(e, &lo, &hi, quad)
}

/// Outcome of a product `A₁ × A₁` membership query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Membership {
    Member { bound: Option<f64> },
    NotMember,
    Unknown,
}

impl Membership {
    pub fn is_member(&self) -> bool {
        matches!(self, Membership::Member { .. })
    }
}

/// Whether a weight on a single factor `R^d` lies in `A₁(R^d)`, for the
/// decidable power / shifted-power / constant cases.
fn a1_factor(w: &WeightSpec, d: u32) -> Membership {
    let dd = d as f64;
    match w {
        WeightSpec::Constant { c } if *c > 0.0 => Membership::Member { bound: Some(1.0) },
        WeightSpec::RadialPower { exponent } => {
            if -dd < *exponent && *exponent <= 0.0 {
                // Centered-cube average over inf, via the matched-ball mass;
                // an estimate of the A₁ constant, exact at exponent 0.
                let e = *exponent;
                let bound = dd / (dd + e) * unit_ball_volume(d).powf(-e / dd) * 2f64.powf(e) * dd.powf(-e / 2.0);
                Membership::Member { bound: Some(bound) }
            } else {
                Membership::NotMember
            }
        }
        WeightSpec::ShiftedPower { exponent, .. } => {
            if -dd < *exponent && *exponent <= 0.0 {
                Membership::Member { bound: None }
            } else {
                Membership::NotMember
            }
        }
        _ => Membership::Unknown,
    }
}

/// Product `A₁ × A₁` membership of a weight on `R^m × R^n`, decidable for
/// products of 1-parameter power / shifted-power weights.
pub fn a1_product_membership(w: &WeightSpec, m: u32, n: u32) -> Membership {
    match w {
        WeightSpec::Constant { c } if *c > 0.0 => Membership::Member { bound: Some(1.0) },
        WeightSpec::Product { left, right } => {
            let a = a1_factor(left, m);
            let b = a1_factor(right, n);
            match (a, b) {
                (Membership::NotMember, _) | (_, Membership::NotMember) => Membership::NotMember,
                (Membership::Member { bound: ba }, Membership::Member { bound: bb }) => Membership::Member {
                    bound: match (ba, bb) {
                        (Some(x), Some(y)) => Some(x * y),
                        _ => None,
                    },
                },
                _ => Membership::Unknown,
            }
        }
        WeightSpec::ProductPower { e1, e2 } => {
            let a = a1_factor(&WeightSpec::RadialPower { exponent: *e1 }, m);
            let b = a1_factor(&WeightSpec::RadialPower { exponent: *e2 }, n);
            match (a, b) {
                (Membership::NotMember, _) | (_, Membership::NotMember) => Membership::NotMember,
                (Membership::Member { bound: ba }, Membership::Member { bound: bb }) => Membership::Member {
                    bound: ba.zip(bb).map(|(x, y)| x * y),
                },
                _ => Membership::Unknown,
            }
        }
        WeightSpec::ShiftedPower { exponent, factor } => {
            let d = if *factor == 1 { m } else { n };
            // Constant in the other factor, which is trivially A₁ there.
            a1_factor(&WeightSpec::ShiftedPower { exponent: *exponent, factor: *factor }, d)
        }
        _ => Membership::Unknown,
    }
}
