//! Rectangle-lattice suprema for the plain, one-tailed and two-tailed
//! Muckenhoupt characteristics, dyadic-shell discretization of the tails,
//! the Dirac-source norm, reverse-doubling exponent estimation, and the
//! testing (T1) condition check.
//!
//! Every reported supremum is a lower bound of the true supremum (the
//! lattice is finite); divergence is diagnosed by the growth trend of
//! per-shell maxima, never by a magnitude threshold alone.

use crate::error::{Error, Result};
use crate::indices::ProductIndices;
use crate::laws::{classify, Regime};
use crate::operators::kernel_interval_integral;
use crate::weights::{factor_mass, rectangle_mass, Mass, MeasureSpec, QuadratureConfig, Rectangle, WeightSpec};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Slope (nats per dyadic generation) above which a trend is called
/// divergent. An exponent margin of 0.05 produces slope 0.05·ln2 ≈ 0.035.
pub const DIVERGENCE_SLOPE: f64 = 0.02;

/// Default shell cutoff for tailed characteristics.
pub const DEFAULT_SHELL_CUTOFF: usize = 40;

/// One cube placement of a factor lattice: dyadic scale `2^k` with a center.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorPlacement {
    pub k: i32,
    pub center: Vec<f64>,
    pub side: f64,
}

/// A finite, deterministic family of rectangles: the cross product of two
/// factor placement lists. Contains origin-centered (and optionally
/// origin-cornered and randomly shifted) cubes at every scale pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RectangleLattice {
    pub factor1: Vec<FactorPlacement>,
    pub factor2: Vec<FactorPlacement>,
}

/// Parameters controlling lattice construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub k_min: i32,
    pub k_max: i32,
    pub random_shifts: usize,
    pub seed: u64,
    pub include_cornered: bool,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig { k_min: -12, k_max: 12, random_shifts: 8, seed: 0xA1B2, include_cornered: true }
    }
}

fn factor_placements(cfg: &LatticeConfig, dim: u32, rng: &mut ChaCha8Rng) -> Vec<FactorPlacement> {
    let mut out = Vec::new();
    for k in cfg.k_min..=cfg.k_max {
        let side = 2f64.powi(k);
        out.push(FactorPlacement { k, center: vec![0.0; dim as usize], side });
        if cfg.include_cornered {
            out.push(FactorPlacement { k, center: vec![side / 2.0; dim as usize], side });
        }
        for _ in 0..cfg.random_shifts {
            let center = (0..dim).map(|_| rng.gen_range(-4.0 * side..4.0 * side)).collect();
            out.push(FactorPlacement { k, center, side });
        }
    }
    out
}

impl RectangleLattice {
    pub fn build(cfg: &LatticeConfig, m: u32, n: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let factor1 = factor_placements(cfg, m, &mut rng);
        let factor2 = factor_placements(cfg, n, &mut rng);
        RectangleLattice { factor1, factor2 }
    }

    /// Scale-only lattice (centered + cornered placements, no shifts):
    /// sufficient for origin-anchored extremizers such as power weights.
    pub fn scales_only(k_min: i32, k_max: i32, m: u32, n: u32) -> Self {
        let cfg = LatticeConfig { k_min, k_max, random_shifts: 0, seed: 0, include_cornered: true };
        RectangleLattice::build(&cfg, m, n)
    }

    pub fn len(&self) -> usize {
        self.factor1.len() * self.factor2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factor1.is_empty() || self.factor2.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharacteristicKind {
    Plain,
    OneTailed,
    TwoTailed,
}

/// Result of a lattice supremum: the max local value (a lower bound for
/// the true sup), the maximizing rectangle, and the fitted growth trend
/// of per-shell maxima along the maximizing ray.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharacteristicReport {
    pub kind: CharacteristicKind,
    pub sup_value: f64,
    pub argmax: Option<Rectangle>,
    /// Least-squares slope of log(value) per dyadic generation along the
    /// per-shell maxima at the largest scales.
    pub growth_trend: f64,
    pub diverging: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shell_cutoff: Option<usize>,
    /// Geometric-tail bound on the truncation error of the shell sum at
    /// the maximizing rectangle, when computable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_certificate: Option<f64>,
    /// Set when the last shell at the maximizing rectangle contributes
    /// more than 1e-6 of the sum (shell cutoff too small).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncation_warning: bool,
}

/// `s^{α−m} t^{β−n} ω(I×J)^{1/q} σ(I×J)^{1/p′}` for one rectangle.
pub fn local_characteristic(
    sigma: &MeasureSpec,
    omega: &MeasureSpec,
    rect: &Rectangle,
    idx: &ProductIndices,
    quad: &QuadratureConfig,
) -> Result<Mass> {
    let wm = rectangle_mass(omega, rect, quad)?;
    let sm = rectangle_mass(sigma, rect, quad)?;
    if wm.diverging || sm.diverging {
        return Ok(Mass::diverging());
    }
    let m = idx.m as f64;
    let n = idx.n as f64;
    let v = rect.s.powf(idx.alpha.value() - m)
        * rect.t.powf(idx.beta.value() - n)
        * wm.value.powf(1.0 / idx.q.value())
        * sm.value.powf(1.0 - 1.0 / idx.p.value());
    Ok(Mass::finite(v))
}

/// Geometric suffix sums `S[k0] = Σ_{k=k0}^{K} ρ^k`.
fn suffix_sums(rho: f64, cutoff: usize) -> Vec<f64> {
    let mut s = vec![0.0; cutoff + 2];
    let mut acc = 0.0;
    for k in (0..=cutoff).rev() {
        acc += rho.powi(k as i32);
        s[k] = acc;
    }
    s
}

/// Minimal dilation index `k ∈ 0..=K` such that the atom lies in the cube
/// dilated by `2^k` about its center, if any.
fn min_dilation(center: &[f64], side: f64, pt: &[f64], cutoff: usize) -> Option<usize> {
    for k in 0..=cutoff {
        let h = 2f64.powi(k as i32) * side / 2.0;
        if center.iter().zip(pt).all(|(c, x)| *x >= c - h && *x < c + h) {
            return Some(k);
        }
    }
    None
}

fn atoms_of(mu: &MeasureSpec) -> Option<Vec<(Vec<f64>, f64)>> {
    match mu {
        MeasureSpec::Atomic { atoms } => Some(atoms.clone()),
        MeasureSpec::DiracOrigin => None, // length depends on ambient dims; handled by caller
        _ => None,
    }
}

/// Dyadic-shell replacement of `∬ ŝ_{I×J}^r dμ`, namely
/// `Σ_{k,j ≤ K} 2^{k(α−m)r + j(β−n)r} μ(2^k I × 2^j J)`,
/// together with the fraction contributed by the outermost shell and a
/// geometric certificate for the truncated tail.
pub fn shell_sum(
    mu: &MeasureSpec,
    rect: &Rectangle,
    r_exp: f64,
    idx: &ProductIndices,
    cutoff: usize,
    quad: &QuadratureConfig,
) -> Result<(Mass, f64, Option<f64>)> {
    let am = idx.alpha.value() - idx.m as f64;
    let bn = idx.beta.value() - idx.n as f64;
    let rho1 = 2f64.powf(am * r_exp);
    let rho2 = 2f64.powf(bn * r_exp);

    // Exact factorized fast path over atoms.
    let atomic = match mu {
        MeasureSpec::Atomic { .. } => atoms_of(mu),
        MeasureSpec::DiracOrigin => {
            let d = (idx.m + idx.n) as usize;
            Some(vec![(vec![0.0; d], 1.0)])
        }
        _ => None,
    };
    if let Some(atoms) = atomic {
        let s1 = suffix_sums(rho1, cutoff);
        let s2 = suffix_sums(rho2, cutoff);
        let m = idx.m as usize;
        let eval = |cut: usize| -> f64 {
            let mut total = 0.0;
            for (pt, mass) in &atoms {
                let ka = min_dilation(&rect.center1, rect.s, &pt[..m], cut);
                let ja = min_dilation(&rect.center2, rect.t, &pt[m..], cut);
                if let (Some(ka), Some(ja)) = (ka, ja) {
                    // Σ_{k≥ka, j≥ja, k,j≤cut} ρ1^k ρ2^j, using cutoff-K
                    // suffixes adjusted to `cut`.
                    let part1 = s1[ka] - s1[cut + 1];
                    let part2 = s2[ja] - s2[cut + 1];
                    total += mass * part1 * part2;
                }
            }
            total
        };
        let full = eval(cutoff);
        let prev = if cutoff >= 1 { eval(cutoff - 1) } else { 0.0 };
        let prev2 = if cutoff >= 2 { eval(cutoff - 2) } else { 0.0 };
        let last_shell = full - prev;
        let prev_shell = prev - prev2;
        let frac = if full > 0.0 { last_shell / full } else { 0.0 };
        let cert = if prev_shell > 0.0 && last_shell < prev_shell {
            let r = last_shell / prev_shell;
            Some(last_shell * r / (1.0 - r))
        } else {
            None
        };
        return Ok((Mass::finite(full), frac, cert));
    }

    // Generic path: (K+1)^2 rectangle masses.
    let mut total = 0.0;
    let mut last_shell = 0.0;
    let mut prev_shell = 0.0;
    for k in 0..=cutoff {
        for j in 0..=cutoff {
            let dilated = rect.dilate(2f64.powi(k as i32), 2f64.powi(j as i32));
            let mass = rectangle_mass(mu, &dilated, quad)?;
            if mass.diverging {
                return Ok((Mass::diverging(), 0.0, None));
            }
            let term = rho1.powi(k as i32) * rho2.powi(j as i32) * mass.value;
            total += term;
            if k == cutoff || j == cutoff {
                last_shell += term;
            } else if k + 1 == cutoff || j + 1 == cutoff {
                prev_shell += term;
            }
        }
    }
    let frac = if total > 0.0 { last_shell / total } else { 0.0 };
    let cert = if prev_shell > 0.0 && last_shell < prev_shell {
        let r = last_shell / prev_shell;
        Some(last_shell * r / (1.0 - r))
    } else {
        None
    };
    Ok((Mass::finite(total), frac, cert))
}

struct LocalEval {
    value: f64,
    diverging: bool,
    last_shell_frac: f64,
    tail_certificate: Option<f64>,
}

fn tailed_local(
    sigma: &MeasureSpec,
    omega: &MeasureSpec,
    rect: &Rectangle,
    idx: &ProductIndices,
    kind: CharacteristicKind,
    cutoff: usize,
    quad: &QuadratureConfig,
) -> Result<LocalEval> {
    let m = idx.m as f64;
    let n = idx.n as f64;
    let q = idx.q.value();
    let pp = idx.p_prime().value();
    let geo = rect.s.powf(idx.alpha.value() - m) * rect.t.powf(idx.beta.value() - n);

    let plain = |mu: &MeasureSpec| rectangle_mass(mu, rect, quad);
    let combine = |wm: Mass, sm: Mass| -> Mass {
        if wm.diverging || sm.diverging {
            Mass::diverging()
        } else {
            Mass::finite(geo * wm.value.powf(1.0 / q) * sm.value.powf(1.0 / pp))
        }
    };

    match kind {
        CharacteristicKind::Plain => {
            let v = combine(plain(omega)?, plain(sigma)?);
            Ok(LocalEval { value: v.value, diverging: v.diverging, last_shell_frac: 0.0, tail_certificate: None })
        }
        CharacteristicKind::TwoTailed => {
            let (wh, f1, c1) = shell_sum(omega, rect, q, idx, cutoff, quad)?;
            let (sh, f2, c2) = shell_sum(sigma, rect, pp, idx, cutoff, quad)?;
            let v = combine(wh, sh);
            Ok(LocalEval {
                value: v.value,
                diverging: v.diverging,
                last_shell_frac: f1.max(f2),
                tail_certificate: c1.zip(c2).map(|(a, b)| a.max(b)),
            })
        }
        CharacteristicKind::OneTailed => {
            // Tail on exactly one measure; both variants computed, max kept.
            let (wh, f1, c1) = shell_sum(omega, rect, q, idx, cutoff, quad)?;
            let (sh, f2, c2) = shell_sum(sigma, rect, pp, idx, cutoff, quad)?;
            let v1 = combine(wh, plain(sigma)?);
            let v2 = combine(plain(omega)?, sh);
            if v1.diverging || v2.diverging {
                return Ok(LocalEval {
                    value: f64::INFINITY,
                    diverging: true,
                    last_shell_frac: f1.max(f2),
                    tail_certificate: None,
                });
            }
            let (value, frac, cert) = if v1.value >= v2.value { (v1.value, f1, c1) } else { (v2.value, f2, c2) };
            Ok(LocalEval { value, diverging: false, last_shell_frac: frac, tail_certificate: cert })
        }
    }
}

struct ShellBest {
    value: f64,
    l1: i64,
}

fn fit_trend(shells: &[Option<ShellBest>]) -> f64 {
    // Use the top half of occupied shells, least squares of ln(value)
    // against the ℓ¹ arc length (dyadic generations traveled).
    let occupied: Vec<(f64, f64)> = shells
        .iter()
        .flatten()
        .filter(|s| s.value.is_finite() && s.value > 0.0)
        .map(|s| (s.l1 as f64, s.value.ln()))
        .collect();
    if occupied.len() < 3 {
        return 0.0;
    }
    let start = occupied.len() / 2;
    let pts = &occupied[start.min(occupied.len() - 3)..];
    let npts = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / npts;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / npts;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return 0.0;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

fn lattice_sup(
    sigma: &MeasureSpec,
    omega: &MeasureSpec,
    idx: &ProductIndices,
    lattice: &RectangleLattice,
    kind: CharacteristicKind,
    cutoff: usize,
    quad: &QuadratureConfig,
) -> Result<CharacteristicReport> {
    if lattice.is_empty() {
        return Err(Error::domain("empty rectangle lattice"));
    }
    struct Row {
        value: f64,
        diverging: bool,
        shell: usize,
        l1: i64,
        rect: Rectangle,
        frac: f64,
        cert: Option<f64>,
    }
    let rows: Result<Vec<Row>> = lattice
        .factor1
        .par_iter()
        .flat_map(|f1| lattice.factor2.par_iter().map(move |f2| (f1, f2)))
        .map(|(f1, f2)| {
            let rect = Rectangle::new(f1.center.clone(), f2.center.clone(), f1.side, f2.side);
            let ev = tailed_local(sigma, omega, &rect, idx, kind, cutoff, quad)?;
            Ok(Row {
                value: ev.value,
                diverging: ev.diverging,
                shell: f1.k.unsigned_abs().max(f2.k.unsigned_abs()) as usize,
                l1: f1.k.unsigned_abs() as i64 + f2.k.unsigned_abs() as i64,
                rect,
                frac: ev.last_shell_frac,
                cert: ev.tail_certificate,
            })
        })
        .collect();
    let rows = rows?;

    let max_shell = rows.iter().map(|r| r.shell).max().unwrap_or(0);
    let mut shells: Vec<Option<ShellBest>> = (0..=max_shell).map(|_| None).collect();
    let mut best: Option<&Row> = None;
    let mut any_infinite = false;
    for row in &rows {
        if row.diverging || !row.value.is_finite() {
            any_infinite = any_infinite || row.diverging || row.value.is_infinite();
            continue;
        }
        if best.map_or(true, |b| row.value > b.value) {
            best = Some(row);
        }
        let slot = &mut shells[row.shell];
        if slot.as_ref().map_or(true, |s| row.value > s.value) {
            *slot = Some(ShellBest { value: row.value, l1: row.l1 });
        }
    }

    if any_infinite {
        return Ok(CharacteristicReport {
            kind,
            sup_value: f64::INFINITY,
            argmax: None,
            growth_trend: f64::INFINITY,
            diverging: true,
            shell_cutoff: (kind != CharacteristicKind::Plain).then_some(cutoff),
            tail_certificate: None,
            truncation_warning: false,
        });
    }

    let trend = fit_trend(&shells);
    let best = best.ok_or_else(|| Error::domain("all lattice values vanished"))?;
    Ok(CharacteristicReport {
        kind,
        sup_value: best.value,
        argmax: Some(best.rect.clone()),
        growth_trend: trend,
        diverging: trend > DIVERGENCE_SLOPE,
        shell_cutoff: (kind != CharacteristicKind::Plain).then_some(cutoff),
        tail_certificate: best.cert,
        truncation_warning: best.frac > 1e-6,
    })
}

/// Supremum of the plain characteristic over the lattice.
pub fn characteristic_sup(
    sigma: &MeasureSpec,
    omega: &MeasureSpec,
    idx: &ProductIndices,
    lattice: &RectangleLattice,
    quad: &QuadratureConfig,
) -> Result<CharacteristicReport> {
    lattice_sup(sigma, omega, idx, lattice, CharacteristicKind::Plain, 0, quad)
}

/// Supremum of a tailed characteristic over the lattice, with dyadic
/// shells up to the cutoff. Requires `α < m`, `β < n` so shell weights
/// decay geometrically.
pub fn tailed_characteristic(
    sigma: &MeasureSpec,
    omega: &MeasureSpec,
    idx: &ProductIndices,
    lattice: &RectangleLattice,
    cutoff: usize,
    kind: CharacteristicKind,
    quad: &QuadratureConfig,
) -> Result<CharacteristicReport> {
    if kind != CharacteristicKind::Plain {
        if idx.alpha.value() >= idx.m as f64 || idx.beta.value() >= idx.n as f64 {
            return Err(Error::domain("tailed characteristics require alpha < m and beta < n"));
        }
    }
    lattice_sup(sigma, omega, idx, lattice, kind, cutoff, quad)
}

/// `(∬ |x|^{(α−m)q} |y|^{(β−n)q} dω)^{1/q}`, exact for atomic ω; an atom
/// on a coordinate hyperplane makes it diverge.
pub fn dirac_norm(omega: &MeasureSpec, idx: &ProductIndices) -> Result<Mass> {
    let m = idx.m as usize;
    let am = idx.alpha.value() - idx.m as f64;
    let bn = idx.beta.value() - idx.n as f64;
    let q = idx.q.value();
    let atoms: Vec<(Vec<f64>, f64)> = match omega {
        MeasureSpec::Atomic { atoms } => atoms.clone(),
        MeasureSpec::DiracOrigin => vec![(vec![0.0; m + idx.n as usize], 1.0)],
        MeasureSpec::Product { mu1, mu2 } => {
            let f1 = match mu1.as_ref() {
                MeasureSpec::Atomic { atoms } => atoms.clone(),
                _ => return Err(Error::Unsupported("dirac_norm requires atomic measures".into())),
            };
            let f2 = match mu2.as_ref() {
                MeasureSpec::Atomic { atoms } => atoms.clone(),
                _ => return Err(Error::Unsupported("dirac_norm requires atomic measures".into())),
            };
            let mut out = Vec::with_capacity(f1.len() * f2.len());
            for (p1, m1) in &f1 {
                for (p2, m2) in &f2 {
                    let mut pt = p1.clone();
                    pt.extend_from_slice(p2);
                    out.push((pt, m1 * m2));
                }
            }
            out
        }
        _ => return Err(Error::Unsupported("dirac_norm requires atomic measures".into())),
    };
    let mut total = 0.0;
    for (pt, mass) in &atoms {
        let rx: f64 = pt[..m].iter().map(|v| v * v).sum::<f64>().sqrt();
        let ry: f64 = pt[m..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if (rx == 0.0 && am < 0.0) || (ry == 0.0 && bn < 0.0) {
            return Ok(Mass::diverging());
        }
        total += mass * rx.powf(am * q) * ry.powf(bn * q);
    }
    Ok(Mass::finite(total.powf(1.0 / q)))
}

/// Which factor(s) to shrink in reverse-doubling estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShrinkMode {
    Joint,
    Factor1,
    Factor2,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReverseDoublingEstimate {
    pub epsilon_hat: f64,
    /// RMS of fit residuals relative to the RMS of the data.
    pub residual: f64,
    pub used_probes: usize,
    pub excluded_probes: usize,
}

/// Least-squares fit of the reverse doubling exponent:
/// `log(|2^{−j} R|_μ / |R|_μ) ≈ −j · d · ε̂ · ln 2` over the probes.
pub fn reverse_doubling_estimate(
    mu: &MeasureSpec,
    probes: &[Rectangle],
    halvings: u32,
    mode: ShrinkMode,
    quad: &QuadratureConfig,
) -> Result<ReverseDoublingEstimate> {
    if probes.is_empty() || halvings == 0 {
        return Err(Error::domain("need at least one probe and one halving"));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = 0;
    let mut used = 0;
    for probe in probes {
        let d_eff = match mode {
            ShrinkMode::Joint => probe.m() + probe.n(),
            ShrinkMode::Factor1 => probe.m(),
            ShrinkMode::Factor2 => probe.n(),
        } as f64;
        let base = rectangle_mass(mu, probe, quad)?;
        if base.diverging || base.value <= 0.0 {
            excluded += 1;
            continue;
        }
        let mut probe_pts = Vec::new();
        let mut ok = true;
        for j in 1..=halvings {
            let lam = 2f64.powi(-(j as i32));
            let shrunk = match mode {
                ShrinkMode::Joint => probe.dilate(lam, lam),
                ShrinkMode::Factor1 => probe.dilate(lam, 1.0),
                ShrinkMode::Factor2 => probe.dilate(1.0, lam),
            };
            let mass = rectangle_mass(mu, &shrunk, quad)?;
            if mass.diverging || mass.value <= 0.0 {
                ok = false;
                break;
            }
            probe_pts.push((-(j as f64) * d_eff * std::f64::consts::LN_2, (mass.value / base.value).ln()));
        }
        if ok {
            used += 1;
            for (x, y) in probe_pts {
                xs.push(x);
                ys.push(y);
            }
        } else {
            excluded += 1;
        }
    }
    if used == 0 {
        return Err(Error::Refusal(format!(
            "all {excluded} probes excluded (zero mass under halving); measure is not reverse doubling on the probes"
        )));
    }
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let eps = sxy / sxx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - eps * x) * (y - eps * x)).sum();
    let ss_tot: f64 = ys.iter().map(|y| y * y).sum();
    let residual = if ss_tot > 0.0 { (ss_res / ss_tot).sqrt() } else { 0.0 };
    Ok(ReverseDoublingEstimate { epsilon_hat: eps, residual, used_probes: used, excluded_probes: excluded })
}

/// Default probes for reverse-doubling estimation: origin-centered
/// rectangles at a few scales.
pub fn default_probes(m: u32, n: u32) -> Vec<Rectangle> {
    (0..4)
        .map(|k| {
            let side = 2f64.powi(k);
            Rectangle::new(vec![0.0; m as usize], vec![0.0; n as usize], side, side)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub eps_sigma: ReverseDoublingEstimate,
    pub eps_omega: ReverseDoublingEstimate,
    pub plain: CharacteristicReport,
    pub one_tailed: CharacteristicReport,
    pub two_tailed: CharacteristicReport,
    pub ratio_two_over_one: f64,
    pub ratio_one_over_plain: f64,
}

/// Compute all three characteristics and report the ratios `Â/Ā`, `Ā/A`.
/// Refuses when either measure fails the reverse-doubling estimate
/// (ε̂ ≤ 0 or residual ≥ 0.05), since the equivalence only holds for
/// reverse rectangle doubling measures.
pub fn equivalence_check(
    sigma: &MeasureSpec,
    omega: &MeasureSpec,
    idx: &ProductIndices,
    lattice: &RectangleLattice,
    cutoff: usize,
    quad: &QuadratureConfig,
) -> Result<EquivalenceReport> {
    let probes = default_probes(idx.m, idx.n);
    let eps_sigma = reverse_doubling_estimate(sigma, &probes, 6, ShrinkMode::Joint, quad)?;
    let eps_omega = reverse_doubling_estimate(omega, &probes, 6, ShrinkMode::Joint, quad)?;
    for (name, est) in [("sigma", &eps_sigma), ("omega", &eps_omega)] {
        if est.epsilon_hat <= 0.0 || est.residual >= 0.05 {
            return Err(Error::Refusal(format!(
                "{name} is not reverse doubling on the probes (epsilon_hat = {:.4}, residual = {:.4})",
                est.epsilon_hat, est.residual
            )));
        }
    }
    let plain = characteristic_sup(sigma, omega, idx, lattice, quad)?;
    let one_tailed = tailed_characteristic(sigma, omega, idx, lattice, cutoff, CharacteristicKind::OneTailed, quad)?;
    let two_tailed = tailed_characteristic(sigma, omega, idx, lattice, cutoff, CharacteristicKind::TwoTailed, quad)?;
    Ok(EquivalenceReport {
        ratio_two_over_one: two_tailed.sup_value / one_tailed.sup_value,
        ratio_one_over_plain: one_tailed.sup_value / plain.sup_value,
        eps_sigma,
        eps_omega,
        plain,
        one_tailed,
        two_tailed,
    })
}

/// One-parameter plain characteristic over a factor lattice:
/// `sup_I ℓ(I)^{α−d} ω(I)^{1/q} σ(I)^{1/p′}`.
pub fn plain_characteristic_1p(
    sigma: &MeasureSpec,
    omega: &MeasureSpec,
    p: f64,
    q: f64,
    alpha: f64,
    d: u32,
    placements: &[FactorPlacement],
    quad: &QuadratureConfig,
) -> Result<f64> {
    let pp = p / (p - 1.0);
    let mut best = 0.0f64;
    for pl in placements {
        let wm = factor_mass(omega, &pl.center, pl.side, d, quad)?;
        let sm = factor_mass(sigma, &pl.center, pl.side, d, quad)?;
        if wm.diverging || sm.diverging {
            return Ok(f64::INFINITY);
        }
        let v = pl.side.powf(alpha - d as f64) * wm.value.powf(1.0 / q) * sm.value.powf(1.0 / pp);
        best = best.max(v);
    }
    Ok(best)
}

/// One-parameter dyadic shell sum `Σ_{k≤K} 2^{k(α−d)r} μ(2^k I)`.
pub fn shell_sum_1p(
    mu: &MeasureSpec,
    center: &[f64],
    side: f64,
    r_exp: f64,
    alpha: f64,
    d: u32,
    cutoff: usize,
    quad: &QuadratureConfig,
) -> Result<Mass> {
    let rho = 2f64.powf((alpha - d as f64) * r_exp);
    let mut total = 0.0;
    for k in 0..=cutoff {
        let mass = factor_mass(mu, center, 2f64.powi(k as i32) * side, d, quad)?;
        if mass.diverging {
            return Ok(Mass::diverging());
        }
        total += rho.powi(k as i32) * mass.value;
    }
    Ok(Mass::finite(total))
}

/// Which side of a one-parameter characteristic carries the tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailSide {
    Sigma,
    Omega,
    Both,
}

/// One-parameter tailed characteristic over a factor lattice.
pub fn tailed_characteristic_1p(
    sigma: &MeasureSpec,
    omega: &MeasureSpec,
    p: f64,
    q: f64,
    alpha: f64,
    d: u32,
    placements: &[FactorPlacement],
    cutoff: usize,
    side_choice: TailSide,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let pp = p / (p - 1.0);
    let mut best = 0.0f64;
    for pl in placements {
        let wm = match side_choice {
            TailSide::Omega | TailSide::Both => shell_sum_1p(omega, &pl.center, pl.side, q, alpha, d, cutoff, quad)?,
            TailSide::Sigma => factor_mass(omega, &pl.center, pl.side, d, quad)?,
        };
        let sm = match side_choice {
            TailSide::Sigma | TailSide::Both => shell_sum_1p(sigma, &pl.center, pl.side, pp, alpha, d, cutoff, quad)?,
            TailSide::Omega => factor_mass(sigma, &pl.center, pl.side, d, quad)?,
        };
        if wm.diverging || sm.diverging {
            return Ok(f64::INFINITY);
        }
        let v = pl.side.powf(alpha - d as f64) * wm.value.powf(1.0 / q) * sm.value.powf(1.0 / pp);
        best = best.max(v);
    }
    Ok(best)
}

/// Atomize a measure restricted to a rectangle (cell midpoints, exact
/// cell masses).
fn atomize_on_rect(mu: &MeasureSpec, rect: &Rectangle, n: usize, quad: &QuadratureConfig) -> Result<Vec<(Vec<f64>, f64)>> {
    if let MeasureSpec::Atomic { atoms } = mu {
        return Ok(atoms
            .iter()
            .filter(|(pt, _)| rect.contains(&pt[..1], &pt[1..]))
            .cloned()
            .collect());
    }
    if matches!(mu, MeasureSpec::DiracOrigin) {
        let z = vec![0.0, 0.0];
        return Ok(if rect.contains(&z[..1], &z[1..]) { vec![(z, 1.0)] } else { vec![] });
    }
    let hx = rect.s / n as f64;
    let hy = rect.t / n as f64;
    let x0 = rect.center1[0] - rect.s / 2.0;
    let y0 = rect.center2[0] - rect.t / 2.0;
    let mut atoms = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let cell = Rectangle::square_1d(x0 + (i as f64 + 0.5) * hx, y0 + (j as f64 + 0.5) * hy, hx, hy);
            let mass = rectangle_mass(mu, &cell, quad)?;
            if mass.diverging {
                return Err(Error::Unsupported("divergent cell mass in testing atomization".into()));
            }
            if mass.value > 0.0 {
                atoms.push((vec![cell.center1[0], cell.center2[0]], mass.value));
            }
        }
    }
    Ok(atoms)
}

/// Atomize a measure over `[−2^{j_max+1}, 2^{j_max+1}]²` on dyadic square
/// annuli with a fixed subdivision per ring. The truncation makes every
/// derived testing norm a lower estimate, consistent with the lattice
/// semantics elsewhere.
fn atomize_global(mu: &MeasureSpec, j_min: i32, j_max: i32, quad: &QuadratureConfig) -> Result<Vec<(Vec<f64>, f64)>> {
    if let MeasureSpec::Atomic { atoms } = mu {
        return Ok(atoms.clone());
    }
    if matches!(mu, MeasureSpec::DiracOrigin) {
        return Ok(vec![(vec![0.0, 0.0], 1.0)]);
    }
    let g = 3usize; // blocks per ring side are subdivided g×g
    let mut atoms = Vec::new();
    for j in j_min..=j_max {
        let r = 2f64.powi(j);
        // the annulus {r ≤ max(|x|,|y|) < 2r} tiled by 12 blocks of side r
        let mut blocks = Vec::new();
        for bx in -2i32..2 {
            for by in -2i32..2 {
                let inner = (-1..1).contains(&bx) && (-1..1).contains(&by);
                if !inner {
                    blocks.push((bx as f64 * r + r / 2.0, by as f64 * r + r / 2.0));
                }
            }
        }
        for (cx, cy) in blocks {
            let h = r / g as f64;
            // Irrational node offsets keep these nodes off the dyadic
            // rationals used by the per-rectangle atomization, so the
            // product kernel never sees a coordinate collision.
            let (ox, oy) = (0.118033988749895 * h, 0.072949016875158 * h);
            for i in 0..g {
                for k in 0..g {
                    let x = cx - r / 2.0 + (i as f64 + 0.5) * h;
                    let y = cy - r / 2.0 + (k as f64 + 0.5) * h;
                    let cell = Rectangle::square_1d(x, y, h, h);
                    let mass = rectangle_mass(mu, &cell, quad)?;
                    if mass.value > 0.0 && !mass.diverging {
                        atoms.push((vec![x + ox, y + oy], mass.value));
                    }
                }
            }
        }
    }
    Ok(atoms)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestingReport {
    pub max_quotient: f64,
    pub max_dual_quotient: f64,
    pub characteristic: f64,
    pub eps_sigma: (f64, f64),
    pub eps_omega: (f64, f64),
    pub per_rectangle: Vec<(Rectangle, f64, f64)>,
    pub skipped: usize,
}

/// Eccentric probes exposing the worst-case factor reverse-doubling
/// exponent (the shrinking factor stays the long side throughout).
fn eccentric_probes(long_factor: u8) -> Vec<Rectangle> {
    (4..7)
        .map(|k| {
            let long = 2f64.powi(k + 4);
            let short = 2f64.powi(-4);
            if long_factor == 1 {
                Rectangle::square_1d(0.0, 0.0, long, short)
            } else {
                Rectangle::square_1d(0.0, 0.0, short, long)
            }
        })
        .collect()
}

/// Check the testing (T1) conditions on a sample of rectangles:
/// `(∬ I_{α,β}(1_R σ)^q dω)^{1/q} ≤ C · A · |R|_σ^{1/p}` and the dual with
/// roles reversed and exponents conjugated. Requires `m = n = 1`, the
/// strictly subbalanced regime, and factor reverse-doubling exponents of
/// both measures inside the admissible windows. Non-atomic measures are
/// atomized on graded grids, so the reported norms are lower estimates.
pub fn testing_condition_check(
    sigma: &MeasureSpec,
    omega: &MeasureSpec,
    idx: &ProductIndices,
    rectangles: &[Rectangle],
    lattice: &RectangleLattice,
    quad: &QuadratureConfig,
) -> Result<TestingReport> {
    if idx.m != 1 || idx.n != 1 {
        return Err(Error::Refusal("testing conditions implemented for m = n = 1".into()));
    }
    if classify(idx) != Regime::StrictlySubbalanced {
        return Err(Error::Refusal(format!(
            "testing conditions require the strictly subbalanced regime, got {:?}",
            classify(idx)
        )));
    }
    let alpha = idx.alpha.value();
    let beta = idx.beta.value();
    let q = idx.q.value();
    let p = idx.p.value();
    let pp = idx.p_prime().value();
    let qp = idx.q_prime().value();

    // Factor reverse-doubling exponents of both measures against the
    // per-factor windows 1−α < ε < (1−α)/(1/q + 1/p′) and the β analogue.
    let mut estimates = [(0.0, 0.0); 2];
    for (mi, (name, mu)) in [("sigma", sigma), ("omega", omega)].iter().enumerate() {
        let e1 = reverse_doubling_estimate(mu, &eccentric_probes(1), 6, ShrinkMode::Factor1, quad)?;
        let e2 = reverse_doubling_estimate(mu, &eccentric_probes(2), 6, ShrinkMode::Factor2, quad)?;
        estimates[mi] = (e1.epsilon_hat, e2.epsilon_hat);
        for (frac, est, which) in [(alpha, &e1, "factor 1"), (beta, &e2, "factor 2")] {
            let lo = 1.0 - frac;
            let hi = (1.0 - frac) / (1.0 / q + 1.0 / pp);
            if !(est.epsilon_hat > lo && est.epsilon_hat < hi) {
                return Err(Error::Refusal(format!(
                    "{name} {which} reverse-doubling exponent {:.4} outside the window ({lo:.4}, {hi:.4})",
                    est.epsilon_hat
                )));
            }
        }
    }

    let a_char = characteristic_sup(sigma, omega, idx, lattice, quad)?;
    let sigma_global = atomize_global(sigma, -14, 10, quad)?;
    let omega_global = atomize_global(omega, -14, 10, quad)?;

    // (∬ I(1_R μ_in)^e dμ_out)^{1/e} over the atomizations.
    let t_norm = |ain: &[(Vec<f64>, f64)], aout: &[(Vec<f64>, f64)], e: f64| -> f64 {
        let total: f64 = aout
            .par_iter()
            .map(|(opt, om)| {
                let mut iv = 0.0;
                for (spt, sm) in ain {
                    let dx = (opt[0] - spt[0]).abs();
                    let dy = (opt[1] - spt[1]).abs();
                    let kx = if dx == 0.0 { f64::INFINITY } else { dx.powf(alpha - 1.0) };
                    let ky = if dy == 0.0 { f64::INFINITY } else { dy.powf(beta - 1.0) };
                    iv += kx * ky * sm;
                }
                iv.powf(e) * om
            })
            .sum();
        total.powf(1.0 / e)
    };

    let mut max_q = 0.0f64;
    let mut max_dual = 0.0f64;
    let mut rows = Vec::new();
    let mut skipped = 0;
    for rect in rectangles {
        let s_in = atomize_on_rect(sigma, rect, 32, quad)?;
        let w_in = atomize_on_rect(omega, rect, 32, quad)?;
        let s_mass: f64 = s_in.iter().map(|(_, m)| m).sum();
        let w_mass: f64 = w_in.iter().map(|(_, m)| m).sum();
        if s_mass <= 0.0 && w_mass <= 0.0 {
            skipped += 1;
            continue;
        }
        let quotient = if s_mass > 0.0 {
            t_norm(&s_in, &omega_global, q) / (a_char.sup_value * s_mass.powf(1.0 / p))
        } else {
            0.0
        };
        let dual = if w_mass > 0.0 {
            t_norm(&w_in, &sigma_global, pp) / (a_char.sup_value * w_mass.powf(1.0 / qp))
        } else {
            0.0
        };
        max_q = max_q.max(quotient);
        max_dual = max_dual.max(dual);
        rows.push((rect.clone(), quotient, dual));
    }
    Ok(TestingReport {
        max_quotient: max_q,
        max_dual_quotient: max_dual,
        characteristic: a_char.sup_value,
        eps_sigma: estimates[0],
        eps_omega: estimates[1],
        per_rectangle: rows,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indices::Exact;
    use crate::laws::power_characteristic_finite;

    fn quadc() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn idx11(p: f64, q: f64, alpha: f64, beta: f64) -> ProductIndices {
        ProductIndices::from_f64(1, 1, p, q, alpha, beta).unwrap()
    }

    fn power_pair(gamma: f64, delta: f64) -> (MeasureSpec, MeasureSpec) {
        // σ = |z|^{−δp′} dz needs p; callers below use p = 2 so p′ = 2.
        let sigma = MeasureSpec::Density { weight: WeightSpec::RadialPower { exponent: -delta * 2.0 }, power: 1.0 };
        let omega_exp = -gamma; // times q, applied by caller choice below
        let _ = omega_exp;
        let omega = MeasureSpec::Density { weight: WeightSpec::RadialPower { exponent: -gamma }, power: 1.0 };
        (sigma, omega)
    }

    #[test]
    fn local_characteristic_examples() {
        let leb = MeasureSpec::lebesgue();
        let quad = quadc();
        // Unit square with Lebesgue measures: value 1 for any indices.
        for idx in [idx11(2.0, 4.0, 0.25, 0.25), idx11(1.5, 3.0, 0.7, 0.4)] {
            let r = Rectangle::square_1d(3.0, -4.0, 1.0, 1.0);
            let v = local_characteristic(&leb, &leb, &r, &idx, &quad).unwrap();
            assert!((v.value - 1.0).abs() < 1e-12);
        }
        // General rectangle: s^{α−m+m/q+m/p′} t^{β−n+n/q+n/p′}.
        let idx = idx11(2.0, 4.0, 0.25, 0.5);
        let r = Rectangle::square_1d(0.0, 0.0, 4.0, 0.5);
        let v = local_characteristic(&leb, &leb, &r, &idx, &quad).unwrap();
        let es = 0.25 - 1.0 + 0.25 + 0.5;
        let et = 0.5 - 1.0 + 0.25 + 0.5;
        assert!((v.value - 4f64.powf(es) * 0.5f64.powf(et)).abs() < 1e-12);
    }

    #[test]
    fn characteristic_sup_agrees_with_power_law() {
        // Cross-module consistency: the laws module is the oracle.
        let quad = quadc();
        let lattice = RectangleLattice::scales_only(-10, 10, 1, 1);
        // Finite case: balanced unweighted.
        let idx = idx11(2.0, 4.0, 0.25, 0.25);
        let leb = MeasureSpec::lebesgue();
        let rep = characteristic_sup(&leb, &leb, &idx, &lattice, &quad).unwrap();
        assert!(!rep.diverging, "trend = {}", rep.growth_trend);
        let law = power_characteristic_finite(&idx, Exact::from_int(0), Exact::from_int(0)).unwrap();
        assert!(law.decision.is_true());

        // Infinite case: fail the alpha-upper line by 0.1.
        let idx_bad = idx11(2.0, 4.0, 0.35, 0.15);
        let rep = characteristic_sup(&leb, &leb, &idx_bad, &lattice, &quad).unwrap();
        assert!(rep.diverging);
        let margin = 0.1;
        let hand = margin * std::f64::consts::LN_2;
        assert!(
            (rep.growth_trend - hand).abs() <= 0.3 * hand,
            "trend {} vs hand {hand}",
            rep.growth_trend
        );
        let law = power_characteristic_finite(&idx_bad, Exact::from_int(0), Exact::from_int(0)).unwrap();
        assert!(!law.decision.is_true());
    }

    #[test]
    fn power_weight_characteristic_margins() {
        // A genuinely weighted pair: p = 2, q = 2, γ = δ = 0.6, α = β = 0.6
        // (finite per the laws module) vs an α shifted outside the window.
        let quad = quadc();
        let lattice = RectangleLattice::scales_only(-12, 12, 1, 1);
        let (sigma, omega) = power_pair(0.6 * 2.0 / 2.0, 0.6); // exponents folded below
        let sigma = match sigma {
            MeasureSpec::Density { .. } => {
                MeasureSpec::Density { weight: WeightSpec::RadialPower { exponent: -1.2 }, power: 1.0 }
            }
            other => other,
        };
        let omega = match omega {
            MeasureSpec::Density { .. } => {
                MeasureSpec::Density { weight: WeightSpec::RadialPower { exponent: -1.2 }, power: 1.0 }
            }
            other => other,
        };
        let idx = idx11(2.0, 2.0, 0.6, 0.6);
        let rep = characteristic_sup(&sigma, &omega, &idx, &lattice, &quad).unwrap();
        assert!(!rep.diverging, "trend {}", rep.growth_trend);

        // α outside the window [Δ(1), γ+δ−Δ(1)] = [0.2, 1.0] by 0.1.
        let idx_bad = idx11(2.0, 2.0, 1.1, 0.1);
        let rep = characteristic_sup(&sigma, &omega, &idx_bad, &lattice, &quad).unwrap();
        assert!(rep.diverging, "trend {}", rep.growth_trend);
    }

    #[test]
    fn lattice_monotonicity() {
        let quad = quadc();
        let idx = idx11(2.0, 4.0, 0.25, 0.25);
        let leb = MeasureSpec::lebesgue();
        let atoms = MeasureSpec::atomic(vec![(vec![0.3, 0.4], 1.0), (vec![2.0, -1.0], 0.5)]).unwrap();
        let small = RectangleLattice::scales_only(-3, 3, 1, 1);
        let big = RectangleLattice::scales_only(-6, 6, 1, 1);
        let a = characteristic_sup(&atoms, &leb, &idx, &small, &quad).unwrap().sup_value;
        let b = characteristic_sup(&atoms, &leb, &idx, &big, &quad).unwrap().sup_value;
        assert!(b >= a);
    }

    #[test]
    fn ordering_plain_one_two() {
        // A ≤ Ā ≤ Â at the discretized level: the k = 0 shell reproduces
        // the plain mass and all shells are nonnegative.
        let quad = quadc();
        let idx = idx11(2.0, 4.0, 0.25, 0.25);
        let sigma = MeasureSpec::atomic(vec![(vec![0.2, 0.3], 1.0), (vec![-1.5, 2.0], 2.0)]).unwrap();
        let omega = MeasureSpec::atomic(vec![(vec![0.5, -0.2], 1.5), (vec![3.0, 1.0], 0.25)]).unwrap();
        let lattice = RectangleLattice::build(
            &LatticeConfig { k_min: -4, k_max: 4, random_shifts: 3, seed: 42, include_cornered: true },
            1,
            1,
        );
        let k = 24;
        let plain = characteristic_sup(&sigma, &omega, &idx, &lattice, &quad).unwrap().sup_value;
        let one = tailed_characteristic(&sigma, &omega, &idx, &lattice, k, CharacteristicKind::OneTailed, &quad)
            .unwrap()
            .sup_value;
        let two = tailed_characteristic(&sigma, &omega, &idx, &lattice, k, CharacteristicKind::TwoTailed, &quad)
            .unwrap()
            .sup_value;
        assert!(plain <= one * (1.0 + 1e-12));
        assert!(one <= two * (1.0 + 1e-12));
    }

    #[test]
    fn two_tailed_factorizes_over_product_measures() {
        let quad = quadc();
        let idx = idx11(2.0, 4.0, 0.25, 0.5);
        let s1 = vec![(vec![0.4], 1.0), (vec![-2.0], 0.7)];
        let s2 = vec![(vec![1.0], 0.5)];
        let w1 = vec![(vec![0.1], 2.0)];
        let w2 = vec![(vec![-0.6], 1.0), (vec![4.0], 0.3)];
        let sigma = MeasureSpec::Product {
            mu1: Box::new(MeasureSpec::Atomic { atoms: s1.clone() }),
            mu2: Box::new(MeasureSpec::Atomic { atoms: s2.clone() }),
        };
        let omega = MeasureSpec::Product {
            mu1: Box::new(MeasureSpec::Atomic { atoms: w1.clone() }),
            mu2: Box::new(MeasureSpec::Atomic { atoms: w2.clone() }),
        };
        let lattice = RectangleLattice::build(
            &LatticeConfig { k_min: -5, k_max: 5, random_shifts: 3, seed: 9, include_cornered: true },
            1,
            1,
        );
        let cutoff = 20;
        let two = tailed_characteristic(&sigma, &omega, &idx, &lattice, cutoff, CharacteristicKind::TwoTailed, &quad)
            .unwrap()
            .sup_value;

        // 1-parameter factor characteristics over the factor lattices.
        let pp = 2.0;
        let f1 = |pl: &FactorPlacement| -> f64 {
            let wsum = shell_sum_1p(&MeasureSpec::Atomic { atoms: w1.clone() }, &pl.center, pl.side, 4.0, 0.25, 1, cutoff, &quad).unwrap();
            let ssum = shell_sum_1p(&MeasureSpec::Atomic { atoms: s1.clone() }, &pl.center, pl.side, pp, 0.25, 1, cutoff, &quad).unwrap();
            pl.side.powf(0.25 - 1.0) * wsum.value.powf(0.25) * ssum.value.powf(0.5)
        };
        let f2 = |pl: &FactorPlacement| -> f64 {
            let wsum = shell_sum_1p(&MeasureSpec::Atomic { atoms: w2.clone() }, &pl.center, pl.side, 4.0, 0.5, 1, cutoff, &quad).unwrap();
            let ssum = shell_sum_1p(&MeasureSpec::Atomic { atoms: s2.clone() }, &pl.center, pl.side, pp, 0.5, 1, cutoff, &quad).unwrap();
            pl.side.powf(0.5 - 1.0) * wsum.value.powf(0.25) * ssum.value.powf(0.5)
        };
        let a1 = lattice.factor1.iter().map(|pl| f1(pl)).fold(0.0f64, f64::max);
        let a2 = lattice.factor2.iter().map(|pl| f2(pl)).fold(0.0f64, f64::max);
        assert!(
            (two - a1 * a2).abs() <= 1e-9 * (a1 * a2),
            "two-tailed {two} vs product {}",
            a1 * a2
        );
    }

    #[test]
    fn dirac_norm_examples() {
        let idx = idx11(2.0, 2.0, 0.5, 0.5);
        let w = MeasureSpec::atomic(vec![(vec![1.0, 1.0], 1.0)]).unwrap();
        assert!((dirac_norm(&w, &idx).unwrap().value - 1.0).abs() < 1e-15);

        let w = MeasureSpec::atomic(vec![(vec![2.0, 1.0], 1.0)]).unwrap();
        let v = dirac_norm(&w, &idx).unwrap().value;
        assert!((v - 2f64.powf(-0.5)).abs() < 1e-12);

        // Atom on the hyperplane x = 0 diverges.
        let w = MeasureSpec::atomic(vec![(vec![0.0, 1.0], 1.0)]).unwrap();
        assert!(dirac_norm(&w, &idx).unwrap().diverging);
    }

    #[test]
    fn dirac_norm_lacunary_series() {
        // ω_ρ = Σ δ_{(2^k, 2^{−ρk})}: the norm converges iff
        // (α−1) − ρ(β−1) < 0, i.e. ρ < (1−α)/(1−β).
        let (alpha, beta, q) = (0.5, 0.75, 2.0);
        let idx = idx11(2.0, q, alpha, beta);
        let rho_star = (1.0 - alpha) / (1.0 - beta);
        let series = |rho: f64, kmax: i32| -> f64 {
            (1..=kmax)
                .map(|k| {
                    let x = 2f64.powi(k);
                    let y = 2f64.powf(-rho * k as f64);
                    x.powf((alpha - 1.0) * q) * y.powf((beta - 1.0) * q)
                })
                .sum::<f64>()
                .powf(1.0 / q)
        };
        for (rho, converges) in [(0.5 * rho_star, true), (2.0 * rho_star, false)] {
            let atoms: Vec<(Vec<f64>, f64)> = (1..=40)
                .map(|k| (vec![2f64.powi(k), 2f64.powf(-rho * k as f64)], 1.0))
                .collect();
            let w = MeasureSpec::Atomic { atoms };
            let v = dirac_norm(&w, &idx).unwrap().value;
            let partial = series(rho, 40);
            assert!((v - partial).abs() < 1e-9 * partial);
            // geometric series oracle: compare growth of partial sums
            let longer = series(rho, 80);
            if converges {
                assert!(longer / partial < 1.0001);
            } else {
                assert!(longer / partial > 1.5);
            }
        }
    }

    #[test]
    fn tailed_dirac_matches_dirac_norm() {
        // Necessity at the Dirac: Â(δ₀, ω) ≍ dirac_norm(ω) across random
        // atomic ω; ratio spread < 16.
        let quad = quadc();
        let idx = idx11(2.0, 4.0, 0.25, 0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(0xD1AC);
        let mut ratios = Vec::new();
        for _ in 0..20 {
            let atoms: Vec<(Vec<f64>, f64)> = (0..6)
                .map(|_| {
                    (
                        vec![
                            2f64.powi(rng.gen_range(-3..4)) * (1.0 + rng.gen::<f64>()),
                            2f64.powi(rng.gen_range(-3..4)) * (1.0 + rng.gen::<f64>()),
                        ],
                        rng.gen_range(0.2..2.0),
                    )
                })
                .collect();
            let omega = MeasureSpec::Atomic { atoms };
            let sigma = MeasureSpec::DiracOrigin;
            let lattice = RectangleLattice::scales_only(-6, 6, 1, 1);
            let two = tailed_characteristic(&sigma, &omega, &idx, &lattice, 30, CharacteristicKind::TwoTailed, &quad)
                .unwrap()
                .sup_value;
            let dn = dirac_norm(&omega, &idx).unwrap().value;
            ratios.push(two / dn);
        }
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min < 16.0, "spread {min}..{max}");
    }

    #[test]
    fn reverse_doubling_examples() {
        let quad = quadc();
        let probes = default_probes(1, 1);
        // Lebesgue: ε̂ = 1.
        let est = reverse_doubling_estimate(&MeasureSpec::lebesgue(), &probes, 5, ShrinkMode::Joint, &quad).unwrap();
        assert!((est.epsilon_hat - 1.0).abs() < 1e-9);
        assert!(est.residual < 1e-9);

        // |z|^e density in the plane: ε̂ = (2+e)/2 on origin-centered probes.
        let mu = MeasureSpec::Density { weight: WeightSpec::RadialPower { exponent: -0.8 }, power: 1.0 };
        let est = reverse_doubling_estimate(&mu, &probes, 5, ShrinkMode::Joint, &quad).unwrap();
        assert!((est.epsilon_hat - (2.0 - 0.8) / 2.0).abs() < 1e-6, "got {}", est.epsilon_hat);

        // A single atom excludes off-center probes, then errors.
        let atom = MeasureSpec::atomic(vec![(vec![0.9, 0.9], 1.0)]).unwrap();
        let off_probes = vec![Rectangle::square_1d(0.0, 0.0, 4.0, 4.0)];
        assert!(reverse_doubling_estimate(&atom, &off_probes, 8, ShrinkMode::Joint, &quad).is_err());
    }

    #[test]
    fn equivalence_check_examples() {
        let quad = quadc();
        // Lebesgue–Lebesgue balanced: both ratios within [1, 10].
        let idx = idx11(2.0, 4.0, 0.25, 0.25);
        let leb = MeasureSpec::lebesgue();
        let lattice = RectangleLattice::scales_only(-6, 6, 1, 1);
        let rep = equivalence_check(&leb, &leb, &idx, &lattice, 30, &quad).unwrap();
        assert!(rep.ratio_one_over_plain >= 1.0 - 1e-9 && rep.ratio_one_over_plain < 10.0);
        assert!(rep.ratio_two_over_one >= 1.0 - 1e-9 && rep.ratio_two_over_one < 10.0);

        // Shell-cutoff stability for a strictly-inside power pair.
        let idx2 = idx11(2.0, 2.0, 0.6, 0.6);
        let sigma = MeasureSpec::Density { weight: WeightSpec::RadialPower { exponent: -1.2 }, power: 1.0 };
        let omega = sigma.clone();
        let r10 = equivalence_check(&sigma, &omega, &idx2, &lattice, 10, &quad).unwrap();
        let r20 = equivalence_check(&sigma, &omega, &idx2, &lattice, 20, &quad).unwrap();
        let rel = (r10.two_tailed.sup_value - r20.two_tailed.sup_value).abs() / r20.two_tailed.sup_value;
        assert!(rel < 0.05, "shell growth unstable: {rel}");

        // An atomic measure is refused.
        let atom = MeasureSpec::atomic(vec![(vec![0.9, 0.9], 1.0)]).unwrap();
        assert!(equivalence_check(&atom, &leb, &idx, &lattice, 10, &quad).is_err());
    }

    /// The admissible pair for the testing conditions: strictly
    /// subbalanced (2, 4, 0.3, 0.3) with σ = ω = |z|^e dz where the
    /// characteristic equality pins e = 2(Γ − α)/(1 − Γ); the factor
    /// reverse-doubling exponent 1 + e then sits strictly inside the
    /// window exactly when Γ < α.
    fn testing_pair() -> (ProductIndices, MeasureSpec) {
        let idx = idx11(2.0, 4.0, 0.3, 0.3);
        let gap = 0.25;
        let e = 2.0 * (gap - 0.3) / (1.0 - gap);
        let mu = MeasureSpec::Density { weight: WeightSpec::RadialPower { exponent: e }, power: 1.0 };
        (idx, mu)
    }

    #[test]
    fn testing_condition_radial_density() {
        let quad = quadc();
        let (idx, mu) = testing_pair();
        assert_eq!(classify(&idx), Regime::StrictlySubbalanced);
        let lattice = RectangleLattice::scales_only(-6, 6, 1, 1);
        let rects: Vec<Rectangle> = (-4..=4)
            .step_by(2)
            .map(|k| Rectangle::square_1d(0.0, 0.0, 2f64.powi(k), 2f64.powi(-k)))
            .collect();
        let rep = testing_condition_check(&mu, &mu, &idx, &rects, &lattice, &quad).unwrap();
        assert!(rep.max_quotient.is_finite() && rep.max_quotient > 0.0);
        assert!(rep.max_dual_quotient.is_finite() && rep.max_dual_quotient > 0.0);
        // Stability across the eccentricity sweep.
        let vals: Vec<f64> = rep.per_rectangle.iter().map(|(_, a, _)| *a).collect();
        let vmax = vals.iter().cloned().fold(f64::MIN, f64::max);
        let vmin = vals.iter().cloned().filter(|v| *v > 0.0).fold(f64::MAX, f64::min);
        assert!(vmax / vmin < 50.0, "quotients unstable: {vmin}..{vmax}");

        // Atoms are not reverse doubling: refusal.
        let atom_far = MeasureSpec::atomic(vec![(vec![100.0, 100.0], 1.0)]).unwrap();
        let small = vec![Rectangle::square_1d(0.0, 0.0, 1.0, 1.0)];
        assert!(testing_condition_check(&atom_far, &atom_far, &idx, &small, &lattice, &quad).is_err());

        // Lebesgue has factor exponent 1, above the window: refusal.
        let leb = MeasureSpec::lebesgue();
        assert!(testing_condition_check(&leb, &leb, &idx, &rects, &lattice, &quad).is_err());

        // Regime violation refused.
        let bal = idx11(2.0, 4.0, 0.25, 0.25);
        assert!(testing_condition_check(&mu, &mu, &bal, &rects, &lattice, &quad).is_err());
    }

    #[test]
    fn testing_quotient_point_limit() {
        // R shrunk to a point: the quotient stays finite along a
        // shrinking scale sequence (approaches a local Â-type quantity).
        let quad = quadc();
        let (idx, mu) = testing_pair();
        let lattice = RectangleLattice::scales_only(-6, 6, 1, 1);
        let rects: Vec<Rectangle> =
            (0..6).map(|k| Rectangle::square_1d(1.0, 1.0, 2f64.powi(-k), 2f64.powi(-k))).collect();
        let rep = testing_condition_check(&mu, &mu, &idx, &rects, &lattice, &quad).unwrap();
        for (_, quo, dual) in &rep.per_rectangle {
            assert!(quo.is_finite() && dual.is_finite());
        }
    }
}
