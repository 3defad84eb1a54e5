//! Exponent arithmetic: Lebesgue indices, Hölder conjugates, the gap
//! `Γ = 1/p − 1/q`, signed parts with exact-zero tracking, and the
//! bracket `Δ(d) = (γ − d/q)₊ + (δ − d/p′)₊` used by the power-weight
//! finiteness laws.
//!
//! Inputs may be exact rationals (`4/3`) or doubles. Every scalar is an
//! [`Exact`]: a double paired with an optional rational. Comparisons and
//! boundary detection are exact whenever both operands carry rationals,
//! and fall back to a tolerance (default `1e-10`) otherwise. Finiteness
//! criteria change at exact equalities (log endpoint cases), so this
//! distinction is load-bearing, not cosmetic.

use crate::error::{Error, Result};
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Absolute tolerance for boundary detection on non-rational inputs.
pub const BOUNDARY_TOL: f64 = 1e-10;

/// Relative tolerance for derived double-precision identities.
pub const IDENTITY_TOL: f64 = 1e-12;

type Rat = Ratio<i128>;

/// A scalar kept as a double plus, when available, an exact rational.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exact {
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    rational: Option<(i128, i128)>,
}

impl Exact {
    pub fn from_f64(value: f64) -> Self {
        Exact { value, rational: None }
    }

    pub fn from_ratio(num: i128, den: i128) -> Self {
        assert!(den != 0, "zero denominator");
        let r = Rat::new(num, den);
        Exact {
            value: r.to_f64().unwrap_or(f64::NAN),
            rational: Some((*r.numer(), *r.denom())),
        }
    }

    pub fn from_int(n: i128) -> Self {
        Exact::from_ratio(n, 1)
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn rational(&self) -> Option<(i128, i128)> {
        self.rational
    }

    pub fn is_rational(&self) -> bool {
        self.rational.is_some()
    }

    fn rat(&self) -> Option<Rat> {
        self.rational.map(|(n, d)| Rat::new(n, d))
    }

    /// Parse `"4/3"`, `"-1/2"`, `"0.25"` or `"3"`.
    pub fn parse(s: &str) -> Result<Exact> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let num: i128 = a
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad rational numerator in {s:?}")))?;
            let den: i128 = b
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad rational denominator in {s:?}")))?;
            if den == 0 {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            return Ok(Exact::from_ratio(num, den));
        }
        if let Ok(n) = s.parse::<i128>() {
            return Ok(Exact::from_int(n));
        }
        // Decimal literals with a short fractional part are still exact rationals.
        if let Some((int_part, frac_part)) = s.split_once('.') {
            if frac_part.len() <= 12
                && !frac_part.is_empty()
                && frac_part.chars().all(|c| c.is_ascii_digit())
            {
                let sign = if int_part.trim_start().starts_with('-') { -1i128 } else { 1 };
                if let Ok(ip) = int_part.parse::<i128>() {
                    if let Ok(fp) = frac_part.parse::<i128>() {
                        let den = 10i128.pow(frac_part.len() as u32);
                        return Ok(Exact::from_ratio(ip * den + sign * fp, den));
                    }
                }
            }
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::Parse(format!("cannot parse number {s:?}")))?;
        Ok(Exact::from_f64(v))
    }

    fn binop(self, other: Exact, f: impl Fn(f64, f64) -> f64, g: impl Fn(Rat, Rat) -> Option<Rat>) -> Exact {
        let rational = match (self.rat(), other.rat()) {
            (Some(a), Some(b)) => g(a, b).map(|r| (*r.numer(), *r.denom())),
            _ => None,
        };
        let value = match rational {
            Some((n, d)) => Rat::new(n, d).to_f64().unwrap_or(f(self.value, other.value)),
            None => f(self.value, other.value),
        };
        Exact { value, rational }
    }

    pub fn recip(self) -> Exact {
        let rational = self.rat().and_then(|r| {
            if r.is_zero() {
                None
            } else {
                let q = r.recip();
                Some((*q.numer(), *q.denom()))
            }
        });
        let value = match rational {
            Some((n, d)) => Rat::new(n, d).to_f64().unwrap_or(1.0 / self.value),
            None => 1.0 / self.value,
        };
        Exact { value, rational }
    }

    /// True iff this scalar is exactly zero (rationally exact, or within
    /// `tol` in the double-only case).
    pub fn is_zero_within(&self, tol: f64) -> bool {
        match self.rat() {
            Some(r) => r.is_zero(),
            None => self.value.abs() <= tol,
        }
    }

    /// Three-way comparison with boundary tolerance for non-rational inputs.
    pub fn cmp_within(&self, other: &Exact, tol: f64) -> std::cmp::Ordering {
        use std::cmp::Ordering::*;
        match (self.rat(), other.rat()) {
            (Some(a), Some(b)) => a.cmp(&b),
            _ => {
                let d = self.value - other.value;
                if d.abs() <= tol {
                    Equal
                } else if d < 0.0 {
                    Less
                } else {
                    Greater
                }
            }
        }
    }
}

macro_rules! checked_rat {
    ($f:expr) => {
        |a: Rat, b: Rat| -> Option<Rat> {
            // Ratio arithmetic panics on overflow; catch by bounding magnitudes.
            let big = |r: &Rat| r.numer().checked_abs().is_none() || r.numer().abs() > i128::MAX / 4 || r.denom().abs() > i128::MAX / 4;
            if big(&a) || big(&b) {
                None
            } else {
                $f(a, b)
            }
        }
    };
}

impl Add for Exact {
    type Output = Exact;
    fn add(self, rhs: Exact) -> Exact {
        self.binop(rhs, |a, b| a + b, checked_rat!(|a: Rat, b: Rat| a.checked_add(&b)))
    }
}
impl Sub for Exact {
    type Output = Exact;
    fn sub(self, rhs: Exact) -> Exact {
        self.binop(rhs, |a, b| a - b, checked_rat!(|a: Rat, b: Rat| a.checked_sub(&b)))
    }
}
impl Mul for Exact {
    type Output = Exact;
    fn mul(self, rhs: Exact) -> Exact {
        self.binop(rhs, |a, b| a * b, checked_rat!(|a: Rat, b: Rat| a.checked_mul(&b)))
    }
}
impl Div for Exact {
    type Output = Exact;
    fn div(self, rhs: Exact) -> Exact {
        self.binop(
            rhs,
            |a, b| a / b,
            checked_rat!(|a: Rat, b: Rat| if b.is_zero() { None } else { a.checked_div(&b) }),
        )
    }
}
impl Neg for Exact {
    type Output = Exact;
    fn neg(self) -> Exact {
        Exact::from_int(0) - self
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rational {
            Some((n, d)) if d != 1 => write!(f, "{n}/{d}"),
            Some((n, _)) => write!(f, "{n}"),
            None => write!(f, "{}", self.value),
        }
    }
}

/// Hölder conjugate: `p ↦ p′` with `1/p + 1/p′ = 1`.
pub fn conjugate(p: Exact) -> Result<Exact> {
    let v = p.value();
    if !(v.is_finite() && v > 1.0) {
        return Err(Error::domain(format!("conjugate requires 1 < p < ∞, got {v}")));
    }
    // p' = p / (p - 1)
    Ok(p / (p - Exact::from_int(1)))
}

/// `Γ = 1/p − 1/q`.
pub fn gamma_gap(p: Exact, q: Exact) -> Result<Exact> {
    for (name, e) in [("p", &p), ("q", &q)] {
        let v = e.value();
        if !(v.is_finite() && v > 1.0) {
            return Err(Error::domain(format!("gamma_gap requires 1 < {name} < ∞, got {v}")));
        }
    }
    Ok(p.recip() - q.recip())
}

/// A nonnegative part of a real, remembering whether its argument was
/// exactly zero. The convention `0₊ ≤ A meaning 0 < A` turns such
/// boundary parts into strict inequalities downstream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedPart {
    pub value: f64,
    pub at_boundary: bool,
}

/// `t₊ = max{t, 0}` with exact-zero detection.
pub fn positive_part(t: Exact) -> SignedPart {
    let at_boundary = t.is_zero_within(BOUNDARY_TOL);
    SignedPart {
        value: if at_boundary { 0.0 } else { t.value().max(0.0) },
        at_boundary,
    }
}

/// `t₋ = max{−t, 0}` with exact-zero detection.
pub fn negative_part(t: Exact) -> SignedPart {
    positive_part(-t)
}

/// `Δ_{p,q}^{γ,δ}(d) = (γ − d/q)₊ + (δ − d/p′)₊`, flagged when either
/// argument sits exactly at zero.
pub fn delta_bracket(gamma: Exact, delta: Exact, dim: u32, p: Exact, q: Exact) -> Result<(f64, bool)> {
    let d = Exact::from_int(dim as i128);
    let p_prime = conjugate(p)?;
    let a = positive_part(gamma - d / q);
    let b = positive_part(delta - d / p_prime);
    Ok((a.value + b.value, a.at_boundary || b.at_boundary))
}

/// The index tuple `(m, n, p, q, α, β)` together with derived exponents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductIndices {
    pub m: u32,
    pub n: u32,
    pub p: Exact,
    pub q: Exact,
    pub alpha: Exact,
    pub beta: Exact,
}

impl ProductIndices {
    pub fn new(m: u32, n: u32, p: Exact, q: Exact, alpha: Exact, beta: Exact) -> Result<Self> {
        if m < 1 || n < 1 {
            return Err(Error::domain("dimensions m, n must be positive integers"));
        }
        for (name, e) in [("p", &p), ("q", &q)] {
            let v = e.value();
            if !(v.is_finite() && v > 1.0) {
                return Err(Error::domain(format!("{name} must lie in (1, ∞), got {v}")));
            }
        }
        for (name, e) in [("alpha", &alpha), ("beta", &beta)] {
            if !e.value().is_finite() {
                return Err(Error::domain(format!("{name} must be finite")));
            }
        }
        Ok(ProductIndices { m, n, p, q, alpha, beta })
    }

    /// Convenience constructor from doubles (no rational tracking).
    pub fn from_f64(m: u32, n: u32, p: f64, q: f64, alpha: f64, beta: f64) -> Result<Self> {
        ProductIndices::new(
            m,
            n,
            Exact::from_f64(p),
            Exact::from_f64(q),
            Exact::from_f64(alpha),
            Exact::from_f64(beta),
        )
    }

    pub fn p_prime(&self) -> Exact {
        conjugate(self.p).expect("validated on construction")
    }

    pub fn q_prime(&self) -> Exact {
        conjugate(self.q).expect("validated on construction")
    }

    pub fn gamma_gap(&self) -> Exact {
        gamma_gap(self.p, self.q).expect("validated on construction")
    }

    pub fn alpha_over_m(&self) -> Exact {
        self.alpha / Exact::from_int(self.m as i128)
    }

    pub fn beta_over_n(&self) -> Exact {
        self.beta / Exact::from_int(self.n as i128)
    }

    /// Parse `m=1,n=1,p=2,q=4,alpha=1/4,beta=1/4`.
    pub fn parse_spec(s: &str) -> Result<Self> {
        let mut m = None;
        let mut n = None;
        let mut p = None;
        let mut q = None;
        let mut alpha = None;
        let mut beta = None;
        for part in s.split(',') {
            let (key, val) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {part:?}")))?;
            let val = val.trim();
            match key.trim() {
                "m" => m = Some(val.parse::<u32>().map_err(|_| Error::Parse(format!("bad m: {val:?}")))?),
                "n" => n = Some(val.parse::<u32>().map_err(|_| Error::Parse(format!("bad n: {val:?}")))?),
                "p" => p = Some(Exact::parse(val)?),
                "q" => q = Some(Exact::parse(val)?),
                "alpha" => alpha = Some(Exact::parse(val)?),
                "beta" => beta = Some(Exact::parse(val)?),
                other => return Err(Error::Parse(format!("unknown index key {other:?}"))),
            }
        }
        ProductIndices::new(
            m.ok_or_else(|| Error::Parse("missing m".into()))?,
            n.ok_or_else(|| Error::Parse("missing n".into()))?,
            p.ok_or_else(|| Error::Parse("missing p".into()))?,
            q.ok_or_else(|| Error::Parse("missing q".into()))?,
            alpha.ok_or_else(|| Error::Parse("missing alpha".into()))?,
            beta.ok_or_else(|| Error::Parse("missing beta".into()))?,
        )
    }
}
