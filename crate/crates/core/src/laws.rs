//! Index-level decision procedures: regime classification, the one-weight
//! balanced/diagonal law, power-weight characteristic finiteness (the full
//! case analysis collapsed into one predicate with `Δ`-brackets and the
//! `0₊` strictness convention), the product Stein–Weiss conditions with
//! their two equivalent routes, and optimal characteristic powers.

use crate::error::{Error, Result};
use crate::indices::{conjugate, delta_bracket, Exact, ProductIndices, BOUNDARY_TOL};
use crate::weights::{a1_product_membership, Membership, WeightSpec};
use serde::{Deserialize, Serialize};

/// Tolerance for equality conditions when inputs are not exact rationals.
pub const EQUALITY_TOL: f64 = 1e-10;

/// Index regime for `Γ = 1/p − 1/q` against `α/m`, `β/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `α/m = β/n = Γ > 0`
    Balanced,
    /// `min{α/m, β/n} = Γ > 0` with `α/m ≠ β/n`
    HalfBalanced,
    /// `min{α/m, β/n} > Γ > 0`
    StrictlySubbalanced,
    /// `Γ > min{α/m, β/n}`: finiteness of the tailed characteristic forces
    /// the measures onto disjoint carriers
    Supercritical,
    /// `Γ ≤ 0`
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    True,
    False,
    Unknown,
}

impl Decision {
    pub fn is_true(&self) -> bool {
        matches!(self, Decision::True)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

/// One checked inequality or equality with its numeric evidence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub lhs: f64,
    pub relation: Relation,
    pub rhs: f64,
    pub satisfied: bool,
    /// True when a `0₊` boundary tightened this condition to strict.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub strictened: bool,
}

/// Structured decision output: a boolean (or unknown) plus the witnessing
/// inequality trail.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: Decision,
    pub conditions: Vec<Condition>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub strictness_notes: Vec<String>,
}

impl Verdict {
    fn from_conditions(conditions: Vec<Condition>, notes: Vec<String>) -> Verdict {
        let decision = if conditions.iter().all(|c| c.satisfied) {
            Decision::True
        } else {
            Decision::False
        };
        Verdict { decision, conditions, strictness_notes: notes }
    }

    /// Smallest absolute slack over the inequality conditions (distance
    /// to a verdict flip). Equality conditions are excluded: they are
    /// decided exactly on rational inputs, and an exact equality is not
    /// a near-boundary event.
    pub fn min_margin(&self) -> f64 {
        self.conditions
            .iter()
            .filter(|c| c.relation != Relation::Eq)
            .map(|c| (c.lhs - c.rhs).abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn witnesses(&self) -> Vec<&Condition> {
        self.conditions.iter().filter(|c| !c.satisfied).collect()
    }
}

fn cond_cmp(name: &str, lhs: Exact, relation: Relation, rhs: Exact, strictened: bool) -> Condition {
    use std::cmp::Ordering::*;
    let ord = lhs.cmp_within(&rhs, EQUALITY_TOL);
    let satisfied = match relation {
        Relation::Lt => ord == Less,
        Relation::Le => ord != Greater,
        Relation::Eq => ord == Equal,
        Relation::Ge => ord != Less,
        Relation::Gt => ord == Greater,
    };
    Condition {
        name: name.to_string(),
        lhs: lhs.value(),
        relation,
        rhs: rhs.value(),
        satisfied,
        strictened,
    }
}

/// Like [`cond_cmp`] for a `≤` that the `0₊` convention may tighten to `<`.
fn cond_le_maybe_strict(name: &str, lhs: Exact, rhs: Exact, strict: bool) -> Condition {
    cond_cmp(name, lhs, if strict { Relation::Lt } else { Relation::Le }, rhs, strict)
}

/// Classify the index tuple into its regime.
pub fn classify(idx: &ProductIndices) -> Regime {
    let gamma = idx.gamma_gap();
    let zero = Exact::from_int(0);
    if gamma.cmp_within(&zero, BOUNDARY_TOL) != std::cmp::Ordering::Greater {
        return Regime::Degenerate;
    }
    let am = idx.alpha_over_m();
    let bn = idx.beta_over_n();
    let min = if am.cmp_within(&bn, BOUNDARY_TOL) == std::cmp::Ordering::Greater { bn } else { am };
    match min.cmp_within(&gamma, BOUNDARY_TOL) {
        std::cmp::Ordering::Less => Regime::Supercritical,
        std::cmp::Ordering::Greater => Regime::StrictlySubbalanced,
        std::cmp::Ordering::Equal => {
            if am.cmp_within(&bn, BOUNDARY_TOL) == std::cmp::Ordering::Equal {
                Regime::Balanced
            } else {
                Regime::HalfBalanced
            }
        }
    }
}

/// Necessity (and, given a finite characteristic, sufficiency) of the
/// balanced diagonal condition for the one-weight inequality:
/// `1/p − 1/q = α/m = β/n` with `p < q`.
pub fn one_weight_necessary(idx: &ProductIndices) -> Verdict {
    let gamma = idx.gamma_gap();
    let conditions = vec![
        cond_cmp("alpha/m = gamma_gap", idx.alpha_over_m(), Relation::Eq, gamma, false),
        cond_cmp("beta/n = gamma_gap", idx.beta_over_n(), Relation::Eq, gamma, false),
        cond_cmp("gamma_gap > 0", gamma, Relation::Gt, Exact::from_int(0), false),
    ];
    Verdict::from_conditions(conditions, vec![])
}

/// Finiteness of the Muckenhoupt rectangle characteristic for the radial
/// power weight pair `w = |(x,y)|^{−γ}`, `v = |(x,y)|^{δ}`:
/// local integrability, the power-weight equality, and two two-sided
/// exponent lines with `Δ`-brackets. An exactly vanishing positive part
/// inside the bracket on one side of a line makes that side strict.
pub fn power_characteristic_finite(idx: &ProductIndices, gamma: Exact, delta: Exact) -> Result<Verdict> {
    let m = Exact::from_int(idx.m as i128);
    let n = Exact::from_int(idx.n as i128);
    let mn = m + n;
    let gap = idx.gamma_gap();
    let p_prime = idx.p_prime();

    let (dm, dm_boundary) = delta_bracket(gamma, delta, idx.m, idx.p, idx.q)?;
    let (dn, dn_boundary) = delta_bracket(gamma, delta, idx.n, idx.p, idx.q)?;
    let dm = Exact::from_f64(dm);
    let dn = Exact::from_f64(dn);

    let gd = gamma + delta;
    let am = idx.alpha_over_m();
    let bn = idx.beta_over_n();

    let mut notes = Vec::new();
    if dm_boundary {
        notes.push("Δ(m) has a positive part at 0₊: α-upper and β-lower lines are strict".to_string());
    }
    if dn_boundary {
        notes.push("Δ(n) has a positive part at 0₊: α-lower and β-upper lines are strict".to_string());
    }

    let conditions = vec![
        cond_cmp("local integrability: gamma*q < m+n", gamma * idx.q, Relation::Lt, mn, false),
        cond_cmp("local integrability: delta*p' < m+n", delta * p_prime, Relation::Lt, mn, false),
        cond_cmp("power weight equality", gap, Relation::Eq, (idx.alpha + idx.beta - gd) / mn, false),
        cond_le_maybe_strict("alpha line, lower", gap + dn / m, am, dn_boundary),
        cond_le_maybe_strict("alpha line, upper", am, gap + gd / m - dm / m, dm_boundary),
        cond_le_maybe_strict("beta line, lower", gap + dm / n, bn, dm_boundary),
        cond_le_maybe_strict("beta line, upper", bn, gap + gd / n - dn / n, dn_boundary),
    ];
    Ok(Verdict::from_conditions(conditions, notes))
}

/// The six sharp one-parameter Stein–Weiss conditions on `R^m` for the
/// weight pair `(|x|^{−γ}, |x|^{δ})`.
pub fn stein_weiss_1param_valid(m: u32, p: Exact, q: Exact, alpha: Exact, gamma: Exact, delta: Exact) -> Result<Verdict> {
    for (name, e) in [("p", &p), ("q", &q)] {
        if !(e.value().is_finite() && e.value() > 1.0) {
            return Err(Error::domain(format!("{name} must lie in (1, ∞)")));
        }
    }
    let md = Exact::from_int(m as i128);
    let p_prime = conjugate(p)?;
    let zero = Exact::from_int(0);
    let conditions = vec![
        cond_cmp("0 < alpha", zero, Relation::Lt, alpha, false),
        cond_cmp("alpha < m", alpha, Relation::Lt, md, false),
        cond_cmp("p <= q", p, Relation::Le, q, false),
        cond_cmp("q*gamma < m", q * gamma, Relation::Lt, md, false),
        cond_cmp("p'*delta < m", p_prime * delta, Relation::Lt, md, false),
        cond_cmp("gamma + delta >= 0", gamma + delta, Relation::Ge, zero, false),
        cond_cmp(
            "power weight equality",
            p.recip() - q.recip(),
            Relation::Eq,
            (alpha - gamma - delta) / md,
            false,
        ),
    ];
    Ok(Verdict::from_conditions(conditions, vec![]))
}

/// Conditions (3) of the product Stein–Weiss theorem (the index route),
/// for the nonproduct power weight pair on `R^m × R^n`, including the
/// exceptional branches `α = m` and `β = n`. Both this route and the
/// characteristic-finiteness route are computed; a disagreement under the
/// standing assumptions is an internal contradiction.
pub fn product_stein_weiss_valid(idx: &ProductIndices, gamma: Exact, delta: Exact) -> Result<Verdict> {
    let m = Exact::from_int(idx.m as i128);
    let n = Exact::from_int(idx.n as i128);
    let mn = m + n;
    let zero = Exact::from_int(0);
    let p_prime = idx.p_prime();
    let q_prime = idx.q_prime();
    let gd = gamma + delta;

    use std::cmp::Ordering::*;
    let alpha_at_m = idx.alpha.cmp_within(&m, BOUNDARY_TOL) == Equal;
    let beta_at_n = idx.beta.cmp_within(&n, BOUNDARY_TOL) == Equal;

    // Standing conditions shared by both routes: index order and kernel
    // local integrability.
    let mut conditions = vec![
        cond_cmp("p <= q", idx.p, Relation::Le, idx.q, false),
        cond_cmp("0 < alpha", zero, Relation::Lt, idx.alpha, false),
        cond_cmp("alpha <= m", idx.alpha, Relation::Le, m, false),
        cond_cmp("0 < beta", zero, Relation::Lt, idx.beta, false),
        cond_cmp("beta <= n", idx.beta, Relation::Le, n, false),
        cond_cmp("local integrability: gamma*q < m+n", gamma * idx.q, Relation::Lt, mn, false),
        cond_cmp("local integrability: delta*p' < m+n", delta * p_prime, Relation::Lt, mn, false),
    ];
    let standing_ok = conditions.iter().all(|c| c.satisfied);

    // Route (3) core conditions.
    let mut route3 = vec![
        cond_cmp(
            "power weight equality",
            idx.gamma_gap() + gd / mn,
            Relation::Eq,
            (idx.alpha + idx.beta) / mn,
            false,
        ),
        cond_cmp("gamma + delta >= 0", gd, Relation::Ge, zero, false),
    ];
    if alpha_at_m || beta_at_n {
        // Exceptional cases: the reduced one-parameter windows.
        if alpha_at_m {
            route3.push(cond_cmp("exceptional alpha=m: beta < n", idx.beta, Relation::Lt, n, false));
            route3.push(cond_cmp("exceptional alpha=m: gamma > m/q", gamma, Relation::Gt, m / idx.q, false));
            route3.push(cond_cmp("exceptional alpha=m: gamma < (m+n)/q", gamma, Relation::Lt, mn / idx.q, false));
            route3.push(cond_cmp("exceptional alpha=m: delta > m/p'", delta, Relation::Gt, m / p_prime, false));
            route3.push(cond_cmp("exceptional alpha=m: delta < (m+n)/p'", delta, Relation::Lt, mn / p_prime, false));
        }
        if beta_at_n {
            route3.push(cond_cmp("exceptional beta=n: alpha < m", idx.alpha, Relation::Lt, m, false));
            route3.push(cond_cmp("exceptional beta=n: gamma > n/q", gamma, Relation::Gt, n / idx.q, false));
            route3.push(cond_cmp("exceptional beta=n: gamma < (m+n)/q", gamma, Relation::Lt, mn / idx.q, false));
            route3.push(cond_cmp("exceptional beta=n: delta > n/p'", delta, Relation::Gt, n / p_prime, false));
            route3.push(cond_cmp("exceptional beta=n: delta < (m+n)/p'", delta, Relation::Lt, mn / p_prime, false));
        }
    } else {
        // Mixed-sign implications. Together with the power weight equality
        // these encode all four exponent lines in their sign regimes.
        let gamma_nonneg = gamma.cmp_within(&zero, BOUNDARY_TOL) != Less;
        let delta_nonpos = delta.cmp_within(&zero, BOUNDARY_TOL) != Greater;
        let delta_nonneg = delta.cmp_within(&zero, BOUNDARY_TOL) != Less;
        let gamma_nonpos = gamma.cmp_within(&zero, BOUNDARY_TOL) != Greater;
        if gamma_nonneg && delta_nonpos {
            route3.push(cond_cmp("beta - n/p < delta", idx.beta - n / idx.p, Relation::Lt, delta, false));
            route3.push(cond_cmp("alpha - m/p < delta", idx.alpha - m / idx.p, Relation::Lt, delta, false));
        }
        if delta_nonneg && gamma_nonpos {
            route3.push(cond_cmp("beta - n/q' < gamma", idx.beta - n / q_prime, Relation::Lt, gamma, false));
            route3.push(cond_cmp("alpha - m/q' < gamma", idx.alpha - m / q_prime, Relation::Lt, gamma, false));
        }
        // The bare conditions above do not pin how α + β splits; the
        // sufficiency proof additionally consumes the bracket lines
        // (positive-part truncations of the star-type bounds). Where the
        // bracket arguments are nonnegative these coincide with the
        // star-type bounds, and the cross-route assertion below checks
        // that coincidence.
        let (dm, dm_b) = delta_bracket(gamma, delta, idx.m, idx.p, idx.q)?;
        let (dn, dn_b) = delta_bracket(gamma, delta, idx.n, idx.p, idx.q)?;
        let gap = idx.gamma_gap();
        let dm_e = Exact::from_f64(dm);
        let dn_e = Exact::from_f64(dn);
        route3.push(cond_le_maybe_strict(
            "bracket line: Gamma + Delta(n)/m <= alpha/m",
            gap + dn_e / m,
            idx.alpha_over_m(),
            dn_b,
        ));
        route3.push(cond_le_maybe_strict(
            "bracket line: alpha/m <= Gamma + (gamma+delta-Delta(m))/m",
            idx.alpha_over_m(),
            gap + (gd - dm_e) / m,
            dm_b,
        ));
        route3.push(cond_le_maybe_strict(
            "bracket line: Gamma + Delta(m)/n <= beta/n",
            gap + dm_e / n,
            idx.beta_over_n(),
            dm_b,
        ));
        route3.push(cond_le_maybe_strict(
            "bracket line: beta/n <= Gamma + (gamma+delta-Delta(n))/n",
            idx.beta_over_n(),
            gap + (gd - dn_e) / n,
            dn_b,
        ));
    }
    let route3_ok = route3.iter().all(|c| c.satisfied);

    // Route (2): finiteness of the rectangle characteristic. The two
    // routes must agree away from exact boundaries.
    let achar = power_characteristic_finite(idx, gamma, delta)?;

    let off_boundary = |v: &[Condition]| v.iter().all(|c| (c.lhs - c.rhs).abs() > 1e-9 || c.relation == Relation::Eq);
    if standing_ok
        && route3_ok != achar.decision.is_true()
        && off_boundary(&route3)
        && off_boundary(&achar.conditions)
    {
        return Err(Error::Contradiction(format!(
            "Stein–Weiss index route says {route3_ok}, characteristic finiteness says {:?} \
             for m={}, n={}, p={}, q={}, alpha={}, beta={}, gamma={gamma}, delta={delta}",
            achar.decision, idx.m, idx.n, idx.p, idx.q, idx.alpha, idx.beta
        )));
    }

    conditions.extend(route3);
    let notes = achar.strictness_notes.clone();
    Ok(Verdict::from_conditions(conditions, notes))
}

/// Half-balanced two-weight sufficiency: the characteristic controls the
/// norm provided `w^q ∈ A₁ × A₁` or `v^{−p′} ∈ A₁ × A₁`.
pub fn half_balanced_sufficiency(idx: &ProductIndices, v: &WeightSpec, w: &WeightSpec) -> Result<Verdict> {
    if classify(idx) != Regime::HalfBalanced {
        return Err(Error::Refusal(format!(
            "half-balanced sufficiency requires the HalfBalanced regime, got {:?}",
            classify(idx)
        )));
    }
    let wq = w.pow(idx.q.value());
    let vmp = v.pow(-idx.p_prime().value());
    let mw = a1_product_membership(&wq, idx.m, idx.n);
    let mv = a1_product_membership(&vmp, idx.m, idx.n);

    let side = |name: &str, m: &Membership| Condition {
        name: name.to_string(),
        lhs: match m {
            Membership::Member { bound: Some(b) } => *b,
            Membership::Member { bound: None } => f64::NAN,
            _ => f64::NAN,
        },
        relation: Relation::Le,
        rhs: f64::INFINITY,
        satisfied: m.is_member(),
        strictened: false,
    };
    let conditions = vec![side("w^q in A1 x A1", &mw), side("v^{-p'} in A1 x A1", &mv)];

    let decision = if mw.is_member() || mv.is_member() {
        Decision::True
    } else if matches!(mw, Membership::Unknown) || matches!(mv, Membership::Unknown) {
        Decision::Unknown
    } else {
        Decision::False
    };
    Ok(Verdict { decision, conditions, strictness_notes: vec![] })
}

/// Optimal power of the characteristic controlling the operator norm:
/// `1 + max{p′/q, q/p′}` for one parameter, `2 + 2max{p′/q, q/p′}` for two.
pub fn optimal_exponent(p: Exact, q: Exact, parameters: u8) -> Result<f64> {
    let p_prime = conjugate(p)?.value();
    let qv = q.value();
    if !(qv.is_finite() && qv > 1.0) {
        return Err(Error::domain("q must lie in (1, ∞)"));
    }
    let core = 1.0 + (p_prime / qv).max(qv / p_prime);
    match parameters {
        1 => Ok(core),
        2 => Ok(2.0 * core),
        _ => Err(Error::domain("parameters must be 1 or 2")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn idx(m: u32, n: u32, p: (i128, i128), q: (i128, i128), a: (i128, i128), b: (i128, i128)) -> ProductIndices {
        ProductIndices::new(
            m,
            n,
            Exact::from_ratio(p.0, p.1),
            Exact::from_ratio(q.0, q.1),
            Exact::from_ratio(a.0, a.1),
            Exact::from_ratio(b.0, b.1),
        )
        .unwrap()
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&idx(1, 1, (2, 1), (4, 1), (1, 4), (1, 4))), Regime::Balanced);
        assert_eq!(classify(&idx(1, 1, (2, 1), (4, 1), (1, 4), (1, 2))), Regime::HalfBalanced);
        assert_eq!(classify(&idx(1, 1, (2, 1), (4, 1), (1, 2), (1, 2))), Regime::StrictlySubbalanced);
        assert_eq!(classify(&idx(1, 1, (2, 1), (4, 1), (1, 8), (1, 2))), Regime::Supercritical);
        assert_eq!(classify(&idx(1, 1, (3, 1), (3, 1), (1, 2), (1, 2))), Regime::Degenerate);
    }

    #[test]
    fn one_weight_necessary_examples() {
        let v = one_weight_necessary(&idx(1, 2, (2, 1), (4, 1), (1, 4), (1, 2)));
        assert!(v.decision.is_true());

        let v = one_weight_necessary(&idx(1, 1, (2, 1), (2, 1), (1, 4), (1, 4)));
        assert_eq!(v.decision, Decision::False);

        let v = one_weight_necessary(&idx(1, 1, (2, 1), (4, 1), (3, 10), (1, 4)));
        assert_eq!(v.decision, Decision::False);
        let w = v.witnesses();
        assert!(w.iter().any(|c| c.name.contains("alpha/m")));
        assert!((w[0].lhs - 0.3).abs() < 1e-15);
        assert!((w[0].rhs - 0.25).abs() < 1e-15);
    }

    #[test]
    fn power_characteristic_examples() {
        let zero = Exact::from_int(0);
        // Unweighted balanced tuple: the lines pinch to α/m = Γ.
        let v = power_characteristic_finite(&idx(1, 1, (2, 1), (4, 1), (1, 4), (1, 4)), zero, zero).unwrap();
        assert!(v.decision.is_true());

        let v = power_characteristic_finite(&idx(1, 1, (2, 1), (4, 1), (3, 10), (1, 5)), zero, zero).unwrap();
        assert_eq!(v.decision, Decision::False);
        assert!(v.witnesses().iter().any(|c| c.name == "alpha line, upper"));

        // Δ(1) = (0.6 − 0.5)₊ + (0.6 − 0.5)₊ = 0.2, window 0.2 ≤ 0.6 ≤ 1.0.
        let g = Exact::from_ratio(3, 5);
        let v = power_characteristic_finite(&idx(1, 1, (2, 1), (2, 1), (3, 5), (3, 5)), g, g).unwrap();
        assert!(v.decision.is_true(), "{:?}", v.witnesses());
    }

    #[test]
    fn boundary_strictness_flips_verdict() {
        // γ = m/q exactly with the α-upper line at equality: the 0₊
        // convention forces strictness, so the verdict is false.
        // m = n = 1, p = q = 2: Γ = 0, γ = 1/2, δ = 0; α + β = 1/2.
        // Window for α: [Δ(1), γ + δ − Δ(1)] = [0₊, 1/2 − 0₊].
        let g = Exact::from_ratio(1, 2);
        let d = Exact::from_int(0);
        let v = power_characteristic_finite(&idx(1, 1, (2, 1), (2, 1), (1, 2), (0, 1)), g, d).unwrap();
        // α = 1/2 hits the strict upper bound.
        assert_eq!(v.decision, Decision::False);
        assert!(!v.strictness_notes.is_empty());
        // Strictly inside the window it is finite.
        let v = power_characteristic_finite(&idx(1, 1, (2, 1), (2, 1), (1, 4), (1, 4)), g, d).unwrap();
        assert!(v.decision.is_true(), "{:?}", v.witnesses());
    }

    #[test]
    fn product_stein_weiss_examples() {
        let zero = Exact::from_int(0);
        let v = product_stein_weiss_valid(&idx(1, 1, (2, 1), (4, 1), (1, 4), (1, 4)), zero, zero).unwrap();
        assert!(v.decision.is_true());

        let v = product_stein_weiss_valid(&idx(1, 1, (4, 1), (2, 1), (1, 4), (1, 4)), zero, zero).unwrap();
        assert_eq!(v.decision, Decision::False);
        assert!(v.witnesses().iter().any(|c| c.name == "p <= q"));

        // β < 0 forces a line failure; both routes agree on false.
        let g = Exact::from_ratio(1, 10);
        let d = Exact::from_ratio(-1, 20);
        let v = product_stein_weiss_valid(&idx(1, 1, (2, 1), (2, 1), (1, 2), (-9, 20)), g, d).unwrap();
        assert_eq!(v.decision, Decision::False);
        let achar = power_characteristic_finite(&idx(1, 1, (2, 1), (2, 1), (1, 2), (-9, 20)), g, d).unwrap();
        assert_eq!(achar.decision, Decision::False);
    }

    #[test]
    fn exceptional_alpha_equals_m() {
        // α = m with γ, δ in the shifted windows: valid, and agreeing with
        // the characteristic route.
        let g = Exact::from_ratio(9, 10);
        let d = Exact::from_ratio(9, 10);
        // p = q = 2, m = n = 1: Γ = 0, α + β = γ + δ = 1.8 → β = 0.8.
        let v = product_stein_weiss_valid(&idx(1, 1, (2, 1), (2, 1), (1, 1), (4, 5)), g, d).unwrap();
        assert!(v.decision.is_true(), "{:?}", v.witnesses());
        // Outside the shifted window (γ < m/q) it fails.
        let g2 = Exact::from_ratio(2, 5);
        let v = product_stein_weiss_valid(&idx(1, 1, (2, 1), (2, 1), (1, 1), (3, 10)), g2, d).unwrap();
        assert_eq!(v.decision, Decision::False);
    }

    #[test]
    fn stein_weiss_1param_examples() {
        let e = |n, d| Exact::from_ratio(n, d);
        let v = stein_weiss_1param_valid(1, e(2, 1), e(4, 1), e(1, 4), e(0, 1), e(0, 1)).unwrap();
        assert!(v.decision.is_true());

        let v = stein_weiss_1param_valid(1, e(2, 1), e(4, 1), e(1, 4), e(1, 4), e(0, 1)).unwrap();
        assert_eq!(v.decision, Decision::False);
        assert!(v.witnesses().iter().any(|c| c.name == "q*gamma < m"));

        let v = stein_weiss_1param_valid(2, e(2, 1), e(2, 1), e(1, 1), e(3, 5), e(2, 5)).unwrap();
        assert!(v.decision.is_true());
    }

    #[test]
    fn half_balanced_examples() {
        let half = idx(1, 1, (2, 1), (4, 1), (1, 4), (1, 2));
        let one = WeightSpec::Constant { c: 1.0 };
        let v = half_balanced_sufficiency(&half, &one, &one).unwrap();
        assert!(v.decision.is_true());

        // Half-example pair: v = |y|^{-m/q} ⊗ ... with w = (1+|x|)^{-m};
        // w^q has a decaying shifted power (member fails by exponent) and
        // v^{-p'} has a positive power: decision false.
        let v_w = WeightSpec::Product {
            left: Box::new(WeightSpec::ShiftedPower { exponent: -1.0, factor: 1 }),
            right: Box::new(WeightSpec::Constant { c: 1.0 }),
        };
        let v_v = WeightSpec::Product {
            left: Box::new(WeightSpec::Constant { c: 1.0 }),
            right: Box::new(WeightSpec::RadialPower { exponent: -0.25 }),
        };
        let verdict = half_balanced_sufficiency(&half, &v_v, &v_w).unwrap();
        // w^q = (1+|x|)^{-4}: exponent -4 < -1, not A1. v^{-p'} = |y|^{0.5}: not A1.
        assert_eq!(verdict.decision, Decision::False);

        // Constant ⊗ |y|^{-1/2}: v^{-p'} = |y|^{1} not member, but w side
        // constant-member ⇒ true.
        let w2 = WeightSpec::Product {
            left: Box::new(WeightSpec::Constant { c: 1.0 }),
            right: Box::new(WeightSpec::RadialPower { exponent: -0.125 }),
        };
        let verdict = half_balanced_sufficiency(&half, &one, &w2).unwrap();
        assert!(verdict.decision.is_true());

        let bal = idx(1, 1, (2, 1), (4, 1), (1, 4), (1, 4));
        assert!(half_balanced_sufficiency(&bal, &one, &one).is_err());
    }

    #[test]
    fn optimal_exponent_examples() {
        let two = Exact::from_int(2);
        let four = Exact::from_int(4);
        assert_eq!(optimal_exponent(two, four, 1).unwrap(), 3.0);
        assert_eq!(optimal_exponent(two, two, 1).unwrap(), 2.0);
        assert_eq!(optimal_exponent(two, four, 2).unwrap(), 6.0);
    }

    use rand::Rng as _;

    fn random_exact(rng: &mut impl rand::Rng, lo: f64, hi: f64) -> Exact {
        // Rationals with denominator ≤ 24 inside [lo, hi].
        let den = rng.gen_range(2i128..=24);
        let nlo = (lo * den as f64).ceil() as i128;
        let nhi = (hi * den as f64).floor() as i128;
        Exact::from_ratio(rng.gen_range(nlo..=nhi), den)
    }

    #[test]
    fn duality_symmetry_sampled() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xA1B2);
        for _ in 0..500 {
            let m = rng.gen_range(1..=3u32);
            let n = rng.gen_range(1..=3u32);
            let p = random_exact(&mut rng, 1.1, 6.0);
            let q = random_exact(&mut rng, 1.1, 6.0);
            let alpha = random_exact(&mut rng, -1.0, 3.0);
            let beta = random_exact(&mut rng, -1.0, 3.0);
            let gamma = random_exact(&mut rng, -2.0, 2.0);
            let delta = random_exact(&mut rng, -2.0, 2.0);
            let a = ProductIndices::new(m, n, p, q, alpha, beta).unwrap();
            let dual = ProductIndices::new(m, n, conjugate(q).unwrap(), conjugate(p).unwrap(), alpha, beta).unwrap();
            let v1 = power_characteristic_finite(&a, gamma, delta).unwrap();
            let v2 = power_characteristic_finite(&dual, delta, gamma).unwrap();
            assert_eq!(v1.decision, v2.decision, "duality failed at {a:?} γ={gamma} δ={delta}");
        }
    }

    #[test]
    fn corollary_bounds_on_finite_samples() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xBEEF);
        let mut found = 0;
        for _ in 0..4000 {
            let m = rng.gen_range(1..=3u32);
            let n = rng.gen_range(1..=3u32);
            let p = random_exact(&mut rng, 1.1, 6.0);
            let q = random_exact(&mut rng, 1.1, 6.0);
            let gamma = random_exact(&mut rng, -1.5, 1.5);
            let delta = random_exact(&mut rng, -1.5, 1.5);
            // Force the power weight equality, then sample α in the window.
            let gap = gamma_gap_of(p, q);
            let total = gap * Exact::from_int((m + n) as i128) + gamma + delta;
            let alpha = random_exact(&mut rng, -0.5, 2.5);
            let beta = total - alpha;
            let Ok(idx) = ProductIndices::new(m, n, p, q, alpha, beta) else { continue };
            let v = power_characteristic_finite(&idx, gamma, delta).unwrap();
            if !v.decision.is_true() {
                continue;
            }
            found += 1;
            let md = m as f64;
            let nd = n as f64;
            let qp = conjugate(q).unwrap().value();
            let pv = p.value();
            let tol = 1e-9;
            assert!(alpha.value() <= md + tol && beta.value() <= nd + tol);
            // The four min-bounds of the corollary: α/m ≤ min{γ/m + 1/q′, δ/m + 1/p}
            // and the β/n analogue.
            let am = alpha.value() / md;
            assert!(am <= gamma.value() / md + 1.0 / qp + tol);
            assert!(am <= delta.value() / md + 1.0 / pv + tol);
            let bn = beta.value() / nd;
            assert!(bn <= gamma.value() / nd + 1.0 / qp + tol);
            assert!(bn <= delta.value() / nd + 1.0 / pv + tol);
        }
        assert!(found > 30, "sampler never hit the finite region ({found})");
    }

    fn gamma_gap_of(p: Exact, q: Exact) -> Exact {
        crate::indices::gamma_gap(p, q).unwrap()
    }

    proptest! {
        /// The three regimes partition Γ > 0 tuples.
        #[test]
        fn classify_total_and_exclusive(p in 1.05f64..5.0, dq in 0.01f64..4.0, a in 0.01f64..2.9, b in 0.01f64..2.9) {
            let q = p + dq;
            let idx = ProductIndices::from_f64(1, 1, p, q, a, b).unwrap();
            let r = classify(&idx);
            prop_assert!(matches!(
                r,
                Regime::Balanced | Regime::HalfBalanced | Regime::StrictlySubbalanced | Regime::Supercritical
            ));
        }
    }
}
