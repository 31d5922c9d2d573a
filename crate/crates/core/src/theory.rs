//! Finite-alphabet checks for weak unlearning and the filtering bound.
//!
//! Distributions live on a small ordered alphabet; every statement "for all
//! events O" is checked by enumerating all nonempty subsets. Subsets are
//! bitmasks over alphabet positions and are visited in increasing mask
//! order, which is also the tie-break order for reported worst events.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{FastError, Result};
use crate::numeric::{kahan_sum, KahanSum};

pub const MAX_ALPHABET: usize = 20;
pub const TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    alphabet: Vec<String>,
    mass: Vec<f64>,
}

impl FiniteDistribution {
    pub fn new(alphabet: Vec<String>, mass: Vec<f64>) -> Result<Self> {
        if alphabet.is_empty() {
            return Err(FastError::Empty("alphabet"));
        }
        if alphabet.len() != mass.len() {
            return Err(FastError::DimensionMismatch {
                expected: alphabet.len(),
                found: mass.len(),
            });
        }
        if alphabet.len() > MAX_ALPHABET {
            return Err(FastError::Invalid(format!(
                "alphabet of {} outcomes exceeds the enumeration cap of {MAX_ALPHABET}",
                alphabet.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = alphabet.iter().find(|a| !seen.insert(*a)) {
            return Err(FastError::Invalid(format!("duplicate outcome `{dup}`")));
        }
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(FastError::Invalid("masses must be finite and nonnegative".into()));
        }
        let total = kahan_sum(mass.iter().copied());
        if (total - 1.0).abs() > TOLERANCE {
            return Err(FastError::Invalid(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { alphabet, mass })
    }

    /// Outcomes named `o0, o1, ...`.
    pub fn from_masses(mass: Vec<f64>) -> Result<Self> {
        let alphabet = (0..mass.len()).map(|i| format!("o{i}")).collect();
        Self::new(alphabet, mass)
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Probability of the event encoded by `mask`.
    pub fn event(&self, mask: u32) -> f64 {
        let mut acc = KahanSum::new();
        let mut bits = mask;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            acc.add(self.mass[i]);
            bits &= bits - 1;
        }
        acc.total()
    }

    pub fn event_outcomes(&self, mask: u32) -> Vec<String> {
        (0..self.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| self.alphabet[i].clone())
            .collect()
    }

    fn require_positive(&self) -> Result<()> {
        match self.mass.iter().position(|m| *m <= 0.0) {
            Some(i) => Err(FastError::ZeroProbability(format!("{{{}}}", self.alphabet[i]))),
            None => Ok(()),
        }
    }

    /// Parses `outcome_id,probability` lines; blank lines and `#` comments are skipped.
    pub fn parse_delimited(text: &str) -> Result<Self> {
        let mut alphabet = Vec::new();
        let mut mass = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, p) = line
                .split_once(',')
                .ok_or_else(|| FastError::Manifest(format!("line {}: expected `outcome,probability`", lineno + 1)))?;
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|_| FastError::Manifest(format!("line {}: bad probability `{}`", lineno + 1, p.trim())))?;
            alphabet.push(id.trim().to_owned());
            mass.push(p);
        }
        Self::new(alphabet, mass)
    }

    pub fn to_delimited(&self) -> String {
        let mut out = String::new();
        for (a, m) in self.alphabet.iter().zip(&self.mass) {
            let _ = writeln!(out, "{a},{m:.16e}");
        }
        out
    }
}

fn same_alphabet(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<()> {
    if p.alphabet != q.alphabet {
        return Err(FastError::AlphabetMismatch);
    }
    Ok(())
}

fn events(n: usize) -> std::ops::Range<u32> {
    1..(1u32 << n)
}

/// `sup_O |ln P(O) - ln Q(O)|` over all nonempty events.
pub fn ln_tv_distance(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<f64> {
    Ok(ln_tv_with_event(p, q)?.0)
}

fn ln_tv_with_event(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<(f64, u32)> {
    same_alphabet(p, q)?;
    p.require_positive()?;
    q.require_positive()?;
    let mut best = (0.0, 1u32);
    for mask in events(p.len()) {
        let gap = (p.event(mask).ln() - q.event(mask).ln()).abs();
        if gap > best.0 {
            best = (gap, mask);
        }
    }
    Ok(best)
}

/// Definition of exact weak unlearning: equal probability on every event.
pub fn check_exact_weak_unlearning(pr: &FiniteDistribution, pu: &FiniteDistribution) -> Result<bool> {
    check_approx_weak_unlearning(pr, pu, 0.0, 0.0)
}

/// `(eps, delta)` weak unlearning: both `Pr(O) <= e^eps Pu(O) + delta` and
/// `Pu(O) <= e^eps Pr(O) + delta` on every event.
pub fn check_approx_weak_unlearning(
    pr: &FiniteDistribution,
    pu: &FiniteDistribution,
    eps: f64,
    delta: f64,
) -> Result<bool> {
    Ok(first_approx_violation(pr, pu, eps, delta)?.is_none())
}

fn first_approx_violation(
    pr: &FiniteDistribution,
    pu: &FiniteDistribution,
    eps: f64,
    delta: f64,
) -> Result<Option<u32>> {
    same_alphabet(pr, pu)?;
    if !(eps >= 0.0 && delta >= 0.0) {
        return Err(FastError::Invalid(format!("eps and delta must be >= 0, got ({eps}, {delta})")));
    }
    let scale = eps.exp();
    for mask in events(pr.len()) {
        let (a, b) = (pr.event(mask), pu.event(mask));
        if a > scale * b + delta + TOLERANCE || b > scale * a + delta + TOLERANCE {
            return Ok(Some(mask));
        }
    }
    Ok(None)
}

/// Inequalities of the corollary: `Pb` and `Pu` within a multiplicative
/// factor `e^(eps + eps_prime)` of each other on every event.
pub fn check_corollary(
    pb: &FiniteDistribution,
    pu: &FiniteDistribution,
    eps: f64,
    eps_prime: f64,
) -> Result<bool> {
    check_approx_weak_unlearning(pb, pu, eps + eps_prime, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub holds: bool,
    /// Event with the largest left-hand side.
    pub worst_event: Vec<String>,
    pub lhs: f64,
    /// `eps + eps1 + eps2`.
    pub rhs: f64,
    /// `rhs - lhs` at the worst event.
    pub slack: f64,
    pub eps: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub events_checked: u64,
    pub violations: u64,
}

/// Checks `|ln Pb(O) - ln Pu(O)| <= eps + eps1 + eps2` on every event, with
/// `eps1 = lnTV(PXr, Pr)` and `eps2 = lnTV(PXr, Pb)`.
///
/// Returns `PremiseViolated` (not a failing report) when `Pu` is not an
/// `(eps, 0)` weak unlearning of `Pr`.
pub fn verify_theorem_bound(
    pxr: &FiniteDistribution,
    pr: &FiniteDistribution,
    pb: &FiniteDistribution,
    pu: &FiniteDistribution,
    eps: f64,
) -> Result<BoundReport> {
    same_alphabet(pxr, pr)?;
    same_alphabet(pxr, pb)?;
    same_alphabet(pxr, pu)?;
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(FastError::Invalid(format!("eps must be finite and >= 0, got {eps}")));
    }
    if let Some(mask) = first_approx_violation(pr, pu, eps, 0.0)? {
        return Err(FastError::PremiseViolated(format!(
            "unlearned model is not ({eps}, 0)-close to the retrained model on event {{{}}}",
            pr.event_outcomes(mask).join(",")
        )));
    }
    let eps1 = ln_tv_distance(pxr, pr)?;
    let eps2 = ln_tv_distance(pxr, pb)?;
    pu.require_positive()?;
    let rhs = eps + eps1 + eps2;

    let mut worst = (f64::NEG_INFINITY, 1u32);
    let mut violations = 0u64;
    let mut checked = 0u64;
    for mask in events(pxr.len()) {
        let lhs = (pb.event(mask).ln() - pu.event(mask).ln()).abs();
        checked += 1;
        if lhs > rhs + TOLERANCE {
            violations += 1;
        }
        if lhs > worst.0 {
            worst = (lhs, mask);
        }
    }
    Ok(BoundReport {
        holds: violations == 0,
        worst_event: pxr.event_outcomes(worst.1),
        lhs: worst.0,
        rhs,
        slack: rhs - worst.0,
        eps,
        eps1,
        eps2,
        events_checked: checked,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(m: &[f64]) -> FiniteDistribution {
        FiniteDistribution::from_masses(m.to_vec()).unwrap()
    }

    #[test]
    fn validation() {
        assert!(FiniteDistribution::from_masses(vec![0.5, 0.6]).is_err());
        assert!(FiniteDistribution::from_masses(vec![-0.5, 1.5]).is_err());
        assert!(FiniteDistribution::from_masses(vec![1.0 / 21.0; 21]).is_err());
        assert!(FiniteDistribution::new(vec!["a".into(), "a".into()], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn ln_tv_examples() {
        let p = dist(&[0.5, 0.5]);
        assert_eq!(ln_tv_distance(&p, &p).unwrap(), 0.0);
        let q = dist(&[0.25, 0.75]);
        let expect = 2f64.ln();
        assert!((ln_tv_distance(&p, &q).unwrap() - expect).abs() < 1e-15);
        let one = dist(&[1.0]);
        assert_eq!(ln_tv_distance(&one, &one).unwrap(), 0.0);
    }

    #[test]
    fn ln_tv_needs_positive_mass() {
        let p = dist(&[1.0, 0.0]);
        let q = dist(&[0.5, 0.5]);
        assert!(matches!(ln_tv_distance(&p, &q), Err(FastError::ZeroProbability(_))));
    }

    #[test]
    fn exact_checks() {
        let p = dist(&[0.2, 0.3, 0.5]);
        assert!(check_exact_weak_unlearning(&p, &p).unwrap());
        let q = dist(&[0.2 + 1e-9, 0.3 - 1e-9, 0.5]);
        assert!(!check_exact_weak_unlearning(&p, &q).unwrap());
        let renamed = FiniteDistribution::new(vec!["b".into(), "a".into(), "c".into()], vec![0.2, 0.3, 0.5]).unwrap();
        let named = FiniteDistribution::new(vec!["a".into(), "b".into(), "c".into()], vec![0.2, 0.3, 0.5]).unwrap();
        assert!(matches!(
            check_exact_weak_unlearning(&named, &renamed),
            Err(FastError::AlphabetMismatch)
        ));
    }

    #[test]
    fn approx_checks() {
        let pr = dist(&[1.0, 0.0]);
        let pu = dist(&[0.0, 1.0]);
        assert!(!check_approx_weak_unlearning(&pr, &pu, 0.0, 0.5).unwrap());
        assert!(check_approx_weak_unlearning(&pr, &pu, 0.0, 1.0).unwrap());
        let p = dist(&[0.1, 0.9]);
        assert!(check_approx_weak_unlearning(&p, &p, 0.3, 0.0).unwrap());
    }

    #[test]
    fn trivial_bound() {
        let p = dist(&[0.1, 0.2, 0.3, 0.4]);
        let r = verify_theorem_bound(&p, &p, &p, &p, 0.0).unwrap();
        assert!(r.holds);
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.rhs, 0.0);
        assert_eq!(r.events_checked, 15);
    }

    #[test]
    fn premise_failure_is_distinct() {
        let p = dist(&[0.5, 0.5]);
        let u = dist(&[0.1, 0.9]);
        assert!(matches!(
            verify_theorem_bound(&p, &p, &p, &u, 0.1),
            Err(FastError::PremiseViolated(_))
        ));
    }

    #[test]
    fn delimited_round_trip() {
        let p = FiniteDistribution::new(vec!["cat".into(), "dog".into()], vec![0.3, 0.7]).unwrap();
        let text = format!("# pets\n\n{}", p.to_delimited());
        assert_eq!(FiniteDistribution::parse_delimited(&text).unwrap(), p);
        assert!(FiniteDistribution::parse_delimited("cat;0.5\n").is_err());
    }
}
