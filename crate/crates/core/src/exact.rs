//! Exact rational masses and logarithms of large integers.
//!
//! Upper-tail probabilities at moderate `n` fall far below `f64` resolution
//! relative to one, so `1 - maxflow` has to be formed in integers. Masses
//! that are (the nearest doubles to) small-denominator rationals are
//! recovered by continued fractions.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use crate::measures::Dist;

/// Largest denominator accepted when recovering a rational mass.
pub const MAX_DENOMINATOR: u64 = 1_000_000;

/// The rational `p/q` (lowest terms, `q ≤ MAX_DENOMINATOR`) whose nearest
/// double is `x`, if one exists.
pub fn rationalize(x: f64) -> Option<(u64, u64)> {
    if !(0.0..=1.0).contains(&x) {
        return None;
    }
    if x == 0.0 {
        return Some((0, 1));
    }
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a > MAX_DENOMINATOR as f64 {
            return None;
        }
        let a = a as u64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > MAX_DENOMINATOR {
            return None;
        }
        if h2 as f64 / k2 as f64 == x {
            return Some((h2, k2));
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a as f64;
        if frac <= 0.0 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

/// Integer numerators over a common denominator, summing exactly to it.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactMasses {
    pub numerators: Vec<BigUint>,
    pub denominator: BigUint,
}

impl ExactMasses {
    /// `None` if some mass has no small rational form or the rationals do not
    /// sum to exactly one.
    pub fn from_dist(d: &Dist) -> Option<Self> {
        let fracs: Vec<(u64, u64)> = d
            .mass()
            .iter()
            .map(|&m| rationalize(m))
            .collect::<Option<_>>()?;
        let den = fracs.iter().fold(1u64, |acc, &(_, q)| acc.lcm(&q));
        let den = BigUint::from(den);
        let numerators: Vec<BigUint> = fracs
            .iter()
            .map(|&(p, q)| BigUint::from(p) * (&den / BigUint::from(q)))
            .collect();
        let total: BigUint = numerators.iter().sum();
        (total == den).then_some(ExactMasses {
            numerators,
            denominator: den,
        })
    }
}

/// Natural logarithm of a big integer; `-∞` for zero.
pub fn ln_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    let shift = bits.saturating_sub(64);
    let top = (x >> shift).to_u64().unwrap_or(u64::MAX) as f64;
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// `ln(a / b)` for big integers.
pub fn ln_ratio(a: &BigUint, b: &BigUint) -> f64 {
    ln_big(a) - ln_big(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_common_fractions() {
        assert_eq!(rationalize(0.1), Some((1, 10)));
        assert_eq!(rationalize(0.5), Some((1, 2)));
        assert_eq!(rationalize(0.9), Some((9, 10)));
        assert_eq!(rationalize(1.0 / 3.0), Some((1, 3)));
        assert_eq!(rationalize(0.3), Some((3, 10)));
        assert_eq!(rationalize(1.0), Some((1, 1)));
        assert_eq!(rationalize(std::f64::consts::FRAC_1_PI), None);
    }

    #[test]
    fn exact_masses_sum_to_denominator() {
        let d = Dist::from_mass(vec![0.1, 0.25, 0.65]).unwrap();
        let e = ExactMasses::from_dist(&d).unwrap();
        assert_eq!(e.denominator, BigUint::from(20u32));
        assert_eq!(
            e.numerators,
            vec![2u32, 5, 13]
                .into_iter()
                .map(BigUint::from)
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn ln_big_matches_f64_and_scales() {
        let x = BigUint::from(123456789u64);
        assert!((ln_big(&x) - 123456789f64.ln()).abs() < 1e-14);
        let big = BigUint::from(10u32).pow(800);
        assert!((ln_big(&big) - 800.0 * 10f64.ln()).abs() < 1e-9);
    }
}
