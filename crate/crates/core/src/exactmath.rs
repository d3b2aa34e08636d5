//! Exact rational arithmetic, certified square roots and vector norms.
//!
//! Everything downstream (spectral bounds, acceptance probabilities, gap
//! accounting) is checked in exact rational arithmetic. The only
//! approximation anywhere is `cert_sqrt`, and that one carries its error
//! bound in its type: `0 <= value^2 - input <= 1/L`.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{BigUint, One, Signed, Zero};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Exact rational number, always in lowest terms with positive denominator.
pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Serializes a rational as "num/den" (always with an explicit denominator).
pub fn rat_to_string(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses "num/den" or a bare integer.
pub fn rat_from_string(s: &str) -> Result<Rat> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let numer =
        BigInt::from_str(n.trim()).map_err(|e| Error::Parse(format!("bad numerator {n:?}: {e}")))?;
    let denom = BigInt::from_str(d.trim())
        .map_err(|e| Error::Parse(format!("bad denominator {d:?}: {e}")))?;
    if denom.is_zero() {
        return Err(Error::Parse("zero denominator".into()));
    }
    Ok(Rat::new(numer, denom))
}

/// Floor of the integer square root of a nonnegative integer.
pub fn isqrt_floor(n: &BigUint) -> BigUint {
    n.sqrt()
}

/// Largest integer u with u^2 <= r, for a nonnegative rational r.
fn floor_sqrt_rat(r: &Rat) -> BigUint {
    debug_assert!(!r.is_negative());
    let num = r.numer().magnitude();
    let den = r.denom().magnitude();
    // floor(sqrt(num/den)): isqrt of the integer floor can be off by one
    // near perfect squares, so adjust both ways.
    let mut u = isqrt_floor(&(num / den));
    let num = r.numer();
    let den = r.denom();
    while &BigInt::from((&u + 1u32).pow(2)) * den <= *num {
        u += 1u32;
    }
    while !u.is_zero() && &BigInt::from(u.pow(2)) * den > *num {
        u -= 1u32;
    }
    u
}

/// A certified square-root approximation: `0 <= value^2 - input <= 1/L`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertSqrt {
    pub value: Rat,
    pub input: Rat,
    pub precision: u64,
}

impl CertSqrt {
    /// Exact defect `value^2 - input`; in `[0, 1/L]` by construction.
    pub fn defect(&self) -> Rat {
        &self.value * &self.value - &self.input
    }
}

/// Certified square root by dyadic bisection.
///
/// Returns the least value on the dyadic grid `k / 2^P` with
/// `0 <= value^2 - r <= 1/L`, where `P` depends only on `L` and the bit
/// length of `floor(sqrt(r))`. The grid changes resolution exactly at
/// inputs whose square root is a power of two, which keeps the result
/// monotone in `r` for fixed `L`.
pub fn cert_sqrt(r: &Rat, precision: u64) -> Result<CertSqrt> {
    if r.is_negative() {
        return Err(Error::Domain(format!(
            "cert_sqrt of negative input {}",
            rat_to_string(r)
        )));
    }
    if precision < 2 {
        return Err(Error::Parameter(format!(
            "cert_sqrt precision L must be >= 2, got {precision}"
        )));
    }
    if r.is_zero() {
        return Ok(CertSqrt {
            value: Rat::zero(),
            input: r.clone(),
            precision,
        });
    }
    let u = floor_sqrt_rat(r);
    let j = u.bits(); // 0 when u == 0
    // 2^p0 >= 8L, so the squared error 3*2^j/2^(p0+j) <= 3/(8L) < 1/L.
    let p0 = 64 - (8 * precision - 1).leading_zeros() as u64;
    let shift = p0 + j;
    // least k with k^2 >= r * 4^shift
    let scaled = r * Rat::from_integer(BigInt::from(1u8) << (2 * shift));
    let mut k = floor_sqrt_rat(&scaled);
    if &BigInt::from(k.pow(2)) * scaled.denom() < *scaled.numer() {
        k += 1u32;
    }
    let value = Rat::new(BigInt::from(k), BigInt::from(1u8) << shift);
    let out = CertSqrt {
        value,
        input: r.clone(),
        precision,
    };
    debug_assert!(!out.defect().is_negative());
    debug_assert!(out.defect() * rat_int(precision as i64) <= Rat::one());
    Ok(out)
}

/// Pulls the largest cheaply-found square factor out of `r`, returning
/// `(scale, residue)` with `scale^2 * residue == r` and `scale > 0`.
///
/// Trial division is bounded; this is a normalization step, not a
/// factoring routine.
pub fn extract_square(r: &Rat) -> (Rat, Rat) {
    if r.is_zero() {
        return (Rat::one(), r.clone());
    }
    fn square_part(n: &BigUint) -> BigUint {
        let mut n = n.clone();
        let mut root = BigUint::one();
        // whole perfect square?
        let s = isqrt_floor(&n);
        if &s * &s == n {
            return s;
        }
        let mut p = 2u64;
        while p < 1000 {
            let p2 = BigUint::from(p * p);
            while (&n % &p2).is_zero() {
                n /= &p2;
                root *= p;
            }
            p += 1;
        }
        let s = isqrt_floor(&n);
        if &s * &s == n {
            root *= s;
        }
        root
    }
    // rationalize: N/D = (N*D)/D^2, so the residue comes out an integer
    let nd = r.numer().magnitude() * r.denom().magnitude();
    let c = square_part(&nd);
    let scale = Rat::new(BigInt::from(c), r.denom().clone());
    let residue = r / (&scale * &scale);
    debug_assert!(residue.denom().is_one());
    (scale, residue)
}

/// `cert_sqrt` with square-factor extraction first: computes
/// `scale * cert_sqrt(residue, L')` with `L'` boosted so the overall
/// contract against `r` still holds.
pub fn cert_sqrt_normalized(r: &Rat, precision: u64) -> Result<CertSqrt> {
    if r.is_negative() {
        return Err(Error::Domain(format!(
            "cert_sqrt of negative input {}",
            rat_to_string(r)
        )));
    }
    if precision < 2 {
        return Err(Error::Parameter(format!(
            "cert_sqrt precision L must be >= 2, got {precision}"
        )));
    }
    let (scale, residue) = extract_square(r);
    if scale.is_one() {
        return cert_sqrt(r, precision);
    }
    // L' >= L * scale^2 so scale^2 * (1/L') <= 1/L
    let s2 = &scale * &scale;
    let boosted = (&s2 * rat_int(precision as i64)).ceil().to_integer();
    let boosted = u64::try_from(&boosted)
        .unwrap_or(u64::MAX)
        .max(precision)
        .max(2);
    let inner = cert_sqrt(&residue, boosted)?;
    let out = CertSqrt {
        value: &scale * &inner.value,
        input: r.clone(),
        precision,
    };
    debug_assert!(!out.defect().is_negative());
    debug_assert!(out.defect() * rat_int(precision as i64) <= Rat::one());
    Ok(out)
}

/// Vector of exact rationals, dimension >= 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatVec {
    entries: Vec<Rat>,
}

impl RatVec {
    pub fn new(entries: Vec<Rat>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Shape("RatVec must have dimension >= 1".into()));
        }
        Ok(RatVec { entries })
    }

    pub fn zeros(dim: usize) -> Self {
        RatVec {
            entries: vec![Rat::zero(); dim.max(1)],
        }
    }

    /// The uniform vector (1/n, ..., 1/n).
    pub fn uniform(dim: usize) -> Self {
        let dim = dim.max(1);
        RatVec {
            entries: vec![rat(1, dim as i64); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Rat] {
        &self.entries
    }
}

/// Exact inner product.
pub fn inner(x: &RatVec, y: &RatVec) -> Result<Rat> {
    if x.dim() != y.dim() {
        return Err(Error::Shape(format!(
            "inner product dims {} vs {}",
            x.dim(),
            y.dim()
        )));
    }
    Ok(x.entries
        .iter()
        .zip(&y.entries)
        .map(|(a, b)| a * b)
        .sum())
}

/// Certified Euclidean norm: `cert_sqrt(<x,x>, L)`.
pub fn norm(x: &RatVec, precision: u64) -> Result<CertSqrt> {
    let sq = inner(x, x)?;
    cert_sqrt_normalized(&sq, precision)
}
