//! Exact distributions of the endpoint and running maximum of a simple
//! symmetric walk.
//!
//! Probabilities are rationals kept in lowest terms, so every comparison in
//! this module is exact. The running maximum `M_n` is taken over prefixes
//! `1..=n`; for thresholds `r >= 1` including the empty prefix would not
//! change any event.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{param_err, LabError, Result};

/// Largest `n` for which the path enumeration oracle runs.
pub const ENUMERATION_MAX_N: u32 = 24;

/// A probability held as an exact rational in lowest terms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactProb(BigRational);

impl ExactProb {
    pub fn zero() -> Self {
        ExactProb(BigRational::zero())
    }

    pub fn one() -> Self {
        ExactProb(BigRational::one())
    }

    /// `count / 2^n`.
    pub fn dyadic(count: BigUint, n: u32) -> Self {
        let den = BigUint::one() << n;
        ExactProb(BigRational::new(count.into(), den.into()))
    }

    pub fn ratio(num: u64, den: u64) -> Self {
        assert!(den > 0 && num <= den, "not a probability: {num}/{den}");
        ExactProb(BigRational::new(num.into(), den.into()))
    }

    pub fn numerator(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denominator(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// `k * self`. The result may exceed 1; it is used for bounds such as
    /// `2 Pr(S_n >= r)`.
    pub fn times(&self, k: u32) -> ExactProb {
        ExactProb(&self.0 * BigRational::from_integer(k.into()))
    }
}

impl fmt::Display for ExactProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for ExactProb {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl Add for ExactProb {
    type Output = ExactProb;
    fn add(self, rhs: ExactProb) -> ExactProb {
        ExactProb(self.0 + rhs.0)
    }
}

impl Sub for ExactProb {
    type Output = ExactProb;
    fn sub(self, rhs: ExactProb) -> ExactProb {
        ExactProb(self.0 - rhs.0)
    }
}

impl Mul for ExactProb {
    type Output = ExactProb;
    fn mul(self, rhs: ExactProb) -> ExactProb {
        ExactProb(self.0 * rhs.0)
    }
}

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

fn check_n(n: u32) -> Result<()> {
    if n < 1 {
        return param_err("walk length n must be >= 1");
    }
    Ok(())
}

/// Number of length-`n` paths ending at `r`.
fn paths_ending_at(n: u32, r: i64) -> BigUint {
    let n64 = i64::from(n);
    if r.abs() > n64 || (n64 + r) % 2 != 0 {
        return BigUint::zero();
    }
    binomial(n as u64, ((n64 + r) / 2) as u64)
}

/// Number of length-`n` paths ending at or above `r`.
fn paths_ending_at_least(n: u32, r: i64) -> BigUint {
    let n64 = i64::from(n);
    if r > n64 {
        return BigUint::zero();
    }
    let lo = r.max(-n64);
    // Only values with the parity of n are reachable.
    let start = if (n64 + lo) % 2 == 0 { lo } else { lo + 1 };
    (start..=n64)
        .step_by(2)
        .map(|v| binomial(n as u64, ((n64 + v) / 2) as u64))
        .sum()
}

/// `Pr(S_n = r)`.
pub fn prob_sum_eq(n: u32, r: i64) -> Result<ExactProb> {
    check_n(n)?;
    Ok(ExactProb::dyadic(paths_ending_at(n, r), n))
}

/// `Pr(S_n >= r)`.
pub fn prob_sum_ge(n: u32, r: i64) -> Result<ExactProb> {
    check_n(n)?;
    Ok(ExactProb::dyadic(paths_ending_at_least(n, r), n))
}

/// `Pr(S_n > r)`.
pub fn prob_sum_gt(n: u32, r: i64) -> Result<ExactProb> {
    prob_sum_ge(n, r + 1)
}

/// `Pr(M_n >= r)` through the reflection identity
/// `Pr(S_n = r) + 2 Pr(S_n > r)`, valid for `r >= 1`.
pub fn prob_max_ge_reflection(n: u32, r: i64) -> Result<ExactProb> {
    check_n(n)?;
    if r < 1 {
        return param_err(format!("reflection identity needs r >= 1, got {r}"));
    }
    let count = paths_ending_at(n, r) + paths_ending_at_least(n, r + 1) * 2u32;
    Ok(ExactProb::dyadic(count, n))
}

/// Histogram of the running maximum over all `2^n` paths:
/// `counts[v + 1]` is the number of paths whose maximum over prefixes
/// `1..=n` equals `v` (so `v` ranges over `-1..=n`).
pub fn max_histogram_enumeration(n: u32) -> Result<Vec<u64>> {
    check_n(n)?;
    if n > ENUMERATION_MAX_N {
        return Err(LabError::Budget {
            n,
            max: ENUMERATION_MAX_N,
        });
    }
    let mut counts = vec![0u64; n as usize + 2];
    for path in 0u32..(1u32 << n) {
        let mut pos = 0i64;
        let mut max = i64::MIN;
        for bit in 0..n {
            pos += if path >> bit & 1 == 1 { 1 } else { -1 };
            max = max.max(pos);
        }
        counts[(max + 1) as usize] += 1;
    }
    Ok(counts)
}

/// `Pr(M_n >= r)` by brute-force enumeration of all `2^n` paths.
pub fn prob_max_ge_enumeration(n: u32, r: i64) -> Result<ExactProb> {
    let counts = max_histogram_enumeration(n)?;
    Ok(max_ge_from_histogram(&counts, n, r))
}

/// Tail of an enumeration histogram: `Pr(M_n >= r)`.
pub fn max_ge_from_histogram(counts: &[u64], n: u32, r: i64) -> ExactProb {
    let skip = (r + 1).max(0) as usize;
    let hits: u64 = counts.iter().skip(skip).sum();
    ExactProb::dyadic(BigUint::from(hits), n)
}

/// The tail form `exp(-r^2 / (2n))`.
pub fn chernoff_tail(n: f64, r: f64) -> f64 {
    assert!(n >= 1.0 && r >= 0.0, "chernoff_tail needs n >= 1, r >= 0");
    (-r * r / (2.0 * n)).exp()
}
