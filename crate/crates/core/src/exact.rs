//! Exact combinatorics and rational probabilities.
//!
//! Every probability the library reports is carried as a reduced fraction of
//! big integers; the `f64` view is derived from it with a single, correctly
//! rounded division.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Mul, Sub};

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// `a` choose `b`, exactly. Returns zero when `b > a`.
pub fn binomial(a: u64, b: u64) -> BigUint {
    if b > a {
        return BigUint::zero();
    }
    let b = b.min(a - b);
    let mut acc = BigUint::one();
    for i in 1..=b {
        // acc * (a - b + i) is always divisible by i at this point.
        acc *= a - b + i;
        acc /= i;
    }
    acc
}

/// Natural log of `binomial(a, b)`.
///
/// Small arguments go through the exact integer; large ones through a
/// cancellation-free Stirling expansion. Absolute error stays within a few
/// ulps of the result.
pub fn log_binomial(a: u64, b: u64) -> Result<f64> {
    if b > a {
        return Err(Error::Domain(format!(
            "log_binomial({a}, {b}): b exceeds a"
        )));
    }
    let k = b.min(a - b);
    if k == 0 {
        return Ok(0.0);
    }
    if a <= EXACT_LOG_LIMIT {
        return Ok(ln_biguint(&binomial(a, k)));
    }
    if k < STIRLING_MIN {
        return Ok(log_binomial_small_k(a, k));
    }
    Ok(log_binomial_stirling(a, k))
}

const EXACT_LOG_LIMIT: u64 = 1000;
const STIRLING_MIN: u64 = 30;

fn log_binomial_small_k(a: u64, k: u64) -> f64 {
    let m = (a - k) as f64;
    (1..=k).map(|i| (m / i as f64).ln_1p()).sum()
}

/// Stirling form with `k <= a - k` and `k >= STIRLING_MIN`.
pub(crate) fn log_binomial_stirling(a: u64, k: u64) -> f64 {
    let m = a - k;
    let (af, kf, mf) = (a as f64, k as f64, m as f64);
    let main = kf * (af / kf).ln() + mf * (kf / mf).ln_1p();
    let half_log = 0.5 * (af / (2.0 * std::f64::consts::PI * kf * mf)).ln();
    main + half_log + stirling_correction(af) - stirling_correction(kf) - stirling_correction(mf)
}

/// ln(x!) - (x ln x - x + ln(2 pi x) / 2), valid for x >= 30.
fn stirling_correction(x: f64) -> f64 {
    let x2 = x * x;
    let inv = 1.0 / x;
    let inv2 = 1.0 / x2;
    inv * (1.0 / 12.0
        - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))))
}

/// Natural log of a positive big integer.
pub(crate) fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().map_or(f64::NAN, f64::ln);
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::NAN);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// `num / den` rounded to the nearest `f64` (ties to even).
pub fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    assert!(!den.is_zero(), "zero denominator");
    if num.is_zero() {
        return 0.0;
    }
    // Scale so the integer quotient carries 66 or 67 significant bits; the
    // remainder folds into the lowest bit as a sticky flag.
    let shift = 66 + den.bits() as i64 - num.bits() as i64;
    let (q, r) = if shift >= 0 {
        (num << shift as u64).div_rem(den)
    } else {
        num.div_rem(&(den << (-shift) as u64))
    };
    let mut q = q.to_u128().expect("quotient fits in 128 bits");
    if !r.is_zero() {
        q |= 1;
    }
    ldexp(q as f64, -shift)
}

fn ldexp(mut x: f64, mut exp: i64) -> f64 {
    while exp > 1000 {
        x *= 2f64.powi(1000);
        exp -= 1000;
    }
    while exp < -1000 {
        x *= 2f64.powi(-1000);
        exp += 1000;
    }
    x * 2f64.powi(exp as i32)
}

/// A probability held as a reduced fraction.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExactProb(Ratio<BigUint>);

impl ExactProb {
    /// Builds `num / den`, reducing to lowest terms. Rejects a zero
    /// denominator and values above one.
    pub fn new(num: impl Into<BigUint>, den: impl Into<BigUint>) -> Result<Self> {
        let (num, den) = (num.into(), den.into());
        if den.is_zero() {
            return Err(Error::Domain("probability with zero denominator".into()));
        }
        if num > den {
            return Err(Error::Domain(format!("{num}/{den} exceeds one")));
        }
        Ok(Self(Ratio::new(num, den)))
    }

    /// Wraps a ratio already known to lie in [0, 1].
    pub(crate) fn from_ratio(r: Ratio<BigUint>) -> Self {
        debug_assert!(r <= Ratio::one());
        Self(r)
    }

    pub fn zero() -> Self {
        Self(Ratio::zero())
    }

    pub fn one() -> Self {
        Self(Ratio::one())
    }

    pub fn numer(&self) -> &BigUint {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigUint {
        self.0.denom()
    }

    pub fn as_ratio(&self) -> &Ratio<BigUint> {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        ratio_to_f64(self.numer(), self.denom())
    }
}

impl fmt::Display for ExactProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl PartialOrd for ExactProb {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExactProb {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

// Sums of disjoint events; callers only add probabilities of disjoint
// outcomes of one distribution, so the result never exceeds one.
impl Add for ExactProb {
    type Output = ExactProb;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a ExactProb> for ExactProb {
    type Output = ExactProb;
    fn add(self, rhs: &'a ExactProb) -> Self {
        Self(self.0 + &rhs.0)
    }
}

impl Sub for ExactProb {
    type Output = ExactProb;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl Mul for ExactProb {
    type Output = ExactProb;
    fn mul(self, rhs: Self) -> Self {
        Self(self.0 * rhs.0)
    }
}

impl Sum for ExactProb {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ExactProb::zero(), |acc, p| acc + p)
    }
}

impl<'a> Sum<&'a ExactProb> for ExactProb {
    fn sum<I: Iterator<Item = &'a ExactProb>>(iter: I) -> Self {
        iter.fold(ExactProb::zero(), |acc, p| acc + p)
    }
}
