//! Fisher's noncentral hypergeometric distribution for a biased urn.
//!
//! Each working item carries odds `omega` of being among the observations
//! relative to a rival item, and the draw is simultaneous:
//!
//! ```text
//! P(X = k) = C(t,k) C(r,n-k) omega^k / sum_j C(t,j) C(r,n-j) omega^j
//! ```
//!
//! This is the conditional (Fisher) family, not Wallenius' sequential one.
//! The two coincide only at `omega = 1`.
//!
//! For urns of up to [`EXACT_LIMIT`] items the weights are evaluated exactly:
//! every finite `f64` is a dyadic rational `m * 2^e`, so each term becomes a
//! big integer and the only rounding is the final division. Larger urns fall
//! back to log-space summation.

use num_bigint::BigUint;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::exact::{log_binomial, ratio_to_f64};
use crate::urn::UrnSpec;

/// Urns with at most this many items are evaluated in exact arithmetic.
pub const EXACT_LIMIT: u64 = 300;

/// Odds ratio of drawing a working item relative to a rival item.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Odds(pub(crate) f64);

impl Odds {
    pub const ONE: Odds = Odds(1.0);

    pub fn new(omega: f64) -> Result<Self> {
        if omega.is_finite() && omega > 0.0 {
            Ok(Self(omega))
        } else {
            Err(Error::InvalidOdds(omega))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A biased urn with its combinatorial coefficients precomputed, for
/// repeated evaluation at different odds.
#[derive(Clone, Debug)]
pub struct NoncentralUrn {
    urn: UrnSpec,
    lo: u64,
    hi: u64,
    coeffs: Coefficients,
}

#[derive(Clone, Debug)]
enum Coefficients {
    Exact(Vec<BigUint>),
    Log(Vec<f64>),
}

impl NoncentralUrn {
    pub fn new(urn: &UrnSpec) -> Self {
        let (lo, hi) = urn.support();
        let coeffs = if urn.total() <= EXACT_LIMIT {
            Coefficients::Exact((lo..=hi).map(|j| urn.draw_count(j)).collect())
        } else {
            Coefficients::Log(
                (lo..=hi)
                    .map(|j| {
                        log_binomial(urn.t_count, j).expect("j <= t on support")
                            + log_binomial(urn.r_count, urn.sample_size - j)
                                .expect("n - j <= r on support")
                    })
                    .collect(),
            )
        };
        Self {
            urn: *urn,
            lo,
            hi,
            coeffs,
        }
    }

    pub fn urn(&self) -> &UrnSpec {
        &self.urn
    }

    /// P(X = k).
    pub fn pmf(&self, k: u64, odds: Odds) -> f64 {
        if k < self.lo || k > self.hi {
            return 0.0;
        }
        self.mass(k..=k, odds)
    }

    /// P(X >= k).
    pub fn tail_from(&self, k: u64, odds: Odds) -> f64 {
        let start = k.max(self.lo);
        if start > self.hi {
            return 0.0;
        }
        self.mass(start..=self.hi, odds)
    }

    /// P(X >= support_count).
    pub fn tail(&self, odds: Odds) -> f64 {
        self.tail_from(self.urn.support_count, odds)
    }

    /// Probability of every count `k = 0..=sample_size`.
    pub fn distribution(&self, odds: Odds) -> Vec<(u64, f64)> {
        (0..=self.urn.sample_size)
            .map(|k| (k, self.pmf(k, odds)))
            .collect()
    }

    /// Total probability of the counts in `range` (a subrange of the support).
    fn mass(&self, range: std::ops::RangeInclusive<u64>, odds: Odds) -> f64 {
        let (from, to) = ((range.start() - self.lo) as usize, (range.end() - self.lo) as usize);
        match &self.coeffs {
            Coefficients::Exact(c) => {
                let terms = exact_terms(c, odds.value());
                let total: BigUint = terms.iter().sum();
                let part: BigUint = terms[from..=to].iter().sum();
                ratio_to_f64(&part, &total)
            }
            Coefficients::Log(c) => {
                let ln_omega = odds.value().ln();
                let logs: Vec<f64> = c
                    .iter()
                    .enumerate()
                    .map(|(i, lc)| lc + i as f64 * ln_omega)
                    .collect();
                let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let total: f64 = logs.iter().map(|l| (l - max).exp()).sum();
                let part: f64 = logs[from..=to].iter().map(|l| (l - max).exp()).sum();
                part / total
            }
        }
    }
}

/// Splits a positive finite `f64` into an odd mantissa and a binary exponent.
fn dyadic_parts(x: f64) -> (u64, i64) {
    let bits = x.to_bits();
    let field = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut m, mut e) = if field == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), field - 1075)
    };
    let tz = m.trailing_zeros();
    m >>= tz;
    e += tz as i64;
    (m, e)
}

/// `coeffs[i] * omega^i`, all scaled by one common positive factor so that
/// every term is an integer.
fn exact_terms(coeffs: &[BigUint], omega: f64) -> Vec<BigUint> {
    let (m, e) = dyadic_parts(omega);
    let last = coeffs.len() as u64 - 1;
    let mut power = BigUint::from(1u32);
    let mut terms = Vec::with_capacity(coeffs.len());
    for (i, c) in coeffs.iter().enumerate() {
        let i = i as u64;
        let shift = if e >= 0 { e as u64 * i } else { (-e) as u64 * (last - i) };
        let term = if c.is_zero() {
            BigUint::zero()
        } else {
            (c * &power) << shift
        };
        terms.push(term);
        power *= m;
    }
    terms
}

/// Noncentral probability of drawing exactly `k` working items.
pub fn fnch_pmf(urn: &UrnSpec, k: u64, odds: Odds) -> f64 {
    NoncentralUrn::new(urn).pmf(k, odds)
}

/// P(X >= support_count) under the biased urn.
pub fn fnch_tail(urn: &UrnSpec, odds: Odds) -> f64 {
    NoncentralUrn::new(urn).tail(odds)
}

pub fn fnch_distribution(urn: &UrnSpec, odds: Odds) -> Vec<(u64, f64)> {
    NoncentralUrn::new(urn).distribution(odds)
}
