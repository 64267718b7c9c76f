//! The +1 null urn and its central hypergeometric distribution.
//!
//! The urn holds `t_count` items supporting the working hypothesis and
//! `r_count` items supporting the rival (or compatible with both). Under the
//! null, the `sample_size` observations actually made are a uniform draw
//! without replacement, and `support_count` of them favored the working
//! hypothesis.

use std::fmt;

use num_bigint::BigUint;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{binomial, ExactProb};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UrnSpec {
    pub t_count: u64,
    pub r_count: u64,
    pub sample_size: u64,
    pub support_count: u64,
}

impl UrnSpec {
    pub fn new(t_count: u64, r_count: u64, sample_size: u64, support_count: u64) -> Result<Self> {
        if r_count == 0 {
            return Err(Error::InvalidUrn("the urn needs at least one rival item".into()));
        }
        let total = t_count
            .checked_add(r_count)
            .ok_or_else(|| Error::InvalidUrn("urn size overflows".into()))?;
        if sample_size > total {
            return Err(Error::InvalidUrn(format!(
                "cannot draw {sample_size} items from an urn of {total}"
            )));
        }
        let urn = Self {
            t_count,
            r_count,
            sample_size,
            support_count,
        };
        let (lo, hi) = urn.support();
        if support_count < lo || support_count > hi {
            return Err(Error::Infeasible {
                x: support_count,
                lo,
                hi,
            });
        }
        Ok(urn)
    }

    /// Total number of items `U`.
    pub fn total(&self) -> u64 {
        self.t_count + self.r_count
    }

    /// Smallest and largest attainable number of working items in a draw.
    pub fn support(&self) -> (u64, u64) {
        (
            self.sample_size.saturating_sub(self.r_count),
            self.sample_size.min(self.t_count),
        )
    }

    /// How many more rival items than working items the urn holds.
    pub fn margin(&self) -> i64 {
        self.r_count as i64 - self.t_count as i64
    }

    /// True when the support window has at least two points.
    pub fn is_nondegenerate(&self) -> bool {
        let (lo, hi) = self.support();
        hi > lo
    }

    /// Number of draws with exactly `k` working items (zero off support).
    pub(crate) fn draw_count(&self, k: u64) -> BigUint {
        if k > self.sample_size {
            return BigUint::default();
        }
        binomial(self.t_count, k) * binomial(self.r_count, self.sample_size - k)
    }

    pub(crate) fn total_draws(&self) -> BigUint {
        binomial(self.total(), self.sample_size)
    }
}

impl fmt::Display for UrnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "|T|={} |R|={} U={} n={} x={}",
            self.t_count,
            self.r_count,
            self.total(),
            self.sample_size,
            self.support_count
        )
    }
}

/// Evidentiary weights, one per working-supporting observation.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WeightVector(Vec<u64>);

impl WeightVector {
    pub fn new(weights: Vec<u64>) -> Result<Self> {
        if let Some(&w) = weights.iter().find(|&&w| w == 0) {
            return Err(Error::InvalidWeight(w));
        }
        Ok(Self(weights))
    }

    pub fn uniform(len: usize) -> Self {
        Self(vec![1; len])
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Extra rival items the weights add: the sum of `w - 1`.
    pub fn surplus(&self) -> u64 {
        self.0.iter().map(|w| w - 1).sum()
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Builds the +1 urn for `working_obs` working-supporting and `rival_obs`
/// rival-supporting observations.
///
/// The rival set gets one more item than the working set, plus one item per
/// unit of weight above 1. When more rival observations were actually made
/// than that, the rival set is enlarged to hold them all.
pub fn build_plus_one_urn(
    working_obs: u64,
    rival_obs: u64,
    weights: Option<&WeightVector>,
) -> Result<UrnSpec> {
    if working_obs == 0 {
        return Err(Error::NoSupportingEvidence);
    }
    let surplus = match weights {
        Some(w) if w.len() as u64 != working_obs => {
            return Err(Error::WeightLength {
                expected: working_obs,
                got: w.len(),
            })
        }
        Some(w) => w.surplus(),
        None => 0,
    };
    let r_count = (working_obs + 1 + surplus).max(rival_obs);
    UrnSpec::new(working_obs, r_count, working_obs + rival_obs, working_obs)
}

/// Central hypergeometric probability of drawing exactly `k` working items.
pub fn hyper_pmf(urn: &UrnSpec, k: u64) -> ExactProb {
    let (lo, hi) = urn.support();
    if k < lo || k > hi {
        return ExactProb::zero();
    }
    ExactProb::from_ratio(Ratio::new(urn.draw_count(k), urn.total_draws()))
}

/// P(X >= k) under the central hypergeometric.
pub fn tail_from(urn: &UrnSpec, k: u64) -> ExactProb {
    let (lo, hi) = urn.support();
    let start = k.max(lo);
    if start > hi {
        return ExactProb::zero();
    }
    let num: BigUint = (start..=hi).map(|j| urn.draw_count(j)).sum();
    ExactProb::from_ratio(Ratio::new(num, urn.total_draws()))
}

/// Upper bound on the p-value: the probability of drawing the observed
/// number of working items or more.
pub fn p_upper(urn: &UrnSpec) -> ExactProb {
    tail_from(urn, urn.support_count)
}

/// Probability of every count `k = 0..=sample_size`, zero off support.
pub fn null_distribution(urn: &UrnSpec) -> Vec<(u64, ExactProb)> {
    let den = urn.total_draws();
    (0..=urn.sample_size)
        .map(|k| {
            let p = if k >= urn.support().0 && k <= urn.support().1 {
                ExactProb::from_ratio(Ratio::new(urn.draw_count(k), den.clone()))
            } else {
                ExactProb::zero()
            };
            (k, p)
        })
        .collect()
}

/// P(X >= x) for the urn with `|R| = |T| + margin`.
pub fn tail_at_margin(working_obs: u64, sample_size: u64, x: u64, margin: u64) -> Result<ExactProb> {
    if margin == 0 {
        return Err(Error::Domain("the rival margin must be positive".into()));
    }
    let urn = UrnSpec::new(working_obs, working_obs + margin, sample_size, x)?;
    Ok(p_upper(&urn))
}
