//! Independent checks on the urn distributions.
//!
//! [`enumerate_exact`] walks every unordered draw of the urn and never
//! touches a binomial coefficient; [`monte_carlo`] replays the sampling
//! itself. Neither shares code with the closed-form evaluators they verify.
//!
//! Unordered draws suffice: each unordered draw of `n` items corresponds to
//! exactly `n!` ordered ones, so ordered and unordered enumerations give the
//! same probabilities.

use num_bigint::{BigInt, BigUint};
use num_rational::Ratio;
use num_traits::One;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::biased::Odds;
use crate::error::{Error, Result};
use crate::exact::ExactProb;
use crate::urn::UrnSpec;

/// Largest urn [`enumerate_exact`] accepts.
pub const MAX_ENUMERATION: u64 = 20;

/// Weighted enumeration of every size-`n` subset of the urn.
///
/// Each subset with `k` working items has weight `omega^k`. The odds ratio
/// is taken at its exact binary value, so the result is exact for any `f64`
/// input and a plain count-based hypergeometric at `omega = 1`.
pub fn enumerate_exact(urn: &UrnSpec, odds: Odds) -> Result<Vec<(u64, ExactProb)>> {
    let size = urn.total();
    if size > MAX_ENUMERATION {
        return Err(Error::UrnTooLarge {
            size,
            max: MAX_ENUMERATION,
        });
    }
    let n = urn.sample_size as u32;
    let working_mask: u32 = (1u32 << urn.t_count) - 1;
    let mut counts = vec![0u64; n as usize + 1];
    for subset in Subsets::new(size as u32, n) {
        counts[(subset & working_mask).count_ones() as usize] += 1;
    }

    let omega = Ratio::<BigInt>::from_float(odds.value()).expect("odds are finite");
    let omega = Ratio::new(
        omega.numer().to_biguint().expect("odds are positive"),
        omega.denom().to_biguint().expect("denominator is positive"),
    );
    let mut power = Ratio::<BigUint>::one();
    let mut weights = Vec::with_capacity(counts.len());
    for &c in &counts {
        weights.push(Ratio::from_integer(BigUint::from(c)) * &power);
        power *= &omega;
    }
    let total: Ratio<BigUint> = weights.iter().sum();
    Ok(weights
        .into_iter()
        .enumerate()
        .map(|(k, w)| (k as u64, ExactProb::from_ratio(w / &total)))
        .collect())
}

/// Bitmasks with exactly `k` of the low `n` bits set, in increasing order.
struct Subsets {
    next: Option<u32>,
    limit: u32,
}

impl Subsets {
    fn new(n: u32, k: u32) -> Self {
        debug_assert!(n <= 31 && k <= n);
        let first = if k == 0 { 0 } else { (1u32 << k) - 1 };
        Self {
            next: Some(first),
            limit: 1u32 << n,
        }
    }
}

impl Iterator for Subsets {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        let cur = self.next?;
        self.next = if cur == 0 {
            None
        } else {
            // Gosper's hack: the next larger integer with the same popcount.
            let low = cur & cur.wrapping_neg();
            let ripple = cur + low;
            let succ = (((ripple ^ cur) >> 2) / low) | ripple;
            (succ < self.limit).then_some(succ)
        };
        Some(cur)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimConfig {
    pub draws: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(draws: u64, seed: u64) -> Result<Self> {
        if draws == 0 {
            return Err(Error::Domain("at least one simulated draw is required".into()));
        }
        Ok(Self { draws, seed })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimResult {
    pub draws: u64,
    /// `counts[k]` replications drew exactly `k` working items.
    pub counts: Vec<u64>,
}

impl SimResult {
    pub fn frequencies(&self) -> Vec<(u64, f64)> {
        self.counts
            .iter()
            .enumerate()
            .map(|(k, &c)| (k as u64, c as f64 / self.draws as f64))
            .collect()
    }
}

/// Draws `sample_size` items uniformly without replacement, `config.draws`
/// times, and tallies the working items in each draw.
///
/// Only the unbiased urn is simulated: drawing items one at a time with
/// probability proportional to their odds would follow Wallenius'
/// distribution rather than Fisher's.
pub fn monte_carlo(urn: &UrnSpec, config: SimConfig) -> SimResult {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let total = urn.total() as usize;
    let n = urn.sample_size as usize;
    let t = urn.t_count as usize;
    let mut counts = vec![0u64; n + 1];
    for _ in 0..config.draws {
        let k = rand::seq::index::sample(&mut rng, total, n)
            .iter()
            .filter(|&i| i < t)
            .count();
        counts[k] += 1;
    }
    SimResult {
        draws: config.draws,
        counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frac(n: u64, d: u64) -> ExactProb {
        ExactProb::new(n, d).unwrap()
    }

    #[test]
    fn subsets_enumerate_all_combinations() {
        assert_eq!(Subsets::new(5, 2).count(), 10);
        assert_eq!(Subsets::new(5, 0).collect::<Vec<_>>(), vec![0]);
        assert_eq!(Subsets::new(4, 4).collect::<Vec<_>>(), vec![0b1111]);
        assert_eq!(Subsets::new(20, 10).count(), 184_756);
        assert!(Subsets::new(6, 3).all(|s| s.count_ones() == 3 && s < 64));
    }

    #[test]
    fn enumeration_examples() {
        let urn = UrnSpec::new(2, 3, 2, 2).unwrap();
        let dist = enumerate_exact(&urn, Odds::ONE).unwrap();
        assert_eq!(
            dist,
            vec![(0, frac(3, 10)), (1, frac(6, 10)), (2, frac(1, 10))]
        );

        let coin = UrnSpec::new(1, 1, 1, 1).unwrap();
        let dist = enumerate_exact(&coin, Odds::new(3.0).unwrap()).unwrap();
        assert_eq!(dist, vec![(0, frac(1, 4)), (1, frac(3, 4))]);
    }

    #[test]
    fn enumeration_size_guard() {
        let urn = UrnSpec::new(10, 11, 5, 5).unwrap();
        assert_eq!(
            enumerate_exact(&urn, Odds::ONE),
            Err(Error::UrnTooLarge { size: 21, max: 20 })
        );
    }

    #[test]
    fn simulation_is_deterministic() {
        let urn = UrnSpec::new(2, 3, 2, 2).unwrap();
        let cfg = SimConfig::new(5_000, 42).unwrap();
        assert_eq!(monte_carlo(&urn, cfg), monte_carlo(&urn, cfg));
        let other = monte_carlo(&urn, SimConfig::new(5_000, 43).unwrap());
        assert_ne!(monte_carlo(&urn, cfg), other);
        assert_eq!(monte_carlo(&urn, cfg).counts.iter().sum::<u64>(), 5_000);
        assert!(SimConfig::new(0, 1).is_err());
    }

    #[test]
    fn simulation_near_exact_at_a_million_draws() {
        let urn = UrnSpec::new(2, 3, 2, 2).unwrap();
        let sim = monte_carlo(&urn, SimConfig::new(1_000_000, 7).unwrap());
        let est = sim.frequencies()[2].1;
        let se = (0.1f64 * 0.9 / 1e6).sqrt();
        assert!((est - 0.1).abs() <= 3.0 * se, "estimate {est}");
    }
}
