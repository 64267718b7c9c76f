//! Sensitivity of a test to observation bias.
//!
//! Holding the rejection threshold fixed, we solve for the odds ratio at
//! which the biased-urn tail reaches it. The tail P(X >= x) is strictly
//! increasing in the odds for any `x` above the bottom of the support, so a
//! bracketing bisection has exactly one root to find.

use serde::Serialize;

use crate::biased::{NoncentralUrn, Odds};
use crate::error::{Error, Result};
use crate::urn::{build_plus_one_urn, UrnSpec, WeightVector};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensitivityResult {
    pub alpha: f64,
    pub omega_star: f64,
    pub achieved_p: f64,
    pub iterations: u32,
    pub bracket: (f64, f64),
}

impl SensitivityResult {
    /// How much more likely, in percent, working evidence must be to be
    /// observed for the p-value to reach the threshold.
    pub fn percent_more_likely(&self) -> f64 {
        100.0 * (self.omega_star - 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Stop once |p(omega) - alpha| falls below this.
    pub p_tol: f64,
    /// Or once the bracket is narrower than this fraction of omega, provided
    /// the residual is within [`ACCEPT_RESIDUAL`].
    pub width_tol: f64,
    pub max_iter: u32,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            p_tol: 1e-10,
            width_tol: 1e-9,
            max_iter: 200,
        }
    }
}

/// Largest residual a returned solution may carry.
pub const ACCEPT_RESIDUAL: f64 = 1e-9;

const INITIAL_BRACKET: (f64, f64) = (1e-9, 1e9);
const BRACKET_LIMIT: (f64, f64) = (1e-300, 1e300);

pub fn solve_omega(urn: &UrnSpec, alpha: f64) -> Result<SensitivityResult> {
    solve_omega_with(&NoncentralUrn::new(urn), alpha, &SolverOptions::default())
}

pub fn solve_omega_with(
    nc: &NoncentralUrn,
    alpha: f64,
    opts: &SolverOptions,
) -> Result<SensitivityResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let urn = nc.urn();
    let (lo_k, _) = urn.support();
    if !urn.is_nondegenerate() || urn.support_count <= lo_k {
        return Err(Error::DegenerateSupport(format!(
            "{urn}: P(X >= x) is 1 for every odds ratio"
        )));
    }

    let tail = |w: f64| nc.tail(Odds(w));
    let (mut lo, mut hi) = INITIAL_BRACKET;
    let mut p_lo = tail(lo);
    while p_lo > alpha {
        lo *= 1e-3;
        if lo < BRACKET_LIMIT.0 {
            return Err(unreachable(alpha, nc));
        }
        p_lo = tail(lo);
    }
    let mut p_hi = tail(hi);
    while p_hi < alpha {
        hi *= 1e3;
        if hi > BRACKET_LIMIT.1 {
            return Err(unreachable(alpha, nc));
        }
        p_hi = tail(hi);
    }

    let mut best = if (p_lo - alpha).abs() <= (p_hi - alpha).abs() {
        (lo, p_lo)
    } else {
        (hi, p_hi)
    };
    for iteration in 1..=opts.max_iter {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            // No float strictly between the endpoints.
            return finish(alpha, best, iteration, (lo, hi));
        }
        let p = tail(mid);
        if (p - alpha).abs() < (best.1 - alpha).abs() {
            best = (mid, p);
        }
        let residual = (p - alpha).abs();
        if residual <= opts.p_tol
            || (hi - lo <= opts.width_tol * mid && residual <= ACCEPT_RESIDUAL)
        {
            return finish(alpha, (mid, p), iteration, (lo, hi));
        }
        if p < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: (best.1 - alpha).abs(),
    })
}

fn finish(
    alpha: f64,
    (omega_star, achieved_p): (f64, f64),
    iterations: u32,
    bracket: (f64, f64),
) -> Result<SensitivityResult> {
    if (achieved_p - alpha).abs() > ACCEPT_RESIDUAL {
        return Err(Error::NoConvergence {
            iterations,
            residual: (achieved_p - alpha).abs(),
        });
    }
    Ok(SensitivityResult {
        alpha,
        omega_star,
        achieved_p,
        iterations,
        bracket,
    })
}

fn unreachable(alpha: f64, nc: &NoncentralUrn) -> Error {
    Error::UnreachableThreshold {
        alpha,
        low: nc.tail(Odds(BRACKET_LIMIT.0)),
        high: nc.tail(Odds(BRACKET_LIMIT.1)),
    }
}

/// Closed-form odds for the urn with two working and three rival items,
/// three draws, two of them working: the positive root of
/// `(1 - p) w^2 - 2 p w - p / 3 = 0`.
pub fn closed_form_check(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("p must lie in (0, 1), got {p}")));
    }
    Ok(-p / (p - 1.0) + (p + 2.0 * p * p).sqrt() / (3f64.sqrt() * (1.0 - p)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridScale {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepCurve {
    pub scale: GridScale,
    pub points: Vec<(f64, f64)>,
}

/// Tail probability over an evenly spaced grid of odds ratios.
pub fn sweep_curve(
    urn: &UrnSpec,
    omega_min: f64,
    omega_max: f64,
    steps: usize,
    scale: GridScale,
) -> Result<SweepCurve> {
    let omegas = odds_grid(omega_min, omega_max, steps, scale)?;
    let nc = NoncentralUrn::new(urn);
    let points = omegas.into_iter().map(|w| (w, nc.tail(Odds(w)))).collect();
    Ok(SweepCurve { scale, points })
}

/// `steps` evenly spaced odds ratios from `omega_min` to `omega_max`
/// inclusive, on a linear or logarithmic scale.
pub fn odds_grid(omega_min: f64, omega_max: f64, steps: usize, scale: GridScale) -> Result<Vec<f64>> {
    if !(omega_min > 0.0 && omega_min < omega_max && omega_max.is_finite()) {
        return Err(Error::Domain(format!(
            "odds range must satisfy 0 < min < max, got [{omega_min}, {omega_max}]"
        )));
    }
    if steps < 2 {
        return Err(Error::Domain(format!("a sweep needs at least 2 steps, got {steps}")));
    }
    let last = (steps - 1) as f64;
    let grid = (0..steps)
        .map(|i| {
            if i == steps - 1 {
                return omega_max;
            }
            let f = i as f64 / last;
            match scale {
                GridScale::Linear => omega_min + f * (omega_max - omega_min),
                GridScale::Log => (omega_min.ln() + f * (omega_max.ln() - omega_min.ln())).exp(),
            }
        })
        .collect();
    Ok(grid)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightGrid {
    pub weights: Vec<u64>,
    pub omegas: Vec<f64>,
    /// `p[i][j]` is the tail for `weights[i]` and `omegas[j]`.
    pub p: Vec<Vec<f64>>,
}

impl WeightGrid {
    pub fn get(&self, weight: u64, omega: f64) -> Option<f64> {
        let i = self.weights.iter().position(|&w| w == weight)?;
        let j = self.omegas.iter().position(|&o| o == omega)?;
        Some(self.p[i][j])
    }
}

/// Tail probabilities when a single working observation carries weight `w`
/// (all others weight 1) and working evidence has odds `omega`.
pub fn weight_omega_grid(
    working_obs: u64,
    rival_obs: u64,
    weight_values: &[u64],
    omega_values: &[f64],
) -> Result<WeightGrid> {
    let odds: Vec<Odds> = omega_values
        .iter()
        .map(|&w| Odds::new(w))
        .collect::<Result<_>>()?;
    let mut p = Vec::with_capacity(weight_values.len());
    for &w in weight_values {
        if working_obs == 0 {
            return Err(Error::NoSupportingEvidence);
        }
        let mut weights = vec![1; working_obs as usize];
        weights[0] = w;
        let urn = build_plus_one_urn(working_obs, rival_obs, Some(&WeightVector::new(weights)?))?;
        let nc = NoncentralUrn::new(&urn);
        p.push(odds.iter().map(|&o| nc.tail(o)).collect());
    }
    Ok(WeightGrid {
        weights: weight_values.to_vec(),
        omegas: omega_values.to_vec(),
        p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biased::fnch_tail;
    use crate::urn::p_upper;

    fn urn(t: u64, r: u64, n: u64, x: u64) -> UrnSpec {
        UrnSpec::new(t, r, n, x).unwrap()
    }

    #[test]
    fn solves_reported_thresholds() {
        let snow = urn(7, 8, 10, 7);
        let s05 = solve_omega(&snow, 0.05).unwrap();
        assert!((s05.omega_star - 1.59).abs() <= 0.01, "{s05:?}");
        assert!((s05.achieved_p - 0.05).abs() <= 1e-9);
        let s10 = solve_omega(&snow, 0.10).unwrap();
        assert!((s10.omega_star - 2.36).abs() <= 0.01, "{s10:?}");

        let rossel = urn(7, 8, 8, 7);
        assert!((solve_omega(&rossel, 0.05).unwrap().omega_star - 4.216).abs() <= 0.005);
        assert!((solve_omega(&rossel, 0.10).unwrap().omega_star - 6.292).abs() <= 0.005);

        let small = urn(2, 3, 3, 2);
        assert!((solve_omega(&small, 0.05).unwrap().omega_star - 0.1952).abs() <= 5e-4);

        let tea = urn(4, 5, 4, 4);
        assert!((solve_omega(&tea, 0.05).unwrap().omega_star - 2.6).abs() <= 0.05);
    }

    #[test]
    fn result_reproduces_achieved_p() {
        let u = urn(7, 8, 10, 7);
        let s = solve_omega(&u, 0.05).unwrap();
        assert_eq!(fnch_tail(&u, Odds::new(s.omega_star).unwrap()), s.achieved_p);
        assert!(s.bracket.0 <= s.omega_star && s.omega_star <= s.bracket.1);
        assert!(s.iterations >= 1 && s.iterations <= 200);
    }

    #[test]
    fn solver_errors() {
        let u = urn(7, 8, 10, 7);
        assert!(matches!(solve_omega(&u, 0.0), Err(Error::Domain(_))));
        assert!(matches!(solve_omega(&u, 1.0), Err(Error::Domain(_))));
        // x at the bottom of the support: tail is identically 1.
        assert!(matches!(
            solve_omega(&urn(7, 8, 10, 2), 0.05),
            Err(Error::DegenerateSupport(_))
        ));
        // Single-point support.
        assert!(matches!(
            solve_omega(&urn(3, 1, 4, 3), 0.05),
            Err(Error::DegenerateSupport(_))
        ));
        // Needs odds beyond the searchable range.
        assert!(matches!(
            solve_omega(&urn(7, 8, 10, 3), 1e-305),
            Err(Error::UnreachableThreshold { .. })
        ));
    }

    #[test]
    fn closed_form_examples() {
        assert!((closed_form_check(0.05).unwrap() - 0.195159).abs() < 1e-5);
        assert!((closed_form_check(0.3).unwrap() - 1.0).abs() < 1e-9);
        assert!(closed_form_check(1e-12).unwrap() < 1e-5);
        assert!(closed_form_check(0.0).is_err());
        assert!(closed_form_check(1.0).is_err());
    }

    #[test]
    fn solver_matches_closed_form() {
        let small = urn(2, 3, 3, 2);
        for i in 0..20 {
            let p = 0.01 + 0.28 * i as f64 / 19.0;
            let solved = solve_omega(&small, p).unwrap().omega_star;
            let closed = closed_form_check(p).unwrap();
            assert!((solved - closed).abs() <= 1e-6, "p={p}: {solved} vs {closed}");
        }
    }

    #[test]
    fn sweep_examples() {
        let u = urn(7, 8, 10, 7);
        let curve = sweep_curve(&u, 0.5, 3.0, 251, GridScale::Linear).unwrap();
        let at = |w: f64| {
            curve
                .points
                .iter()
                .find(|(o, _)| (o - w).abs() < 1e-9)
                .map(|&(_, p)| p)
                .unwrap()
        };
        assert_eq!(at(1.0), p_upper(&u).to_f64());
        assert!((at(1.0) - 0.0186).abs() < 5e-5);
        assert!((at(1.59) - 0.05).abs() < 5e-4);
        assert!((at(2.36) - 0.10).abs() < 5e-4);
        assert!(curve.points.windows(2).all(|w| w[1].1 > w[0].1));

        let log = sweep_curve(&u, 0.1, 10.0, 3, GridScale::Log).unwrap();
        assert!((log.points[1].0 - 1.0).abs() < 1e-12);
        assert_eq!(log.points[2].0, 10.0);

        assert!(sweep_curve(&u, 2.0, 1.0, 10, GridScale::Linear).is_err());
        assert!(sweep_curve(&u, 0.0, 1.0, 10, GridScale::Log).is_err());
        assert!(sweep_curve(&u, 1.0, 2.0, 1, GridScale::Linear).is_err());
    }

    #[test]
    fn weight_grid_examples() {
        let g = weight_omega_grid(3, 1, &[1, 2, 5], &[1.0, 2.5]).unwrap();
        assert!((g.get(1, 1.0).unwrap() - 4.0 / 35.0).abs() < 1e-15);
        assert!((g.get(2, 1.0).unwrap() - 5.0 / 70.0).abs() < 1e-15);
        assert!((g.get(5, 2.5).unwrap() - 0.11).abs() <= 0.005);
        assert!(weight_omega_grid(0, 1, &[1], &[1.0]).is_err());
        assert!(weight_omega_grid(3, 1, &[0], &[1.0]).is_err());
        assert!(weight_omega_grid(3, 1, &[1], &[-1.0]).is_err());
    }

    #[test]
    fn thresholds_order_odds() {
        let u = urn(7, 8, 8, 7);
        let alphas = [0.01, 0.05, 0.10, 0.5];
        let omegas: Vec<f64> = alphas
            .iter()
            .map(|&a| solve_omega(&u, a).unwrap().omega_star)
            .collect();
        assert!(omegas.windows(2).all(|w| w[0] < w[1]));
    }
}
