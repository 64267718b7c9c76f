//! Exact tests of a working causal theory against a rival for a single
//! qualitative case.
//!
//! Coded observations go into a "+1" urn: the rival set holds one item more
//! than the working set (plus any evidentiary weight), which maximizes the
//! null probability of the observed evidence over all rival-favoring urns.
//! The p-value upper bound is the central hypergeometric tail of that urn.
//! Sensitivity to biased observation is measured by the odds ratio at which
//! Fisher's noncentral hypergeometric tail reaches a rejection threshold.

pub mod biased;
pub mod cli;
pub mod error;
pub mod exact;
pub mod ledger;
pub mod oracle;
pub mod report;
pub mod sensitivity;
pub mod urn;

pub use biased::{fnch_distribution, fnch_pmf, fnch_tail, NoncentralUrn, Odds};
pub use error::{Error, Result};
pub use exact::{binomial, log_binomial, ExactProb};
pub use ledger::{derive_counts, parse_ledger, Counts, EvidenceLedger, Observation, Support};
pub use oracle::{enumerate_exact, monte_carlo, SimConfig};
pub use report::{render, run_sequential_rivals, run_test, AlphaRule, Format, TestSummary};
pub use sensitivity::{closed_form_check, solve_omega, sweep_curve, weight_omega_grid, SensitivityResult};
pub use urn::{build_plus_one_urn, hyper_pmf, null_distribution, p_upper, tail_at_margin, UrnSpec, WeightVector};
