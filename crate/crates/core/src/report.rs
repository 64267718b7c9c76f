//! Test summaries and their renderings.

use std::fmt::Write as _;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::Num;
use serde::Serialize;
use serde_json::{json, Number, Value};

use crate::biased::{NoncentralUrn, Odds};
use crate::error::{Error, Result};
use crate::exact::ExactProb;
use crate::ledger::{validate_alphas, Counts, EvidenceLedger};
use crate::sensitivity::{solve_omega_with, sweep_curve, weight_omega_grid, GridScale, SensitivityResult, SolverOptions};
use crate::urn::{null_distribution, p_upper, UrnSpec};

/// Outcome of the sensitivity analysis at one threshold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdOutcome {
    pub alpha: f64,
    /// Absent when the unbiased p-value already reaches the threshold.
    pub sensitivity: Option<SensitivityResult>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestSummary {
    pub case_name: String,
    pub urn: UrnSpec,
    pub p_upper: ExactProb,
    /// Ledger counts; `None` for urns given directly.
    pub counts: Option<Counts>,
    pub sensitivity: Vec<ThresholdOutcome>,
    pub notes: Vec<String>,
}

impl TestSummary {
    pub fn p_upper_f64(&self) -> f64 {
        self.p_upper.to_f64()
    }

    pub fn omega_at(&self, alpha: f64) -> Option<f64> {
        self.sensitivity
            .iter()
            .find(|o| o.alpha == alpha)
            .and_then(|o| o.sensitivity.as_ref())
            .map(|s| s.omega_star)
    }
}

/// Runs the +1 urn test a ledger defines, with sensitivity at each of its
/// thresholds.
pub fn run_test(ledger: &EvidenceLedger) -> Result<TestSummary> {
    run_test_at(ledger, &ledger.alpha_thresholds)
}

pub fn run_test_at(ledger: &EvidenceLedger, alphas: &[f64]) -> Result<TestSummary> {
    let counts = ledger.counts();
    let urn = ledger.urn()?;
    let mut notes = Vec::new();
    let plus_one = counts.working + 1 + counts.weights.surplus();
    if counts.rival > plus_one {
        notes.push(format!(
            "{} rival observations exceed the +1 rival set of {plus_one}; the rival set was \
             enlarged to {} so every observation fits in the urn. This placeholder rule is \
             not a validated procedure for evidence that mostly favors the rival.",
            counts.rival, urn.r_count
        ));
    }
    let mut summary = summarize(ledger.case_name.clone(), urn, alphas, &SolverOptions::default())?;
    summary.counts = Some(counts);
    notes.append(&mut summary.notes);
    summary.notes = notes;
    Ok(summary)
}

/// Runs the test on an urn given directly rather than through a ledger.
pub fn run_urn_test(urn: &UrnSpec, alphas: &[f64], opts: &SolverOptions) -> Result<TestSummary> {
    summarize("inline urn".into(), *urn, alphas, opts)
}

fn summarize(case_name: String, urn: UrnSpec, alphas: &[f64], opts: &SolverOptions) -> Result<TestSummary> {
    validate_alphas(alphas)?;
    let p = p_upper(&urn);
    let nc = NoncentralUrn::new(&urn);
    let mut notes = Vec::new();
    let mut sensitivity = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        if !p_below(&p, alpha) {
            let note = format!(
                "p upper bound {:.4} is not below alpha = {}; no bias is needed to reach the threshold",
                p.to_f64(),
                fmt_alpha(alpha)
            );
            notes.push(note.clone());
            sensitivity.push(ThresholdOutcome {
                alpha,
                sensitivity: None,
                note: Some(note),
            });
            continue;
        }
        let result = solve_omega_with(&nc, alpha, opts)?;
        sensitivity.push(ThresholdOutcome {
            alpha,
            sensitivity: Some(result),
            note: None,
        });
    }
    Ok(TestSummary {
        case_name,
        urn,
        p_upper: p,
        counts: None,
        sensitivity,
        notes,
    })
}

/// `p < alpha`, decided exactly.
///
/// `alpha` is read as the shortest decimal that round-trips to it, so that
/// 0.05 means 1/20 rather than the binary value nearest to it.
pub fn p_below(p: &ExactProb, alpha: f64) -> bool {
    p.as_ratio() < &decimal_ratio(alpha)
}

fn decimal_ratio(x: f64) -> Ratio<BigUint> {
    debug_assert!(x >= 0.0 && x.is_finite());
    let s = format!("{x}");
    let (int, frac) = s.split_once('.').unwrap_or((&s, ""));
    let digits = format!("{int}{frac}");
    let num = BigUint::from_str_radix(&digits, 10).expect("decimal digits");
    let den = BigUint::from(10u32).pow(frac.len() as u32);
    Ratio::new(num, den)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlphaRule {
    /// Test the k-th rival at alpha0 / 2^(k-1).
    Halving,
    Fixed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequentialStep {
    pub summary: TestSummary,
    pub adjusted_alpha: f64,
    pub reject: bool,
}

/// Tests a working hypothesis against several rivals in turn.
pub fn run_sequential_rivals(
    ledgers: &[EvidenceLedger],
    alpha0: f64,
    rule: AlphaRule,
) -> Result<Vec<SequentialStep>> {
    if ledgers.is_empty() {
        return Err(Error::Domain("at least one rival ledger is required".into()));
    }
    if !(alpha0 > 0.0 && alpha0 < 1.0) {
        return Err(Error::Domain(format!("alpha0 must lie in (0, 1), got {alpha0}")));
    }
    ledgers
        .iter()
        .enumerate()
        .map(|(i, ledger)| {
            let adjusted_alpha = match rule {
                AlphaRule::Halving => alpha0 / 2f64.powi(i as i32),
                AlphaRule::Fixed => alpha0,
            };
            let summary = run_test_at(ledger, &[adjusted_alpha])?;
            let reject = p_below(&summary.p_upper, adjusted_alpha);
            Ok(SequentialStep {
                summary,
                adjusted_alpha,
                reject,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Csv,
}

pub fn render(summary: &TestSummary, format: Format) -> String {
    match format {
        Format::Text => render_text(summary),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&summary_json(summary)).expect("json");
            s.push('\n');
            s
        }
        Format::Csv => render_csv(summary),
    }
}

fn render_text(s: &TestSummary) -> String {
    let mut out = String::new();
    let p = s.p_upper_f64();
    let _ = writeln!(out, "Case: {}", s.case_name);
    let _ = writeln!(out, "Urn: {}", s.urn);
    let _ = writeln!(out, "p-value upper bound: p <= {:.3} (exact {} = {:.6})", p, s.p_upper, p);
    for o in &s.sensitivity {
        match &o.sensitivity {
            Some(r) => {
                let _ = writeln!(
                    out,
                    "odds ratio for alpha = {}: {:.3} ({:.0}% more likely)",
                    fmt_alpha(o.alpha),
                    r.omega_star,
                    r.percent_more_likely()
                );
            }
            None => {
                let _ = writeln!(out, "odds ratio for alpha = {}: not applicable", fmt_alpha(o.alpha));
            }
        }
    }
    let _ = writeln!(out);
    let weights = s
        .counts
        .as_ref()
        .map(|c| format!(" and evidentiary weights are {}", c.weights))
        .unwrap_or_default();
    let _ = writeln!(
        out,
        "The maximum probability of drawing {} observations which support the working theory \
         from an urn model supporting a rival theory, where the odds of observing working theory \
         information is odds=1{}, is p <= {}.",
        s.urn.support_count,
        weights,
        round_trim(p, 4)
    );
    for o in &s.sensitivity {
        if let Some(r) = &o.sensitivity {
            let _ = writeln!(
                out,
                "To reach p = {}, observations favoring the working theory would have to be {:.0}% \
                 more likely to be made than rival-supporting ones (odds ratio {:.3}).",
                fmt_alpha(o.alpha),
                r.percent_more_likely(),
                r.omega_star
            );
        }
    }
    for note in &s.notes {
        let _ = writeln!(out, "Note: {note}");
    }
    out
}

const CSV_HEADER: &str = "alpha,omega_star,percent_more_likely,achieved_p,p_upper,p_upper_num,p_upper_den,note";

fn render_csv(s: &TestSummary) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for o in &s.sensitivity {
        let (omega, pct, achieved) = match &o.sensitivity {
            Some(r) => (
                r.omega_star.to_string(),
                r.percent_more_likely().to_string(),
                r.achieved_p.to_string(),
            ),
            None => Default::default(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_alpha(o.alpha),
            omega,
            pct,
            achieved,
            s.p_upper_f64(),
            s.p_upper.numer(),
            s.p_upper.denom(),
            csv_field(o.note.as_deref().unwrap_or(""))
        );
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn summary_json(s: &TestSummary) -> Value {
    let sensitivity: Vec<Value> = s
        .sensitivity
        .iter()
        .map(|o| match &o.sensitivity {
            Some(r) => json!({
                "alpha": num17(o.alpha),
                "omega_star": num17(r.omega_star),
                "percent_more_likely": num17(r.percent_more_likely()),
                "achieved_p": num17(r.achieved_p),
                "iterations": r.iterations,
                "bracket": [num17(r.bracket.0), num17(r.bracket.1)],
            }),
            None => json!({
                "alpha": num17(o.alpha),
                "omega_star": Value::Null,
                "note": o.note,
            }),
        })
        .collect();
    let counts = s.counts.as_ref().map(|c| {
        json!({
            "working": c.working,
            "rival": c.rival,
            "weights": c.weights.as_slice(),
        })
    });
    json!({
        "case_name": s.case_name,
        "urn": {
            "t_count": s.urn.t_count,
            "r_count": s.urn.r_count,
            "total": s.urn.total(),
            "sample_size": s.urn.sample_size,
            "support_count": s.urn.support_count,
        },
        "counts": counts,
        "p_upper": exact_json(&s.p_upper),
        "sensitivity": sensitivity,
        "notes": s.notes,
    })
}

fn exact_json(p: &ExactProb) -> Value {
    json!({
        "num": big_number(p.numer()),
        "den": big_number(p.denom()),
        "float": num17(p.to_f64()),
    })
}

pub(crate) fn big_number(n: &BigUint) -> Value {
    Value::Number(n.to_string().parse::<Number>().expect("integer literal"))
}

/// A JSON number printed with 17 significant digits.
pub fn num17(x: f64) -> Value {
    Value::Number(format!("{x:.16e}").parse::<Number>().expect("finite float literal"))
}

/// Shortest round-trip decimal with at least two decimals ("0.10", "0.025").
pub fn fmt_alpha(alpha: f64) -> String {
    let s = format!("{alpha}");
    match s.split_once('.') {
        Some((_, frac)) if frac.len() >= 2 => s,
        Some((_, frac)) => format!("{s}{}", "0".repeat(2 - frac.len())),
        None => format!("{s}.00"),
    }
}

/// Rounds to `digits` decimals and drops trailing zeros.
fn round_trim(x: f64, digits: usize) -> String {
    let s = format!("{x:.digits$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Parameters for the CSV series behind the figures.
#[derive(Clone, Debug, PartialEq)]
pub enum PlotRequest {
    /// Distribution of the working count, central or at the given odds.
    NullDist { urn: UrnSpec, odds: Option<Odds> },
    OmegaCurve {
        urn: UrnSpec,
        omega_min: f64,
        omega_max: f64,
        steps: usize,
        scale: GridScale,
    },
    WeightGrid {
        working_obs: u64,
        rival_obs: u64,
        weights: Vec<u64>,
        omegas: Vec<f64>,
    },
}

pub fn emit_plot_data(request: &PlotRequest) -> Result<String> {
    let mut out = String::new();
    match request {
        PlotRequest::NullDist { urn, odds: None } => {
            out.push_str("k,probability\n");
            for (k, p) in null_distribution(urn) {
                let _ = writeln!(out, "{k},{}", p.to_f64());
            }
        }
        PlotRequest::NullDist { urn, odds: Some(odds) } => {
            out.push_str("k,probability\n");
            for (k, p) in NoncentralUrn::new(urn).distribution(*odds) {
                let _ = writeln!(out, "{k},{p}");
            }
        }
        PlotRequest::OmegaCurve {
            urn,
            omega_min,
            omega_max,
            steps,
            scale,
        } => {
            out.push_str("omega,p\n");
            for (w, p) in sweep_curve(urn, *omega_min, *omega_max, *steps, *scale)?.points {
                let _ = writeln!(out, "{w},{p}");
            }
        }
        PlotRequest::WeightGrid {
            working_obs,
            rival_obs,
            weights,
            omegas,
        } => {
            if weights.is_empty() || omegas.is_empty() {
                return Err(Error::Domain("weight grid needs at least one weight and one odds value".into()));
            }
            let grid = weight_omega_grid(*working_obs, *rival_obs, weights, omegas)?;
            out.push_str("weight,omega,p\n");
            for (i, w) in grid.weights.iter().enumerate() {
                for (j, o) in grid.omegas.iter().enumerate() {
                    let _ = writeln!(out, "{w},{o},{}", grid.p[i][j]);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_threshold_comparison() {
        let twentieth = ExactProb::new(1u32, 20u32).unwrap();
        assert!(!p_below(&twentieth, 0.05));
        assert!(p_below(&twentieth, 0.0500001));
        let p = ExactProb::new(8u32, 6435u32).unwrap();
        assert!(p_below(&p, 0.0125));
        assert!(!p_below(&p, 0.001));
        assert_eq!(decimal_ratio(0.025), Ratio::new(BigUint::from(1u32), BigUint::from(40u32)));
        assert_eq!(decimal_ratio(1e-7), Ratio::new(BigUint::from(1u32), BigUint::from(10_000_000u32)));
    }

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_alpha(0.1), "0.10");
        assert_eq!(fmt_alpha(0.05), "0.05");
        assert_eq!(fmt_alpha(0.0125), "0.0125");
        assert_eq!(round_trim(56.0 / 3003.0, 4), "0.0186");
        assert_eq!(round_trim(0.0030004, 4), "0.003");
        assert_eq!(num17(0.1).to_string(), "1.0000000000000001e-1");
        assert_eq!(num17(1.0).to_string(), "1.0000000000000000e+0");
        let back: f64 = num17(56.0 / 3003.0).to_string().parse().unwrap();
        assert_eq!(back, 56.0 / 3003.0);
    }

    #[test]
    fn csv_quotes_notes() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("plain"), "plain");
    }

    #[test]
    fn inline_summary_skips_unneeded_thresholds() {
        let urn = UrnSpec::new(3, 4, 4, 3).unwrap();
        let s = run_urn_test(&urn, &[0.05, 0.2], &SolverOptions::default()).unwrap();
        assert_eq!(s.p_upper, ExactProb::new(4u32, 35u32).unwrap());
        assert!(s.sensitivity[0].sensitivity.is_none());
        assert!(s.sensitivity[0].note.is_some());
        let r = s.sensitivity[1].sensitivity.as_ref().unwrap();
        assert!(r.omega_star > 1.0);
        assert_eq!(s.notes.len(), 1);
    }

    #[test]
    fn plot_data_shapes() {
        let urn = UrnSpec::new(2, 3, 2, 2).unwrap();
        let csv = emit_plot_data(&PlotRequest::NullDist { urn, odds: None }).unwrap();
        assert_eq!(csv, "k,probability\n0,0.3\n1,0.6\n2,0.1\n");
        let csv = emit_plot_data(&PlotRequest::WeightGrid {
            working_obs: 3,
            rival_obs: 1,
            weights: vec![1, 2],
            omegas: vec![1.0],
        })
        .unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "weight,omega,p");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("2,1,0.0714"));
        assert!(emit_plot_data(&PlotRequest::WeightGrid {
            working_obs: 3,
            rival_obs: 1,
            weights: vec![],
            omegas: vec![1.0],
        })
        .is_err());
    }

    fn ledger(working: usize, rival: usize) -> EvidenceLedger {
        let obs: Vec<String> = (0..working + rival)
            .map(|i| {
                let side = if i < working { "working" } else { "rival" };
                format!(r#"{{"id":"o{i}","description":"d","supports":"{side}"}}"#)
            })
            .collect();
        let doc = format!(
            r#"{{"schema_version":1,"case_name":"c","working_hypothesis":"w","rival_hypothesis":"r","observations":[{}]}}"#,
            obs.join(",")
        );
        crate::ledger::parse_ledger(doc.as_bytes()).unwrap()
    }

    #[test]
    fn rival_heavy_ledger_enlarges_urn_with_note() {
        let s = run_test(&ledger(2, 5)).unwrap();
        assert_eq!(s.urn, UrnSpec::new(2, 5, 7, 2).unwrap());
        assert!(s.notes.iter().any(|n| n.contains("enlarged to 5")));
        let s = run_test(&ledger(2, 1)).unwrap();
        assert_eq!(s.urn, UrnSpec::new(2, 3, 3, 2).unwrap());
        assert!(s.notes.iter().all(|n| !n.contains("enlarged")));
    }

    #[test]
    fn sequential_rivals_halve_thresholds() {
        let ledgers = vec![ledger(7, 0), ledger(3, 1), ledger(7, 0)];
        let steps = run_sequential_rivals(&ledgers, 0.05, AlphaRule::Halving).unwrap();
        let alphas: Vec<f64> = steps.iter().map(|s| s.adjusted_alpha).collect();
        assert_eq!(alphas, vec![0.05, 0.025, 0.0125]);
        assert_eq!(steps.iter().map(|s| s.reject).collect::<Vec<_>>(), vec![true, false, true]);
        let fixed = run_sequential_rivals(&ledgers, 0.05, AlphaRule::Fixed).unwrap();
        assert!(fixed.iter().all(|s| s.adjusted_alpha == 0.05));
        assert!(run_sequential_rivals(&[], 0.05, AlphaRule::Halving).is_err());
        assert!(run_sequential_rivals(&ledgers, 1.5, AlphaRule::Halving).is_err());
    }
}
