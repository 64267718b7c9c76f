//! Command-line front end.
//!
//! Exit codes: 0 success, 1 internal error, 2 bad input (flags or ledger),
//! 3 infeasible computation (unreachable threshold, degenerate urn).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::biased::{NoncentralUrn, Odds};
use crate::error::Error;
use crate::ledger::{parse_ledger_with, EvidenceLedger, ParseMode, DEFAULT_ALPHAS};
use crate::oracle::{monte_carlo, SimConfig};
use crate::report::{
    big_number, emit_plot_data, fmt_alpha, num17, render, run_sequential_rivals, run_test_at, run_urn_test, AlphaRule,
    Format, PlotRequest,
};
use crate::sensitivity::{odds_grid, solve_omega_with, GridScale, SolverOptions};
use crate::urn::{null_distribution, UrnSpec};

#[derive(Debug, Parser)]
#[command(name = "plusone", version, about = "Exact +1 urn tests of a working theory against a rival")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test summary: p-value upper bound and odds ratio per threshold.
    Test(TestArgs),
    /// Distribution of the number of working-supporting observations.
    Dist(DistArgs),
    /// Solve for the odds ratio at which the p-value reaches alpha.
    Sens(SensArgs),
    /// CSV of p against the odds ratio, or against weight and odds ratio.
    Sweep(SweepArgs),
    /// Monte Carlo draws from the unbiased urn (CSV k,probability).
    Simulate(SimulateArgs),
    /// Sequential tests against several rivals with adjusted thresholds.
    Multi(MultiArgs),
}

/// A ledger file or an urn given by its four counts.
#[derive(Debug, Args)]
pub struct UrnSource {
    /// Evidence ledger (JSON).
    pub ledger: Option<PathBuf>,
    /// Working-supporting items in the urn, |T|.
    #[arg(long = "t", requires_all = ["r", "n", "x"], conflicts_with = "ledger")]
    pub t: Option<u64>,
    /// Rival-supporting items in the urn, |R|.
    #[arg(long = "r", requires = "t")]
    pub r: Option<u64>,
    /// Number of observations made.
    #[arg(long = "n", requires = "t")]
    pub n: Option<u64>,
    /// Observations that support the working theory.
    #[arg(long = "x", requires = "t")]
    pub x: Option<u64>,
    /// Drop unknown ledger fields with a warning instead of failing.
    #[arg(long)]
    pub lax: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Text,
    Json,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => Format::Text,
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub source: UrnSource,
    /// Comma-separated thresholds [default: the ledger's, else 0.05,0.10].
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
    /// Write output to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    #[command(flatten)]
    pub source: UrnSource,
    /// Odds ratio of drawing working items; 1 gives the exact null.
    #[arg(long, default_value_t = 1.0)]
    pub odds: f64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SensArgs {
    #[command(flatten)]
    pub source: UrnSource,
    /// Rejection threshold.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Relative bracket width at which the odds solver may stop.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScaleArg {
    Linear,
    Log,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: UrnSource,
    #[arg(long)]
    pub omega_min: f64,
    #[arg(long)]
    pub omega_max: f64,
    #[arg(long)]
    pub steps: usize,
    /// Spacing of the odds grid.
    #[arg(long, value_enum, default_value = "linear")]
    pub scale: ScaleArg,
    /// Emit a weight x odds grid with weights 1..=N on one working observation.
    #[arg(long)]
    pub weight_max: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long = "t")]
    pub t: u64,
    #[arg(long = "r")]
    pub r: u64,
    #[arg(long = "n")]
    pub n: u64,
    #[arg(long, default_value_t = 100_000)]
    pub draws: u64,
    /// RNG seed (required; runs are reproducible).
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RuleArg {
    Halving,
    Fixed,
}

#[derive(Debug, Args)]
pub struct MultiArgs {
    /// One ledger per rival, in testing order.
    #[arg(required = true)]
    pub ledgers: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha0: f64,
    #[arg(long, value_enum, default_value = "halving")]
    pub rule: RuleArg,
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
    #[arg(long)]
    pub lax: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Lib(e) if e.is_infeasible() => 3,
            CliError::Lib(Error::NoConvergence { .. }) => 1,
            CliError::Lib(_) => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Input(m) => m.clone(),
            CliError::Lib(e) => e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let code = e.exit_code();
            if code == 0 {
                let _ = stdout.write_all(text.as_bytes());
            } else {
                let _ = stderr.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match execute(cli.command, stderr) {
        Ok((output, out_path)) => match out_path {
            Some(path) => match std::fs::write(&path, output) {
                Ok(()) => 0,
                Err(e) => {
                    let _ = writeln!(stderr, "error: cannot write {}: {e}", path.display());
                    1
                }
            },
            None => match stdout.write_all(output.as_bytes()) {
                Ok(()) => 0,
                Err(_) => 1,
            },
        },
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.exit_code()
        }
    }
}

fn execute(command: Command, stderr: &mut dyn Write) -> CliResult<(String, Option<PathBuf>)> {
    match command {
        Command::Test(a) => {
            let summary = match resolve(&a.source, stderr)? {
                Resolved::Ledger(ledger) => {
                    let alphas = a.alpha.unwrap_or_else(|| ledger.alpha_thresholds.clone());
                    run_test_at(&ledger, &alphas)?
                }
                Resolved::Urn(urn) => {
                    let alphas = a.alpha.unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
                    run_urn_test(&urn, &alphas, &SolverOptions::default())?
                }
            };
            Ok((render(&summary, a.format.into()), a.out))
        }
        Command::Dist(a) => {
            let urn = resolve(&a.source, stderr)?.urn()?;
            let odds = Odds::new(a.odds)?;
            Ok((render_dist(&urn, odds, a.format.into()), a.out))
        }
        Command::Sens(a) => {
            let urn = resolve(&a.source, stderr)?.urn()?;
            if !(a.tol > 0.0 && a.tol < 1.0) {
                return Err(CliError::Input(format!("--tol must lie in (0, 1), got {}", a.tol)));
            }
            let opts = SolverOptions {
                width_tol: a.tol,
                ..SolverOptions::default()
            };
            let r = solve_omega_with(&NoncentralUrn::new(&urn), a.alpha, &opts)?;
            let text = match Format::from(a.format) {
                Format::Text => format!(
                    "odds ratio for alpha = {}: {:.3} ({:.0}% more likely)\nomega* = {} achieved p = {} iterations = {}\n",
                    fmt_alpha(r.alpha),
                    r.omega_star,
                    r.percent_more_likely(),
                    r.omega_star,
                    r.achieved_p,
                    r.iterations
                ),
                Format::Json => {
                    let v = json!({
                        "urn": urn,
                        "alpha": num17(r.alpha),
                        "omega_star": num17(r.omega_star),
                        "percent_more_likely": num17(r.percent_more_likely()),
                        "achieved_p": num17(r.achieved_p),
                        "iterations": r.iterations,
                        "bracket": [num17(r.bracket.0), num17(r.bracket.1)],
                    });
                    format!("{}\n", serde_json::to_string_pretty(&v).expect("json"))
                }
                Format::Csv => format!(
                    "alpha,omega_star,percent_more_likely,achieved_p,iterations,bracket_low,bracket_high\n{},{},{},{},{},{},{}\n",
                    fmt_alpha(r.alpha),
                    r.omega_star,
                    r.percent_more_likely(),
                    r.achieved_p,
                    r.iterations,
                    r.bracket.0,
                    r.bracket.1
                ),
            };
            Ok((text, a.out))
        }
        Command::Sweep(a) => {
            let scale = match a.scale {
                ScaleArg::Linear => GridScale::Linear,
                ScaleArg::Log => GridScale::Log,
            };
            let resolved = resolve(&a.source, stderr)?;
            let request = match a.weight_max {
                None => PlotRequest::OmegaCurve {
                    urn: resolved.urn()?,
                    omega_min: a.omega_min,
                    omega_max: a.omega_max,
                    steps: a.steps,
                    scale,
                },
                Some(0) => return Err(CliError::Input("--weight-max must be at least 1".into())),
                Some(max) => {
                    let (working_obs, rival_obs) = match &resolved {
                        Resolved::Ledger(l) => {
                            let c = l.counts();
                            (c.working, c.rival)
                        }
                        Resolved::Urn(u) => (u.support_count, u.sample_size - u.support_count),
                    };
                    PlotRequest::WeightGrid {
                        working_obs,
                        rival_obs,
                        weights: (1..=max).collect(),
                        omegas: odds_grid(a.omega_min, a.omega_max, a.steps, scale)?,
                    }
                }
            };
            Ok((emit_plot_data(&request)?, a.out))
        }
        Command::Simulate(a) => {
            let lo = a.n.saturating_sub(a.r);
            let urn = UrnSpec::new(a.t, a.r, a.n, lo)?;
            let sim = monte_carlo(&urn, SimConfig::new(a.draws, a.seed)?);
            let mut out = String::from("k,probability\n");
            for (k, p) in sim.frequencies() {
                let _ = writeln!(out, "{k},{p}");
            }
            Ok((out, a.out))
        }
        Command::Multi(a) => {
            let ledgers = a
                .ledgers
                .iter()
                .map(|p| load_ledger(p, a.lax, stderr))
                .collect::<CliResult<Vec<_>>>()?;
            let rule = match a.rule {
                RuleArg::Halving => AlphaRule::Halving,
                RuleArg::Fixed => AlphaRule::Fixed,
            };
            let steps = run_sequential_rivals(&ledgers, a.alpha0, rule)?;
            let out = match Format::from(a.format) {
                Format::Text => {
                    let mut out = String::new();
                    for (i, s) in steps.iter().enumerate() {
                        let _ = writeln!(
                            out,
                            "rival {}: {} | alpha = {} | p <= {:.4} ({}) | {}",
                            i + 1,
                            s.summary.case_name,
                            fmt_alpha(s.adjusted_alpha),
                            s.summary.p_upper_f64(),
                            s.summary.p_upper,
                            if s.reject { "reject rival" } else { "do not reject" }
                        );
                    }
                    out
                }
                Format::Json => {
                    let v: Vec<_> = steps
                        .iter()
                        .map(|s| {
                            json!({
                                "case_name": s.summary.case_name,
                                "adjusted_alpha": num17(s.adjusted_alpha),
                                "reject": s.reject,
                                "summary": serde_json::from_str::<serde_json::Value>(&render(&s.summary, Format::Json)).expect("own json"),
                            })
                        })
                        .collect();
                    format!("{}\n", serde_json::to_string_pretty(&v).expect("json"))
                }
                Format::Csv => {
                    let mut out = String::from("index,case_name,adjusted_alpha,p_upper,p_upper_num,p_upper_den,reject,omega_star\n");
                    for (i, s) in steps.iter().enumerate() {
                        let omega = s
                            .summary
                            .omega_at(s.adjusted_alpha)
                            .map(|w| w.to_string())
                            .unwrap_or_default();
                        let name = s.summary.case_name.replace('"', "\"\"");
                        let _ = writeln!(
                            out,
                            "{},\"{}\",{},{},{},{},{},{}",
                            i + 1,
                            name,
                            fmt_alpha(s.adjusted_alpha),
                            s.summary.p_upper_f64(),
                            s.summary.p_upper.numer(),
                            s.summary.p_upper.denom(),
                            s.reject,
                            omega
                        );
                    }
                    out
                }
            };
            Ok((out, a.out))
        }
    }
}

enum Resolved {
    Ledger(EvidenceLedger),
    Urn(UrnSpec),
}

impl Resolved {
    fn urn(&self) -> CliResult<UrnSpec> {
        match self {
            Resolved::Ledger(l) => Ok(l.urn()?),
            Resolved::Urn(u) => Ok(*u),
        }
    }
}

fn resolve(source: &UrnSource, stderr: &mut dyn Write) -> CliResult<Resolved> {
    match (&source.ledger, source.t) {
        (Some(path), _) => Ok(Resolved::Ledger(load_ledger(path, source.lax, stderr)?)),
        (None, Some(t)) => {
            let (r, n, x) = (source.r.unwrap_or(0), source.n.unwrap_or(0), source.x.unwrap_or(0));
            Ok(Resolved::Urn(UrnSpec::new(t, r, n, x).map_err(|e| match e {
                // Inline counts are user input, so an infeasible x is a usage error.
                Error::Infeasible { .. } => CliError::Input(e.to_string()),
                e => CliError::Lib(e),
            })?))
        }
        (None, None) => Err(CliError::Input(
            "give a ledger file or an inline urn (--t --r --n --x)".into(),
        )),
    }
}

fn load_ledger(path: &PathBuf, lax: bool, stderr: &mut dyn Write) -> CliResult<EvidenceLedger> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Input(format!("cannot read ledger {}: {e}", path.display())))?;
    let mode = if lax { ParseMode::Lax } else { ParseMode::Strict };
    let parsed = parse_ledger_with(&bytes, mode)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    for w in &parsed.warnings {
        let _ = writeln!(stderr, "warning: {}: {w}", path.display());
    }
    Ok(parsed.ledger)
}

fn render_dist(urn: &UrnSpec, odds: Odds, format: Format) -> String {
    let central = odds == Odds::ONE;
    match format {
        Format::Csv => {
            let request = PlotRequest::NullDist {
                urn: *urn,
                odds: (!central).then_some(odds),
            };
            emit_plot_data(&request).expect("valid urn")
        }
        Format::Text => {
            let mut out = format!("Urn: {urn}  odds = {}\nk\tprobability", odds.value());
            if central {
                out.push_str("\texact");
            }
            out.push('\n');
            if central {
                for (k, p) in null_distribution(urn) {
                    let _ = writeln!(out, "{k}\t{:.6}\t{p}", p.to_f64());
                }
            } else {
                for (k, p) in NoncentralUrn::new(urn).distribution(odds) {
                    let _ = writeln!(out, "{k}\t{p:.6}");
                }
            }
            out
        }
        Format::Json => {
            let rows: Vec<_> = if central {
                null_distribution(urn)
                    .into_iter()
                    .map(|(k, p)| {
                        json!({
                            "k": k,
                            "probability": num17(p.to_f64()),
                            "num": big_number(p.numer()),
                            "den": big_number(p.denom()),
                        })
                    })
                    .collect()
            } else {
                NoncentralUrn::new(urn)
                    .distribution(odds)
                    .into_iter()
                    .map(|(k, p)| json!({"k": k, "probability": num17(p)}))
                    .collect()
            };
            let v = json!({"urn": urn, "odds": num17(odds.value()), "distribution": rows});
            format!("{}\n", serde_json::to_string_pretty(&v).expect("json"))
        }
    }
}
