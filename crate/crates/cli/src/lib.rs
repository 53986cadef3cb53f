//! `abc-hybrid` command-line front end.
//!
//! Exit codes: 0 success, 1 usage/parse/validation/evaluation errors,
//! 2 Picard non-convergence, 3 existence condition not satisfied,
//! 4 extremal ordering violation, 5 comparison counterexample.
//! Every failure writes one `error[<kind>]: <message>` line to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

pub mod artifacts;
mod commands;
mod error;

pub use error::CliError;

use abc_hybrid::problem::Interval;
use abc_hybrid::solver::{Lattice, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};

#[derive(Debug, Parser)]
#[command(name = "abc-hybrid", version, about = "Hybrid fractional differential equations with the ABC derivative")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a problem file by Picard iteration and write a CSV trace.
    Solve(SolveArgs),
    /// Estimate L_f and ||h|| on a box and evaluate the existence condition.
    Check(CheckArgs),
    /// Bracket the maximal (or minimal) solution by epsilon-perturbed solves.
    Extremal(ExtremalArgs),
    /// Check the comparison theorem for lower/upper candidates in tau.
    Compare(CompareArgs),
    /// Evaluate the three-parameter Mittag-Leffler function.
    #[command(allow_negative_numbers = true)]
    Mlf(MlfArgs),
    /// Compare the numerical ABC derivative with its closed form on several grids.
    #[command(allow_negative_numbers = true)]
    Golden(GoldenArgs),
    /// Solve on several grids and report observed convergence.
    Convergence(ConvergenceArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SolverFlags {
    /// Number of grid intervals.
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    /// Stopping tolerance on successive iterates (sup norm).
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_SWEEPS)]
    pub max_sweeps: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    pub file: PathBuf,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// CSV path; `.report` and `.manifest` are written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// State box for the condition report, e.g. `-2,2`.
    #[arg(long, value_parser = parse_box, allow_hyphen_values = true)]
    pub omega_box: Option<Interval>,
    /// Lattice points along tau and omega, e.g. `33,65`.
    #[arg(long, value_parser = parse_lattice)]
    pub lattice: Option<Lattice>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    pub file: PathBuf,
    #[arg(long, value_parser = parse_box, allow_hyphen_values = true)]
    pub omega_box: Option<Interval>,
    #[arg(long, value_parser = parse_lattice)]
    pub lattice: Option<Lattice>,
}

#[derive(Debug, Clone, Args)]
pub struct ExtremalArgs {
    pub file: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub eps0: f64,
    #[arg(long, default_value_t = 0.5)]
    pub ratio: f64,
    #[arg(long, default_value_t = 8)]
    pub levels: usize,
    /// Bracket the minimal solution instead of the maximal one.
    #[arg(long)]
    pub minimal: bool,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    pub file: PathBuf,
    /// Lower candidate v(tau).
    #[arg(long, allow_hyphen_values = true)]
    pub lower: String,
    /// Upper candidate w(tau).
    #[arg(long, allow_hyphen_values = true)]
    pub upper: String,
    /// Use nonstrict inequalities (requires Lg < B/(1-alpha)).
    #[arg(long)]
    pub nonstrict: bool,
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    /// Slack is this factor times C*h.
    #[arg(long, default_value_t = 2.0)]
    pub slack_factor: f64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct MlfArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Args)]
pub struct GoldenArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, value_parser = parse_grids, default_value = "64,128,256")]
    pub grids: GridList,
    #[arg(long, default_value_t = 1.0)]
    pub t_final: f64,
    /// UNIT or AB.
    #[arg(long, default_value = "UNIT")]
    pub normalization: String,
    /// Compare against the exact series, valid for every lambda.
    #[arg(long)]
    pub reference: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergenceArgs {
    pub file: PathBuf,
    #[arg(long, value_parser = parse_grids, default_value = "64,128,256,512")]
    pub grids: GridList,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_SWEEPS)]
    pub max_sweeps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected two comma-separated values, got {s:?}"))?;
    Ok((a.trim().to_string(), b.trim().to_string()))
}

fn parse_box(s: &str) -> Result<Interval, String> {
    let (a, b) = parse_pair(s)?;
    let lo: f64 = a.parse().map_err(|_| format!("{a:?} is not a number"))?;
    let hi: f64 = b.parse().map_err(|_| format!("{b:?} is not a number"))?;
    Interval::new(lo, hi).map_err(|e| e.to_string())
}

fn parse_lattice(s: &str) -> Result<Lattice, String> {
    let (a, b) = parse_pair(s)?;
    let m: usize = a.parse().map_err(|_| format!("{a:?} is not a count"))?;
    let k: usize = b.parse().map_err(|_| format!("{b:?} is not a count"))?;
    Lattice::new(m, k).map_err(|e| e.to_string())
}

/// Comma-separated grid sizes, e.g. `64,128,256`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridList(pub Vec<usize>);

fn parse_grids(s: &str) -> Result<GridList, String> {
    let grids = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| format!("{p:?} is not a grid size")))
        .collect::<Result<Vec<_>, _>>()?;
    if grids.is_empty() || grids.contains(&0) {
        return Err("grid sizes must be positive".into());
    }
    Ok(GridList(grids))
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    0
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand | ErrorKind::MissingSubcommand => report_error(
                    stderr,
                    &CliError::Usage("missing subcommand; run with --help for usage".into()),
                ),
                _ => report_error(stderr, &CliError::Usage(clap_message(&e))),
            };
        }
    };
    match commands::dispatch(&cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => report_error(stderr, &e),
    }
}

fn clap_message(e: &clap::Error) -> String {
    let rendered = e.render().to_string();
    let first = rendered.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
    first.trim_start_matches("error: ").trim().to_string()
}

fn report_error(stderr: &mut dyn Write, e: &CliError) -> u8 {
    let _ = writeln!(stderr, "error[{}]: {}", e.tag(), e.message().replace('\n', "; "));
    e.exit_code()
}
