//! Command-line front end: `simulate`, `sweep`, `oracle` and `verify`.
//!
//! Exit status: 0 on success, 1 on invalid flags or a failed check, 2 when
//! no trial of a batch converged within its budget.

mod output;

use std::io::Write;

use clap::{Parser, Subcommand, ValueEnum};

pub use output::{parse_csv, render_rows, Format, OutputRow, RowContext, SCHEMA_VERSION};

use crate::engine::{Limit, LimitMetric};
use crate::experiments::{run_batch, ExperimentError, InitPolicy, TrialBatchSpec};
use crate::oracle::{
    flip_expected_closed_form, flip_expected_recurrence, gros_length, gros_term, harmonic_bound,
    timeopt_exact_expected, timeopt_exact_expected_given_ones, ExactRational, OracleError, TIMEOPT_EXACT_MAX_N,
};
use crate::protocols::ProtocolId;
use crate::schedulers::{split_seed, SchedulerKind, RNG_ALGORITHM};
use crate::verify::{format_exact, run_suite, Level};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_TRUNCATED: i32 = 2;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "POPCOUNT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "popcount", version, about = "Population-protocol counting lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one batch of trials and print its summary row.
    Simulate(SimulateArgs),
    /// Run one batch per population size and print one row per size.
    Sweep(SweepArgs),
    /// Print an exact oracle value.
    Oracle(OracleArgs),
    /// Run the acceptance suite and print a pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, clap::Args)]
struct BatchArgs {
    #[arg(long, value_parser = parse_from_str::<ProtocolId>)]
    protocol: ProtocolId,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value = "bst", value_parser = parse_from_str::<SchedulerKind>)]
    scheduler: SchedulerKind,
    #[arg(long, default_value = "random", value_parser = parse_from_str::<InitPolicy>)]
    init: InitPolicy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Budget on total interactions per trial (default: protocol-specific).
    #[arg(long)]
    max_interactions: Option<u64>,
    /// Number of mobile states of the naming protocol (default n + 1).
    #[arg(long)]
    p: Option<u32>,
}

#[derive(Debug, clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    batch: BatchArgs,
}

#[derive(Debug, clap::Args)]
struct SweepArgs {
    /// Comma-separated, strictly ascending population sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    n_values: Vec<usize>,
    #[command(flatten)]
    batch: BatchArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleKind {
    FlipClosed,
    FlipRecurrence,
    GrosTerm,
    GrosLength,
    Harmonic,
    TimeoptExact,
}

#[derive(Debug, clap::Args)]
struct OracleArgs {
    #[arg(long, value_enum)]
    which: OracleKind,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    k: Option<u64>,
}

#[derive(Debug, clap::Args)]
struct VerifyArgs {
    #[arg(long, default_value = "fast", value_parser = parse_from_str::<Level>)]
    level: Level,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn parse_from_str<T: std::str::FromStr<Err = String>>(s: &str) -> Result<T, String> {
    s.parse()
}

/// Runs the command line `args` (program name first) and returns the exit
/// status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
                return EXIT_USAGE;
            }
            let _ = write!(out, "{rendered}");
            return EXIT_OK;
        }
    };
    if let Err(msg) = configure_threads() {
        let _ = writeln!(err, "error: {msg}");
        return EXIT_USAGE;
    }
    let result = match cli.command {
        Command::Simulate(a) => cmd_batches(&a.batch, &[a.n], out),
        Command::Sweep(a) => cmd_batches(&a.batch, &a.n_values, out),
        Command::Oracle(a) => cmd_oracle(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure { code, message }) => {
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let code = match e {
            ExperimentError::AllTrialsTruncated { .. } => EXIT_TRUNCATED,
            _ => EXIT_USAGE,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        Failure::usage(e.to_string())
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t >= 1)
        .ok_or_else(|| format!("{THREADS_ENV} must be an integer >= 1, got `{raw}`"))?;
    // a second call in the same process (tests) finds the pool already built
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn command_echo(b: &BatchArgs, n: usize) -> String {
    let mut s = format!(
        "simulate --protocol {} --n {n} --trials {} --scheduler {} --init {} --seed {}",
        b.protocol,
        b.trials,
        b.scheduler,
        b.init.label(),
        b.seed
    );
    if let Some(m) = b.max_interactions {
        s.push_str(&format!(" --max-interactions {m}"));
    }
    if let Some(p) = b.p {
        s.push_str(&format!(" --p {p}"));
    }
    s
}

/// Exact expected BST interactions for the batch, when known.
fn oracle_reference(spec: &TrialBatchSpec) -> Result<Option<ExactRational>, OracleError> {
    let n = spec.n as u64;
    let same_law = matches!(spec.scheduler, SchedulerKind::BstOnly | SchedulerKind::UniformPair);
    if !same_law || spec.budget.is_some() {
        return Ok(None);
    }
    Ok(match (spec.protocol, &spec.init) {
        (ProtocolId::Flip, InitPolicy::AllZero | InitPolicy::AllOne) => Some(flip_expected_closed_form(n)?),
        (ProtocolId::TimeOpt, _) if n > TIMEOPT_EXACT_MAX_N => None,
        (ProtocolId::TimeOpt, InitPolicy::AllZero) => Some(timeopt_exact_expected_given_ones(n, 0)?),
        (ProtocolId::TimeOpt, InitPolicy::AllOne) => Some(timeopt_exact_expected_given_ones(n, n)?),
        (ProtocolId::TimeOpt, InitPolicy::UniformRandomMarks) => Some(timeopt_exact_expected(n)?),
        _ => None,
    })
}

fn cmd_batches(b: &BatchArgs, n_values: &[usize], out: &mut dyn Write) -> Result<i32, Failure> {
    if n_values.is_empty() {
        return Err(Failure::usage("at least one n is required"));
    }
    if n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Failure::usage("--n-values must be strictly ascending"));
    }
    if b.max_interactions == Some(0) {
        return Err(Failure::usage("--max-interactions must be at least 1"));
    }
    if b.p.is_some() && b.protocol != ProtocolId::GrosNaming {
        return Err(Failure::usage("--p only applies to the gros protocol"));
    }
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let seed = if n_values.len() == 1 { b.seed } else { split_seed(b.seed, n as u64) };
        let mut spec = TrialBatchSpec::new(b.protocol, n, b.trials, b.scheduler, b.init.clone(), seed);
        spec.p = b.p;
        spec.budget = b.max_interactions.map(|bound| Limit { metric: LimitMetric::Interactions, bound });
        let result = run_batch(&spec)?;
        let converged = result.records.iter().filter(|r| r.converged());
        let final_c = converged.fold(None, |acc: Option<(u64, u64)>, r| {
            Some(acc.map_or((r.final_c, r.final_c), |(lo, hi)| (lo.min(r.final_c), hi.max(r.final_c))))
        });
        let oracle = oracle_reference(&spec)?.map(|v| (v.to_f64(), v.to_string()));
        let mut command = command_echo(b, n);
        if n_values.len() > 1 {
            command.push_str(&format!(" (sweep seed {})", b.seed));
        }
        let ctx = RowContext {
            command,
            protocol: b.protocol.to_string(),
            n,
            p: if b.protocol == ProtocolId::GrosNaming { Some(spec.state_bound()) } else { None },
            scheduler: b.scheduler.to_string(),
            init: b.init.label(),
            seed,
            rng: RNG_ALGORITHM.to_string(),
            max_interactions: b.max_interactions,
            final_c: final_c.unwrap_or((0, 0)),
            oracle,
        };
        rows.push(OutputRow::new(ctx, &result.summary));
    }
    let format = match b.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    let bytes = render_rows(&rows, format).map_err(Failure::usage)?;
    output::write_all(out, &bytes).map_err(|e| Failure::usage(e.to_string()))?;
    Ok(EXIT_OK)
}

fn cmd_oracle(a: &OracleArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let need_n = || a.n.ok_or_else(|| Failure::usage("--n is required for this oracle"));
    let value = match a.which {
        OracleKind::FlipClosed => flip_expected_closed_form(need_n()?)?,
        OracleKind::FlipRecurrence => flip_expected_recurrence(need_n()?)?,
        OracleKind::Harmonic => harmonic_bound(need_n()?)?,
        OracleKind::TimeoptExact => timeopt_exact_expected(need_n()?)?,
        OracleKind::GrosLength => {
            let n = need_n()?;
            let n = u32::try_from(n).map_err(|_| OracleError::Overflow { n })?;
            ExactRational::from(gros_length(n)?)
        }
        OracleKind::GrosTerm => {
            let k = a.k.ok_or_else(|| Failure::usage("--k is required for gros-term"))?;
            if k == 0 {
                return Err(Failure::usage("--k must be at least 1 (terms are 1-based)"));
            }
            ExactRational::from(u64::from(gros_term(k)))
        }
    };
    let _ = writeln!(out, "{}", format_exact(&value));
    Ok(EXIT_OK)
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let report = run_suite(a.level, a.seed);
    output::write_all(out, report.render().as_bytes()).map_err(|e| Failure::usage(e.to_string()))?;
    Ok(if report.passed() { EXIT_OK } else { EXIT_USAGE })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("popcount").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(call(&["oracle", "--which", "flip-closed", "--n", "4"]).1, "64/3 ≈ 21.333333333333333333\n");
        assert_eq!(call(&["oracle", "--which", "gros-length", "--n", "10"]).1, "1023\n");
        assert_eq!(call(&["oracle", "--which", "harmonic", "--n", "1"]).1, "1\n");
        assert_eq!(call(&["oracle", "--which", "gros-term", "--k", "8"]).1, "4\n");
    }

    #[test]
    fn oracle_out_of_range_exits_one() {
        let (code, out, err) = call(&["oracle", "--which", "timeopt-exact", "--n", "5"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(out.is_empty());
        assert!(err.contains("error"));
        assert_eq!(call(&["oracle", "--which", "flip-closed"]).0, EXIT_USAGE);
    }

    #[test]
    fn bad_flags_exit_one() {
        assert_eq!(call(&["simulate", "--protocol", "nope", "--n", "3"]).0, EXIT_USAGE);
        assert_eq!(call(&["simulate", "--protocol", "flip"]).0, EXIT_USAGE);
        assert_eq!(call(&["simulate", "--protocol", "flip", "--n", "3", "--init", "worst"]).0, EXIT_USAGE);
        assert_eq!(call(&["bogus"]).0, EXIT_USAGE);
        assert_eq!(call(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn truncation_exits_two_without_output() {
        let (code, out, err) =
            call(&["simulate", "--protocol", "flip", "--n", "10", "--trials", "5", "--max-interactions", "3"]);
        assert_eq!(code, EXIT_TRUNCATED);
        assert!(out.is_empty());
        assert!(err.contains("converged"));
    }
}
