//! `placer`: place, verify, generate and benchmark replica placements.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use replica_placement::evaluator::{failure_aggregate, is_balanced, BalanceReport};
use replica_placement::model::generate_random_raw;
use replica_placement::oracles::{
    brute_force_place_with_budget, greedy_place, PlacerOutcome, DEFAULT_BRUTE_BUDGET,
};
use replica_placement::placement::Placement;
use replica_placement::solver::{solve, solve_with_report, Mode};
use replica_placement::{parse_topology, preprocess, FailureAggregate, FailureTree};

pub const BUDGET_ENV: &str = "PLACER_BRUTE_BUDGET";
/// Redraws allowed when a generated tree has fewer leaves than requested replicas.
const MAX_REDRAWS: u64 = 100;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Budget(String),
    #[error("aggregate mismatch: expected {expected}, got {actual}")]
    Mismatch { expected: String, actual: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Mismatch { .. } => 1,
            CliError::Input(_) | CliError::Io { .. } => 2,
            CliError::Infeasible(_) => 3,
            CliError::Budget(_) => 4,
            CliError::Internal(_) => 5,
        }
    }
}

impl From<replica_placement::Error> for CliError {
    fn from(e: replica_placement::Error) -> Self {
        use replica_placement::Error as E;
        let msg = e.to_string();
        match e {
            E::ReplicasOutOfRange { .. } => CliError::Infeasible(msg),
            E::BudgetExceeded { .. } => CliError::Budget(msg),
            E::Internal(_) => CliError::Internal(msg),
            _ => CliError::Input(msg),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    Brute,
    Greedy,
    Dp,
    Fast,
}

impl Algorithm {
    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::Brute => "brute",
            Algorithm::Greedy => "greedy",
            Algorithm::Dp => "dp",
            Algorithm::Fast => "fast",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "placer",
    version,
    about = "Replica placement on tree-shaped failure models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a placement with minimal failure aggregate.
    Place(PlaceArgs),
    /// Evaluate the failure aggregate of a given placement.
    Verify(VerifyArgs),
    /// Write a random topology file.
    Gen(GenArgs),
    /// Time algorithms on random trees and write CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct PlaceArgs {
    #[arg(long)]
    pub tree: PathBuf,
    #[arg(long)]
    pub replicas: usize,
    #[arg(long, value_enum, default_value_t = Algorithm::Fast)]
    pub algorithm: Algorithm,
    #[arg(long)]
    pub check_balanced: bool,
    #[arg(long)]
    pub json: bool,
    /// Print divide-phase visits (dp and fast only) to stderr.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub tree: PathBuf,
    /// One leaf name per line.
    #[arg(long)]
    pub placement: PathBuf,
    /// Expected aggregate such as `<1,1,4,7>`.
    #[arg(long)]
    pub expect: Option<String>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub nodes: usize,
    #[arg(long, default_value_t = 4)]
    pub max_children: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub nodes: usize,
    #[arg(long)]
    pub replicas: usize,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Algorithm::Fast])]
    pub algorithms: Vec<Algorithm>,
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub max_children: usize,
    /// Skip the cross-algorithm aggregate check.
    #[arg(long)]
    pub no_assert: bool,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(&cli.command, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: &Command, out: &mut impl Write) -> Result<(), CliError> {
    match command {
        Command::Place(a) => cmd_place(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Gen(a) => cmd_gen(a),
        Command::Bench(a) => cmd_bench(a).map(|_| ()),
    }
}

fn write_out(out: &mut impl Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Internal(format!("writing output: {e}")))
}

pub fn load_tree(path: &Path) -> Result<FailureTree, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_topology(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Brute-force budget from the environment, or the default.
pub fn brute_budget() -> Result<u64, CliError> {
    match std::env::var(BUDGET_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("{BUDGET_ENV} must be an integer, got `{v}`"))),
        Err(_) => Ok(DEFAULT_BRUTE_BUDGET),
    }
}

pub fn run_algorithm(
    tree: &FailureTree,
    rho: usize,
    algorithm: Algorithm,
    budget: u64,
) -> Result<PlacerOutcome, CliError> {
    Ok(match algorithm {
        Algorithm::Brute => brute_force_place_with_budget(tree, rho, budget)?,
        Algorithm::Greedy => greedy_place(tree, rho)?,
        Algorithm::Dp => solve(tree, rho, Mode::Basic)?,
        Algorithm::Fast => solve(tree, rho, Mode::Fast)?,
    })
}

#[derive(Debug, Serialize)]
struct PlaceJson {
    placement: Vec<String>,
    aggregate: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    balanced: Option<bool>,
}

fn describe_balance(tree: &FailureTree, report: &BalanceReport) -> String {
    match report {
        BalanceReport::Balanced => "balanced: yes".to_string(),
        BalanceReport::Unbalanced {
            node,
            unfilled_child,
            sibling,
        } => format!(
            "balanced: no (node={} child={} sibling={})",
            tree.name(*node),
            tree.name(*unfilled_child),
            tree.name(*sibling)
        ),
    }
}

pub fn cmd_place(args: &PlaceArgs, out: &mut impl Write) -> Result<(), CliError> {
    let tree = load_tree(&args.tree)?;
    let budget = brute_budget()?;
    let outcome = match (args.trace, args.algorithm) {
        (true, Algorithm::Dp | Algorithm::Fast) => {
            let mode = if args.algorithm == Algorithm::Dp {
                Mode::Basic
            } else {
                Mode::Fast
            };
            let report = solve_with_report(&tree, args.replicas, mode)?;
            for line in report.trace_lines(&tree) {
                eprintln!("{line}");
            }
            report.outcome
        }
        _ => run_algorithm(&tree, args.replicas, args.algorithm, budget)?,
    };
    let names = outcome.placement.sorted_names(&tree);
    let balance = if args.check_balanced {
        Some(is_balanced(&tree, &outcome.placement)?)
    } else {
        None
    };

    if args.json {
        let doc = PlaceJson {
            placement: names,
            aggregate: outcome.aggregate.descending(),
            balanced: balance.map(|b| b.is_balanced()),
        };
        let text = serde_json::to_string(&doc)
            .map_err(|e| CliError::Internal(format!("serializing output: {e}")))?;
        return write_out(out, &format!("{text}\n"));
    }
    let mut text = String::new();
    for n in &names {
        text.push_str(n);
        text.push('\n');
    }
    text.push_str(&format!("aggregate: {}\n", outcome.aggregate));
    if let Some(b) = balance {
        text.push_str(&describe_balance(&tree, &b));
        text.push('\n');
    }
    write_out(out, &text)
}

/// Reads a placement file: one leaf name per line, blank lines and `#` comments skipped.
pub fn load_placement(tree: &FailureTree, path: &Path) -> Result<Placement, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let names = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    Ok(Placement::from_names(tree, names)?)
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut impl Write) -> Result<(), CliError> {
    let tree = load_tree(&args.tree)?;
    let placement = load_placement(&tree, &args.placement)?;
    let aggregate = failure_aggregate(&tree, &placement)?;
    write_out(out, &format!("{aggregate}\n"))?;
    if let Some(expect) = &args.expect {
        let expected: FailureAggregate = expect.trim().parse()?;
        if expected != aggregate {
            return Err(CliError::Mismatch {
                expected: expected.to_string(),
                actual: aggregate.to_string(),
            });
        }
    }
    Ok(())
}

pub fn cmd_gen(args: &GenArgs) -> Result<(), CliError> {
    let raw = generate_random_raw(args.nodes, args.max_children, args.seed)?;
    let tree = preprocess(raw)?;
    fs::write(&args.out, tree.to_topology()).map_err(io_err(&args.out))
}

/// One timed run of one algorithm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BenchRow {
    pub algorithm: &'static str,
    pub n: usize,
    pub rho: usize,
    pub seed: u64,
    pub nanos: u128,
    pub evals: u64,
    pub aggregate: String,
}

/// Runs the benchmark and writes the CSV. Rows come back in (trial, algorithm) order.
pub fn cmd_bench(args: &BenchArgs) -> Result<Vec<BenchRow>, CliError> {
    let rows = bench_rows(args)?;
    let file = fs::File::create(&args.csv).map_err(io_err(&args.csv))?;
    let mut w = csv::Writer::from_writer(file);
    if rows.is_empty() {
        w.write_record([
            "algorithm",
            "n",
            "rho",
            "seed",
            "nanos",
            "evals",
            "aggregate",
        ])
        .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    for row in &rows {
        w.serialize(row)
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    w.flush().map_err(io_err(&args.csv))?;
    Ok(rows)
}

/// Times every requested algorithm on `trials` random trees. Each timing covers
/// building the tree statistics from the raw edge list and running the placer.
pub fn bench_rows(args: &BenchArgs) -> Result<Vec<BenchRow>, CliError> {
    let budget = brute_budget()?;
    let mut algorithms = args.algorithms.clone();
    algorithms.sort_by_key(|a| a.tag());
    algorithms.dedup();
    let mut rows = Vec::with_capacity(args.trials * algorithms.len());
    for trial in 0..args.trials as u64 {
        let base = args.seed.wrapping_add(trial);
        let mut drawn = None;
        for attempt in 0..MAX_REDRAWS {
            let seed = base.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let raw = generate_random_raw(args.nodes, args.max_children, seed)?;
            let leaves = preprocess(raw.clone())?.total_leaves();
            if leaves >= args.replicas {
                drawn = Some((seed, raw));
                break;
            }
        }
        let Some((seed, raw)) = drawn else {
            return Err(CliError::Infeasible(format!(
                "no tree with at least {} leaves after {MAX_REDRAWS} draws (n={})",
                args.replicas, args.nodes
            )));
        };

        let mut first: Option<FailureAggregate> = None;
        for &alg in &algorithms {
            let input = raw.clone();
            let start = Instant::now();
            let tree = preprocess(input)?;
            let outcome = run_algorithm(&tree, args.replicas, alg, budget)?;
            let nanos = start.elapsed().as_nanos();
            if !args.no_assert {
                match &first {
                    None => first = Some(outcome.aggregate.clone()),
                    Some(agg) if *agg != outcome.aggregate => {
                        return Err(CliError::Mismatch {
                            expected: agg.to_string(),
                            actual: format!(
                                "{} from {} (seed {seed})",
                                outcome.aggregate,
                                alg.tag()
                            ),
                        })
                    }
                    Some(_) => {}
                }
            }
            rows.push(BenchRow {
                algorithm: alg.tag(),
                n: args.nodes,
                rho: args.replicas,
                seed,
                nanos,
                evals: outcome.evaluations,
                aggregate: outcome.aggregate.to_string(),
            });
        }
    }
    Ok(rows)
}
