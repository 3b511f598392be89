use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::Parser;

use qbmc::harness::{self, Engine, RunSpec, Semantics, EXIT_USAGE};
use qbmc::oracle::random_corpus;
use qbmc::Limits;

/// Bounded reachability checker for ASCII AIGER models.
///
/// Exit codes: 10 reachable, 20 unreachable, 0 resource limit, 1 usage or
/// parse error, 2 engine disagreement under --compare.
#[derive(Debug, Parser)]
#[command(name = "qbmc", version)]
struct Cli {
    /// Model files (.aag). Under --compare, none means a random corpus.
    models: Vec<PathBuf>,

    /// Engine to run; under --compare, a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    engine: Vec<Engine>,

    /// Bound k. Under --compare, bounds 0..=k are checked (default 6).
    #[arg(long)]
    bound: Option<u32>,

    /// Bad state at exactly k steps (the default).
    #[arg(long, conflicts_with = "upto")]
    exact: bool,

    /// Bad state at any step up to k.
    #[arg(long)]
    upto: bool,

    /// Seconds per run.
    #[arg(long, default_value_t = 300)]
    timeout: u64,

    /// Memory ceiling in bytes.
    #[arg(long = "mem-limit", default_value_t = 1 << 30)]
    mem_limit: u64,

    /// Write the unrolled CNF for the bound.
    #[arg(long = "emit-dimacs")]
    emit_dimacs: Option<PathBuf>,

    /// Write the QBF (squaring form for --engine square, diameter form otherwise).
    #[arg(long = "emit-qdimacs")]
    emit_qdimacs: Option<PathBuf>,

    /// Write the counterexample, if any.
    #[arg(long)]
    witness: Option<PathBuf>,

    /// Stream the jsat search log.
    #[arg(long = "trace-search")]
    trace_search: Option<PathBuf>,

    /// Seed for the random corpus; QBMC_SEED takes precedence.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Run every engine on every model and bound and report disagreements.
    #[arg(long)]
    compare: bool,
}

const CORPUS_SIZE: usize = 50;
const CORPUS_MAX_LATCHES: usize = 8;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE as u8),
            };
        }
    };
    match real_main(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("qbmc: {e}");
            ExitCode::from(EXIT_USAGE as u8)
        }
    }
}

fn real_main(cli: Cli) -> Result<i32> {
    let semantics = if cli.upto { Semantics::UpTo } else { Semantics::Exact };
    let limits = Limits::new(Duration::from_secs(cli.timeout), cli.mem_limit);
    if cli.compare {
        return compare(&cli, semantics, &limits);
    }

    let [model] = cli.models.as_slice() else {
        bail!("expected exactly one model file, got {}", cli.models.len());
    };
    let [engine] = cli.engine.as_slice() else {
        bail!("expected exactly one --engine");
    };
    let Some(bound) = cli.bound else {
        bail!("--bound is required");
    };
    let spec = RunSpec {
        model: model.clone(),
        engine: *engine,
        bound,
        semantics,
        limits,
        emit_dimacs: cli.emit_dimacs.clone(),
        emit_qdimacs: cli.emit_qdimacs.clone(),
        witness: cli.witness.clone(),
        trace_search: cli.trace_search.clone(),
    };
    let report = harness::run(&spec)?;
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    let r = &report.result;
    println!(
        "{} engine={} bound={} time={:.3}s vars={} clauses={} calls={} conflicts={} shifts={} peak_bytes={}",
        r.verdict.label(),
        engine,
        bound,
        r.wall_time.as_secs_f64(),
        r.stats.vars,
        r.stats.clauses,
        r.stats.solver_calls,
        r.stats.conflicts,
        r.stats.window_shifts,
        r.stats.peak_bytes
    );
    if let Some(t) = r.verdict.trace() {
        print!("{}", harness::write_witness(t));
    }
    Ok(report.exit_code())
}

fn compare(cli: &Cli, semantics: Semantics, limits: &Limits) -> Result<i32> {
    let seed = match std::env::var("QBMC_SEED") {
        Ok(s) => s.trim().parse().context("QBMC_SEED is not an unsigned integer")?,
        Err(_) => cli.seed,
    };
    let models: Vec<(String, qbmc::TransitionSystem)> = if cli.models.is_empty() {
        random_corpus(seed, CORPUS_SIZE, CORPUS_MAX_LATCHES)
            .into_iter()
            .map(|(s, m)| (format!("random:{s}"), m))
            .collect()
    } else {
        cli.models
            .iter()
            .map(|p| Ok((p.display().to_string(), harness::load_model(p)?)))
            .collect::<Result<_>>()?
    };
    let engines = if cli.engine.is_empty() {
        vec![Engine::Unroll, Engine::Jsat, Engine::Oracle]
    } else {
        cli.engine.clone()
    };
    let report = harness::compare(&models, 0..=cli.bound.unwrap_or(6), &engines, semantics, limits);
    print!("{}", report.render());
    println!(
        "{} cells, {} disagreements",
        report.cells.len(),
        report.disagreements.len()
    );
    Ok(report.exit_code())
}
