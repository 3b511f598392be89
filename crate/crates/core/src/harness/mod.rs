//! Engine dispatch, witness files and the cross-engine comparison.

use std::fmt::{self, Write as _};
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::jsat::{jsat_search, JsatConfig};
use crate::limits::Limits;
use crate::logic::{write_dimacs, write_qdimacs};
use crate::oracle::{layered_reach, Mode};
use crate::qbf::{
    add_self_loops, encode_diameter_qbf, encode_squaring_qbf, solve_diameter, solve_squaring,
    strip_self_loops, EvalConfig, QbfError,
};
use crate::tsys::{parse_aiger, parse_bits, ParseError, StateVector, Trace, TransitionSystem};
use crate::unroll::{encode_unrolled, solve_unrolled};
use crate::verdict::{BmcResult, Stats, Verdict};

pub const EXIT_REACHABLE: i32 = 10;
pub const EXIT_UNREACHABLE: i32 = 20;
pub const EXIT_LIMIT: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DISAGREEMENT: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Engine {
    Unroll,
    Qbf,
    Square,
    Jsat,
    Oracle,
}

impl Engine {
    pub const ALL: [Engine; 5] = [
        Engine::Unroll,
        Engine::Qbf,
        Engine::Square,
        Engine::Jsat,
        Engine::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Unroll => "unroll",
            Engine::Qbf => "qbf",
            Engine::Square => "square",
            Engine::Jsat => "jsat",
            Engine::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = String;
    fn from_str(s: &str) -> Result<Engine, String> {
        Engine::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown engine `{s}`"))
    }
}

/// Whether the bad state must be hit at exactly `k` steps or at any step
/// up to `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Semantics {
    #[default]
    Exact,
    UpTo,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error(transparent)]
    Qbf(#[from] QbfError),
    #[error("malformed witness: {0}")]
    Witness(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSpec {
    pub model: PathBuf,
    pub engine: Engine,
    pub bound: u32,
    pub semantics: Semantics,
    pub limits: Limits,
    pub emit_dimacs: Option<PathBuf>,
    pub emit_qdimacs: Option<PathBuf>,
    pub witness: Option<PathBuf>,
    pub trace_search: Option<PathBuf>,
}

impl RunSpec {
    pub fn new(model: impl Into<PathBuf>, engine: Engine, bound: u32) -> RunSpec {
        RunSpec {
            model: model.into(),
            engine,
            bound,
            semantics: Semantics::Exact,
            limits: Limits::default(),
            emit_dimacs: None,
            emit_qdimacs: None,
            witness: None,
            trace_search: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub result: BmcResult,
    /// Human-readable remarks, such as a rounded bound.
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        exit_code(&self.result.verdict)
    }
}

pub fn exit_code(v: &Verdict) -> i32 {
    match v {
        Verdict::Reachable(_) => EXIT_REACHABLE,
        Verdict::UnreachableAtBound => EXIT_UNREACHABLE,
        Verdict::ResourceLimit => EXIT_LIMIT,
    }
}

pub fn load_model(path: &Path) -> Result<TransitionSystem, HarnessError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    parse_aiger(&bytes).map_err(|source| HarnessError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads the model, runs the engine and writes every requested file.
pub fn run(spec: &RunSpec) -> Result<RunReport, HarnessError> {
    let sys = load_model(&spec.model)?;
    run_system(&sys, spec)
}

pub fn run_system(sys: &TransitionSystem, spec: &RunSpec) -> Result<RunReport, HarnessError> {
    let mut notes = Vec::new();
    if let Some(path) = &spec.emit_dimacs {
        let (cnf, _) = encode_unrolled(sys, spec.bound);
        fs::write(path, write_dimacs(&cnf)).map_err(io_err(path))?;
    }
    if let Some(path) = &spec.emit_qdimacs {
        let qbf = match (spec.engine, spec.semantics) {
            (Engine::Square, Semantics::Exact) => encode_squaring_qbf(sys, spec.bound)?.0,
            (Engine::Square, Semantics::UpTo) => {
                encode_squaring_qbf(&add_self_loops(sys), round_up_pow2(spec.bound))?.0
            }
            _ => encode_diameter_qbf(sys, spec.bound).0,
        };
        fs::write(path, write_qdimacs(&qbf)).map_err(io_err(path))?;
    }
    let log = match &spec.trace_search {
        Some(path) if spec.engine == Engine::Jsat => {
            let f = fs::File::create(path).map_err(io_err(path))?;
            Some(Box::new(BufWriter::new(f)) as Box<dyn std::io::Write>)
        }
        Some(_) => {
            notes.push(format!("--trace-search is ignored by the {} engine", spec.engine));
            None
        }
        None => None,
    };
    let result = solve(sys, spec.engine, spec.bound, spec.semantics, &spec.limits, log, &mut notes)?;
    if let (Some(path), Some(trace)) = (&spec.witness, result.verdict.trace()) {
        fs::write(path, write_witness(trace)).map_err(io_err(path))?;
    }
    Ok(RunReport { result, notes })
}

/// Smallest power of two `>= k`, and at least 1.
pub fn round_up_pow2(k: u32) -> u32 {
    k.max(1).next_power_of_two()
}

/// Runs one engine on one bound.
pub fn solve(
    sys: &TransitionSystem,
    engine: Engine,
    k: u32,
    semantics: Semantics,
    limits: &Limits,
    log: Option<Box<dyn std::io::Write>>,
    notes: &mut Vec<String>,
) -> Result<BmcResult, HarnessError> {
    let qbf_cfg = EvalConfig::default();
    match (engine, semantics) {
        (Engine::Square, Semantics::Exact) => Ok(solve_squaring(sys, k, &qbf_cfg, limits)?),
        (Engine::Square, Semantics::UpTo) => {
            let target = round_up_pow2(k);
            if target != k {
                notes.push(format!("bound {k} rounded up to {target} on the self-loop system"));
            }
            let mut r = solve_squaring(&add_self_loops(sys), target, &qbf_cfg, limits)?;
            if let Verdict::Reachable(t) = &r.verdict {
                r.verdict = Verdict::Reachable(strip_self_loops(t));
            }
            Ok(r)
        }
        (Engine::Oracle, _) => Ok(solve_oracle(sys, k, semantics, notes)),
        (Engine::Jsat, Semantics::Exact) => {
            let cfg = JsatConfig {
                limits: *limits,
                ..JsatConfig::default()
            };
            Ok(jsat_search(sys, k, &cfg, log).result)
        }
        (_, Semantics::Exact) => Ok(exact(sys, engine, k, limits)),
        (_, Semantics::UpTo) => {
            if engine == Engine::Jsat && log.is_some() {
                notes.push("--trace-search records exact runs only".to_string());
            }
            Ok(up_to(sys, engine, k, limits))
        }
    }
}

fn exact(sys: &TransitionSystem, engine: Engine, k: u32, limits: &Limits) -> BmcResult {
    match engine {
        Engine::Unroll => solve_unrolled(sys, k, limits),
        Engine::Qbf => solve_diameter(sys, k, &EvalConfig::default(), limits),
        Engine::Jsat => {
            let cfg = JsatConfig {
                limits: *limits,
                ..JsatConfig::default()
            };
            jsat_search(sys, k, &cfg, None).result
        }
        Engine::Square | Engine::Oracle => unreachable!("dispatched by solve"),
    }
}

/// Tries bounds `0..=k` in order and stops at the first reachable one,
/// sharing one deadline.
fn up_to(sys: &TransitionSystem, engine: Engine, k: u32, limits: &Limits) -> BmcResult {
    let start = Instant::now();
    let mut stats = Stats::default();
    let mut verdict = Verdict::UnreachableAtBound;
    for j in 0..=k {
        let left = limits.timeout.saturating_sub(start.elapsed());
        if left.is_zero() {
            verdict = Verdict::ResourceLimit;
            break;
        }
        let r = exact(sys, engine, j, &Limits::new(left, limits.mem_bytes));
        merge(&mut stats, &r.stats);
        match r.verdict {
            Verdict::UnreachableAtBound => {}
            v => {
                verdict = v;
                break;
            }
        }
    }
    BmcResult {
        verdict,
        stats,
        wall_time: start.elapsed(),
    }
}

fn merge(into: &mut Stats, s: &Stats) {
    into.vars = into.vars.max(s.vars);
    into.clauses = into.clauses.max(s.clauses);
    into.solver_calls += s.solver_calls;
    into.decisions += s.decisions;
    into.conflicts += s.conflicts;
    into.propagations += s.propagations;
    into.window_shifts += s.window_shifts;
    into.peak_bytes = into.peak_bytes.max(s.peak_bytes);
}

fn solve_oracle(sys: &TransitionSystem, k: u32, semantics: Semantics, notes: &mut Vec<String>) -> BmcResult {
    let start = Instant::now();
    let mode = match semantics {
        Semantics::Exact => Mode::Exact,
        Semantics::UpTo => Mode::UpTo,
    };
    let verdict = match layered_reach(sys, k, mode) {
        Ok((true, Some(t))) => Verdict::Reachable(t),
        Ok((true, None)) => unreachable!("the oracle always reports a witness"),
        Ok((false, _)) => Verdict::UnreachableAtBound,
        Err(e) => {
            notes.push(e.to_string());
            Verdict::ResourceLimit
        }
    };
    BmcResult {
        verdict,
        stats: Stats::default(),
        wall_time: start.elapsed(),
    }
}

/// `k=K`, then the `K+1` states, then the `K` input vectors when the system
/// has inputs. Bits are in declaration order.
pub fn write_witness(trace: &Trace) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "k={}", trace.len());
    for s in &trace.states {
        let _ = writeln!(out, "{s}");
    }
    if trace.inputs.first().is_some_and(|x| !x.is_empty()) {
        for x in &trace.inputs {
            let _ = writeln!(out, "{}", StateVector::new(x.clone()));
        }
    }
    out
}

/// Parses a witness for a system with `inputs` primary inputs.
pub fn parse_witness(text: &str, inputs: usize) -> Result<Trace, HarnessError> {
    let bad = |m: String| HarnessError::Witness(m);
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let k: usize = header
        .strip_prefix("k=")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad(format!("bad header `{header}`")))?;
    let mut states = Vec::with_capacity(k + 1);
    for i in 0..=k {
        let line = lines.next().ok_or_else(|| bad(format!("missing state {i}")))?;
        states.push(StateVector::new(parse_bits(line).map_err(bad)?));
    }
    let mut xs = Vec::with_capacity(k);
    for i in 0..k {
        if inputs == 0 {
            xs.push(Vec::new());
            continue;
        }
        let line = lines.next().ok_or_else(|| bad(format!("missing inputs of step {i}")))?;
        let bits = parse_bits(line).map_err(bad)?;
        if bits.len() != inputs {
            return Err(bad(format!("step {i} has {} inputs, expected {inputs}", bits.len())));
        }
        xs.push(bits);
    }
    if let Some(extra) = lines.find(|l| !l.is_empty()) {
        return Err(bad(format!("trailing line `{extra}`")));
    }
    Ok(Trace { states, inputs: xs })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub model: String,
    pub bound: u32,
    pub engine: Engine,
    pub verdict: Option<bool>,
    pub label: &'static str,
    pub time: Duration,
    pub stats: Stats,
    /// Set when the engine could not run this cell at all.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CompareReport {
    pub cells: Vec<Cell>,
    pub disagreements: Vec<String>,
}

impl CompareReport {
    pub fn exit_code(&self) -> i32 {
        if self.disagreements.is_empty() {
            0
        } else {
            EXIT_DISAGREEMENT
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<24} {:>5} {:<7} {:<14} {:>10} {:>9} {:>12}",
            "model", "bound", "engine", "verdict", "time_ms", "clauses", "conflicts"
        );
        for c in &self.cells {
            let label = c.skipped.as_deref().map_or(c.label, |_| "skipped");
            let _ = writeln!(
                out,
                "{:<24} {:>5} {:<7} {:<14} {:>10.3} {:>9} {:>12}",
                c.model,
                c.bound,
                c.engine,
                label,
                c.time.as_secs_f64() * 1000.0,
                c.stats.clauses,
                c.stats.conflicts
            );
        }
        for d in &self.disagreements {
            let _ = writeln!(out, "FAILURE {d}");
        }
        out
    }
}

/// Runs every engine on every `(model, bound)` cell in parallel and flags
/// cells whose decided verdicts differ.
pub fn compare(
    models: &[(String, TransitionSystem)],
    bounds: std::ops::RangeInclusive<u32>,
    engines: &[Engine],
    semantics: Semantics,
    limits: &Limits,
) -> CompareReport {
    let work: Vec<(usize, u32)> = (0..models.len())
        .flat_map(|m| bounds.clone().map(move |k| (m, k)))
        .collect();
    let rows: Vec<(Vec<Cell>, Option<String>)> = work
        .par_iter()
        .map(|&(m, k)| {
            let (name, sys) = &models[m];
            let cells: Vec<Cell> = engines
                .iter()
                .map(|&engine| run_cell(name, sys, engine, k, semantics, limits))
                .collect();
            let decided: Vec<(Engine, bool)> = cells
                .iter()
                .filter_map(|c| c.verdict.map(|v| (c.engine, v)))
                .collect();
            let clash = decided.windows(2).any(|w| w[0].1 != w[1].1).then(|| {
                let parts: Vec<String> = decided.iter().map(|(e, v)| format!("{e}={v}")).collect();
                format!("{name} bound {k}: {}", parts.join(" "))
            });
            (cells, clash)
        })
        .collect();
    let mut report = CompareReport::default();
    for (cells, clash) in rows {
        report.cells.extend(cells);
        report.disagreements.extend(clash);
    }
    report
}

fn run_cell(
    name: &str,
    sys: &TransitionSystem,
    engine: Engine,
    k: u32,
    semantics: Semantics,
    limits: &Limits,
) -> Cell {
    let mut notes = Vec::new();
    let mut cell = Cell {
        model: name.to_string(),
        bound: k,
        engine,
        verdict: None,
        label: Verdict::ResourceLimit.label(),
        time: Duration::ZERO,
        stats: Stats::default(),
        skipped: None,
    };
    match solve(sys, engine, k, semantics, limits, None, &mut notes) {
        Ok(r) => {
            if let Some(t) = r.verdict.trace() {
                // A witness that does not replay is as wrong as a bad verdict.
                if let Err(e) = t.validate(sys) {
                    cell.skipped = Some(format!("invalid witness: {e}"));
                    cell.verdict = Some(false);
                    cell.label = "bad-witness";
                    return cell;
                }
            }
            cell.verdict = r.verdict.decided();
            cell.label = r.verdict.label();
            cell.time = r.wall_time;
            cell.stats = r.stats;
        }
        Err(e) => cell.skipped = Some(e.to_string()),
    }
    cell
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::random_corpus;
    use crate::tsys::tests::counter;

    #[test]
    fn witness_round_trip() {
        for (_, sys) in random_corpus(21, 20, 5) {
            for k in 0..5 {
                if let Ok((true, Some(t))) = layered_reach(&sys, k, Mode::Exact) {
                    let text = write_witness(&t);
                    let back = parse_witness(&text, sys.num_inputs()).unwrap();
                    assert_eq!(back, t);
                    assert_eq!(back.validate(&sys), Ok(()));
                }
            }
        }
    }

    #[test]
    fn witness_layout() {
        let t = solve_unrolled(&counter(), 3, &Limits::default());
        let text = write_witness(t.verdict.trace().unwrap());
        assert_eq!(text, "k=3\n00\n10\n01\n11\n");
    }

    #[test]
    fn witness_rejects_garbage() {
        assert!(parse_witness("", 0).is_err());
        assert!(parse_witness("k=1\n00\n", 0).is_err());
        assert!(parse_witness("k=1\n00\n10\n1\n", 1).is_ok());
        assert!(parse_witness("k=1\n00\n10\n11\n", 1).is_err());
        assert!(parse_witness("k=0\n0x\n", 0).is_err());
        assert!(parse_witness("k=0\n00\n11\n", 0).is_err());
    }

    #[test]
    fn rounding() {
        assert_eq!(
            [0, 1, 2, 3, 5, 8].map(round_up_pow2),
            [1, 1, 2, 4, 8, 8]
        );
    }

    #[test]
    fn up_to_semantics() {
        let sys = counter();
        let mut notes = Vec::new();
        for engine in [Engine::Unroll, Engine::Qbf, Engine::Jsat, Engine::Oracle, Engine::Square] {
            for k in 0..=5 {
                let r = solve(&sys, engine, k, Semantics::UpTo, &Limits::default(), None, &mut notes)
                    .unwrap();
                assert_eq!(r.verdict.decided(), Some(k >= 3), "{engine} {k}");
                if let Some(t) = r.verdict.trace() {
                    assert_eq!(t.len(), 3);
                }
            }
        }
        assert!(notes.iter().any(|n| n.contains("rounded up")));
    }

    #[test]
    fn compare_flags_nothing_on_agreeing_engines() {
        let models: Vec<_> = random_corpus(22, 10, 4)
            .into_iter()
            .map(|(s, m)| (s.to_string(), m))
            .collect();
        let r = compare(
            &models,
            0..=4,
            &[Engine::Unroll, Engine::Jsat, Engine::Oracle, Engine::Qbf],
            Semantics::Exact,
            &Limits::default(),
        );
        assert_eq!(r.cells.len(), 10 * 5 * 4);
        assert!(r.disagreements.is_empty(), "{}", r.render());
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn compare_with_no_engines() {
        let models = vec![("c".to_string(), counter())];
        let r = compare(&models, 0..=3, &[], Semantics::Exact, &Limits::default());
        assert!(r.cells.is_empty());
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn square_exact_needs_power_of_two() {
        let mut notes = Vec::new();
        let err = solve(&counter(), Engine::Square, 3, Semantics::Exact, &Limits::default(), None, &mut notes);
        assert!(matches!(err, Err(HarnessError::Qbf(QbfError::NotPowerOfTwo(3)))));
        let r = compare(
            &[("c".to_string(), counter())],
            3..=3,
            &[Engine::Square, Engine::Unroll],
            Semantics::Exact,
            &Limits::default(),
        );
        assert!(r.cells[0].skipped.is_some());
        assert!(r.disagreements.is_empty());
    }
}
