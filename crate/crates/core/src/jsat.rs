//! Windowed path search. The solver holds one copy of the transition
//! relation between `U` and `V`, the initial predicate over `U` and the bad
//! predicate over `V`, each behind an activation literal. The path
//! `Z_0 .. Z_k` lives outside the solver as a stack of decided states; the
//! window slides along it by changing assumptions only.

use std::io::{self, Write};
use std::time::Instant;

use crate::limits::Limits;
use crate::logic::{Activation, Cnf, CnfBuilder, Group, Lit, Role, StateBlock, VarMap};
use crate::satcore::{Outcome, Solver, SolverConfig};
use crate::tsys::{StateVector, Trace, TransitionSystem};
use crate::verdict::{BmcResult, Stats, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JsatConfig {
    pub limits: Limits,
    /// Keep learned clauses across solver calls.
    pub learning: bool,
    pub restarts: bool,
}

impl Default for JsatConfig {
    fn default() -> Self {
        JsatConfig {
            limits: Limits::default(),
            learning: true,
            restarts: true,
        }
    }
}

/// Activation literals of the window CNF. Each enables its part when
/// assumed true.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Activations {
    /// Initial predicate over `U`.
    pub init: Lit,
    /// Bad predicate over `V`.
    pub bad: Lit,
    /// The transition cone linking `U` and `V`.
    pub transition: Lit,
    /// `U = V`, used for the zero-step query.
    pub stay: Lit,
}

#[derive(Debug, Clone)]
pub struct WindowCnf {
    pub cnf: Cnf,
    pub map: VarMap,
    pub act: Activations,
}

/// Builds `I(U) & TR(U, V) & F(V)` with every part guarded. Nothing in it
/// depends on the bound.
pub fn build_window_cnf(sys: &TransitionSystem) -> WindowCnf {
    let n = sys.num_latches();
    let mut b = CnfBuilder::new();
    let u = b.state(StateBlock::U, n);
    let v = b.state(StateBlock::V, n);
    let xs = b.inputs(0, sys.num_inputs());
    let act = Activations {
        init: b.alloc(Role::Activation(Activation::Init)).pos(),
        bad: b.alloc(Role::Activation(Activation::Bad)).pos(),
        transition: b.alloc(Role::Activation(Activation::Transition)).pos(),
        stay: b.alloc(Role::Activation(Activation::Stay)).pos(),
    };

    b.set_guard(Some(!act.transition));
    let next = b.encode(sys, sys.latch_next(), &u, &xs, Group::Transition(0));
    for (j, &e) in next.iter().enumerate() {
        b.equate(v[j], e);
    }
    b.set_guard(Some(!act.init));
    let init = b.encode(sys, &[sys.init()], &u, &[], Group::Init);
    b.assert(init[0]);
    b.set_guard(Some(!act.bad));
    let bad = b.encode(sys, &[sys.bad()], &v, &[], Group::Bad);
    b.assert(bad[0]);
    b.set_guard(Some(!act.stay));
    for (&a, &c) in u.iter().zip(&v) {
        b.equate(a, c.into());
    }
    b.set_guard(None);

    let (cnf, map) = b.finish();
    WindowCnf { cnf, map, act }
}

/// Search counters beyond [`Stats`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Clauses of the window CNF, before any blocking or learning.
    pub window_clauses: usize,
    pub blocking_clauses: usize,
    pub max_stack: usize,
    /// Largest blocked set held at one level.
    pub max_blocked: usize,
    pub pops: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JsatReport {
    pub result: BmcResult,
    pub search: SearchStats,
}

/// The search position: decided states `Z_0 .. Z_i` and, per level, the
/// successors refuted there.
pub struct WindowState {
    solver: Solver,
    window: WindowCnf,
    decided: Vec<StateVector>,
    inputs: Vec<Vec<bool>>,
    /// `blocked[l]`: successors of `decided[l]` refuted so far.
    blocked: Vec<Vec<StateVector>>,
    /// Activation of the blocking clauses at each level, created on demand.
    level_act: Vec<Option<Lit>>,
    /// Initial states whose whole subtree is refuted.
    blocked_init: Vec<StateVector>,
    search: SearchStats,
    log: Option<Box<dyn Write>>,
}

impl WindowState {
    fn new(sys: &TransitionSystem, cfg: &JsatConfig, log: Option<Box<dyn Write>>) -> WindowState {
        let window = build_window_cnf(sys);
        let mut solver = Solver::with_config(SolverConfig {
            restarts: cfg.restarts,
            ..SolverConfig::default()
        });
        solver.load(&window.cnf);
        solver.set_budget(cfg.limits.start());
        let search = SearchStats {
            window_clauses: window.cnf.num_clauses(),
            ..SearchStats::default()
        };
        WindowState {
            solver,
            window,
            decided: Vec::new(),
            inputs: Vec::new(),
            blocked: Vec::new(),
            level_act: Vec::new(),
            blocked_init: Vec::new(),
            search,
            log,
        }
    }

    /// Current window level: `U` stands for `Z_level`.
    pub fn level(&self) -> usize {
        self.decided.len().saturating_sub(1)
    }

    pub fn decided_states(&self) -> &[StateVector] {
        &self.decided
    }

    pub fn blocked(&self, level: usize) -> &[StateVector] {
        self.blocked.get(level).map_or(&[], Vec::as_slice)
    }

    fn emit(&mut self, line: std::fmt::Arguments) {
        if let Some(w) = self.log.as_mut() {
            // Logging is diagnostic; a broken sink does not stop the search.
            let _ = writeln!(w, "{line}");
        }
    }

    fn state_lits(&self, block: StateBlock, s: &StateVector) -> Vec<Lit> {
        self.window
            .map
            .state_vars(block)
            .into_iter()
            .zip(s.bits())
            .map(|(v, &b)| Lit::with_value(v, b))
            .collect()
    }

    fn read(&self, model: &[bool], block: StateBlock) -> StateVector {
        StateVector::new(
            self.window
                .map
                .state_vars(block)
                .into_iter()
                .map(|v| model[v.index() as usize - 1])
                .collect(),
        )
    }

    fn read_inputs(&self, model: &[bool]) -> Vec<bool> {
        self.window
            .map
            .input_vars(0)
            .into_iter()
            .map(|v| model[v.index() as usize - 1])
            .collect()
    }

    fn add(&mut self, clause: &[Lit]) {
        self.solver
            .add_clause(clause)
            .expect("window literals are declared");
    }

    /// Refutes `state` as the successor chosen at `level`. The clause stays
    /// active until `level` is popped.
    pub fn block_state(&mut self, level: usize, state: StateVector) {
        assert!(level < self.decided.len(), "level {level} is not decided");
        if self.blocked.len() <= level {
            self.blocked.resize(level + 1, Vec::new());
            self.level_act.resize(level + 1, None);
        }
        let act = match self.level_act[level] {
            Some(a) => a,
            None => {
                let a = self.solver.new_var().pos();
                self.level_act[level] = Some(a);
                a
            }
        };
        let mut clause: Vec<Lit> = self
            .state_lits(StateBlock::V, &state)
            .into_iter()
            .map(|l| !l)
            .collect();
        clause.push(!act);
        self.add(&clause);
        self.search.blocking_clauses += 1;
        self.emit(format_args!("BLOCK {level} {state}"));
        self.blocked[level].push(state);
        self.search.max_blocked = self.search.max_blocked.max(self.blocked[level].len());
    }

    fn block_init(&mut self, state: StateVector) {
        let clause: Vec<Lit> = self
            .state_lits(StateBlock::U, &state)
            .into_iter()
            .map(|l| !l)
            .collect();
        self.add(&clause);
        self.search.blocking_clauses += 1;
        self.emit(format_args!("BLOCK init {state}"));
        self.blocked_init.push(state);
    }

    /// Abandons `Z_level` and clears everything recorded at `level`.
    fn pop(&mut self, level: usize) -> StateVector {
        debug_assert_eq!(level + 1, self.decided.len());
        if let Some(Some(act)) = self.level_act.get_mut(level).map(Option::take) {
            self.add(&[!act]);
        }
        if let Some(b) = self.blocked.get_mut(level) {
            b.clear();
        }
        self.search.pops += 1;
        self.emit(format_args!("POP {level}"));
        self.inputs.truncate(level.saturating_sub(1));
        self.decided.pop().expect("popped level is decided")
    }

    fn push(&mut self, state: StateVector) {
        self.emit(format_args!("SHIFT {} {state}", self.decided.len()));
        self.decided.push(state);
        self.search.max_stack = self.search.max_stack.max(self.decided.len());
    }

    fn call(&mut self, assumptions: &[Lit], learning: bool) -> Outcome {
        let r = self.solver.solve(assumptions);
        if !learning {
            self.solver.forget_learned();
        }
        r
    }

    fn trace(&self) -> Trace {
        Trace {
            states: self.decided.clone(),
            inputs: self.inputs.clone(),
        }
    }
}

pub fn jsat_solve(sys: &TransitionSystem, k: u32, cfg: &JsatConfig) -> BmcResult {
    jsat_search(sys, k, cfg, None).result
}

/// [`jsat_solve`] with search counters; `log` receives one line per
/// `SHIFT i state`, `BLOCK i state`, `POP i` and a final `RESULT verdict`.
pub fn jsat_search(
    sys: &TransitionSystem,
    k: u32,
    cfg: &JsatConfig,
    log: Option<Box<dyn Write>>,
) -> JsatReport {
    let start = Instant::now();
    let mut w = WindowState::new(sys, cfg, log);
    let verdict = if k == 0 {
        zero_steps(&mut w, cfg)
    } else {
        search(&mut w, k as usize, cfg)
    };
    w.emit(format_args!("RESULT {}", verdict.label()));
    if let Some(l) = w.log.as_mut() {
        let _ = l.flush();
    }
    if let Verdict::Reachable(t) = &verdict {
        debug_assert_eq!(t.validate(sys), Ok(()));
    }
    let mut stats = Stats {
        vars: w.window.cnf.num_vars as u64,
        clauses: w.search.window_clauses as u64,
        window_shifts: 0,
        ..Stats::default()
    };
    stats.absorb(&w.solver.stats());
    stats.window_shifts = w.search.max_stack as u64 + w.search.pops;
    JsatReport {
        result: BmcResult {
            verdict,
            stats,
            wall_time: start.elapsed(),
        },
        search: w.search,
    }
}

fn zero_steps(w: &mut WindowState, cfg: &JsatConfig) -> Verdict {
    let act = w.window.act;
    match w.call(&[act.init, act.bad, act.stay, !act.transition], cfg.learning) {
        Outcome::Sat(model) => {
            let s = w.read(&model, StateBlock::U);
            w.push(s);
            Verdict::Reachable(w.trace())
        }
        Outcome::Unsat(_) => Verdict::UnreachableAtBound,
        Outcome::ResourceLimit => Verdict::ResourceLimit,
    }
}

fn search(w: &mut WindowState, k: usize, cfg: &JsatConfig) -> Verdict {
    let act = w.window.act;
    loop {
        if w.decided.is_empty() {
            // Choose Z_0 and Z_1 together; refuted initial states are blocked
            // permanently.
            let mut assumptions = vec![act.init, act.transition, !act.stay];
            if k == 1 {
                assumptions.push(act.bad);
            }
            match w.call(&assumptions, cfg.learning) {
                Outcome::Sat(model) => {
                    let s0 = w.read(&model, StateBlock::U);
                    let s1 = w.read(&model, StateBlock::V);
                    w.inputs.push(w.read_inputs(&model));
                    w.push(s0);
                    w.push(s1);
                    if k == 1 {
                        return Verdict::Reachable(w.trace());
                    }
                }
                Outcome::Unsat(_) => return Verdict::UnreachableAtBound,
                Outcome::ResourceLimit => return Verdict::ResourceLimit,
            }
            continue;
        }

        let level = w.decided.len() - 1;
        let mut assumptions = w.state_lits(StateBlock::U, &w.decided[level]);
        assumptions.push(act.transition);
        assumptions.push(!act.stay);
        assumptions.push(if level == 0 { act.init } else { !act.init });
        assumptions.push(if level == k - 1 { act.bad } else { !act.bad });
        if let Some(Some(a)) = w.level_act.get(level) {
            assumptions.push(*a);
        }
        match w.call(&assumptions, cfg.learning) {
            Outcome::Sat(model) => {
                let s = w.read(&model, StateBlock::V);
                w.inputs.push(w.read_inputs(&model));
                w.push(s);
                if level == k - 1 {
                    return Verdict::Reachable(w.trace());
                }
            }
            Outcome::Unsat(_) => {
                let refuted = w.pop(level);
                if level == 0 {
                    w.block_init(refuted);
                } else {
                    w.block_state(level - 1, refuted);
                }
            }
            Outcome::ResourceLimit => return Verdict::ResourceLimit,
        }
    }
}

/// A cloneable in-memory log sink.
#[derive(Debug, Clone, Default)]
pub struct SharedLog(std::sync::Arc<std::sync::Mutex<Vec<u8>>>);

impl SharedLog {
    pub fn new() -> SharedLog {
        SharedLog::default()
    }

    pub fn contents(&self) -> String {
        String::from_utf8_lossy(&self.0.lock().unwrap()).into_owned()
    }
}

impl Write for SharedLog {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}
