//! Transition systems read from ASCII AIGER.
//!
//! A [`TransitionSystem`] is an and-inverter graph with `n` latches (the state
//! bits), `m` primary inputs, a next-state function per latch, and two
//! predicates over the latches: the initial-state predicate (all latches zero)
//! and the bad-state predicate (the single AIGER output).
//!
//! Inputs are step-local: one transition picks a fresh input vector, so the
//! transition relation of a system is
//! `TR(u, v) = exists x. AND_j (v_j <-> next_j(u, x))`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// A reference to a node of the gate graph, possibly negated.
///
/// Encoded like an AIGER literal: `node << 1 | negated`. Node 0 is the
/// constant false, so `Signal::FALSE` and `Signal::TRUE` need no gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Signal(u32);

impl Signal {
    pub const FALSE: Signal = Signal(0);
    pub const TRUE: Signal = Signal(1);

    pub fn new(node: usize, negated: bool) -> Signal {
        Signal(((node as u32) << 1) | negated as u32)
    }

    #[inline]
    pub fn node(self) -> usize {
        (self.0 >> 1) as usize
    }

    #[inline]
    pub fn is_negated(self) -> bool {
        self.0 & 1 == 1
    }

    #[inline]
    pub fn is_const(self) -> bool {
        self.node() == 0
    }

    pub fn raw(self) -> u32 {
        self.0
    }
}

impl std::ops::Not for Signal {
    type Output = Signal;
    #[inline]
    fn not(self) -> Signal {
        Signal(self.0 ^ 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    False,
    Input(usize),
    Latch(usize),
    And(Signal, Signal),
}

/// Which characteristic function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predicate {
    Init,
    Bad,
}

/// One valuation of the latches, indexed by latch declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateVector(Vec<bool>);

impl StateVector {
    pub fn new(bits: Vec<bool>) -> StateVector {
        StateVector(bits)
    }

    pub fn zeros(n: usize) -> StateVector {
        StateVector(vec![false; n])
    }

    /// Bit `j` of `value` becomes latch `j`.
    pub fn from_index(value: u64, n: usize) -> StateVector {
        StateVector((0..n).map(|j| (value >> j) & 1 == 1).collect())
    }

    pub fn index(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0, |acc, (j, &b)| acc | ((b as u64) << j))
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_bits(f, &self.0)
    }
}

impl FromStr for StateVector {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_bits(s).map(StateVector)
    }
}

pub(crate) fn write_bits(f: &mut impl fmt::Write, bits: &[bool]) -> fmt::Result {
    for &b in bits {
        f.write_char(if b { '1' } else { '0' })?;
    }
    Ok(())
}

pub(crate) fn parse_bits(s: &str) -> Result<Vec<bool>, String> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(format!("unexpected character {other:?} in bit string")),
        })
        .collect()
}

/// A path `states[0] -> ... -> states[k]` together with the input vector
/// chosen at each step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub states: Vec<StateVector>,
    pub inputs: Vec<Vec<bool>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("trace has {states} states but {inputs} input vectors")]
    Shape { states: usize, inputs: usize },
    #[error("step {step}: vector has length {found}, expected {expected}")]
    Width {
        step: usize,
        found: usize,
        expected: usize,
    },
    #[error("first state does not satisfy the initial predicate")]
    NotInitial,
    #[error("last state does not satisfy the bad predicate")]
    NotBad,
    #[error("step {step} does not follow the transition function")]
    BrokenStep { step: usize },
}

impl Trace {
    /// Number of transitions.
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Replays the trace and checks it is a valid witness of bad-state
    /// reachability in exactly `self.len()` steps.
    pub fn validate(&self, sys: &TransitionSystem) -> Result<(), TraceError> {
        if self.states.len() != self.inputs.len() + 1 {
            return Err(TraceError::Shape {
                states: self.states.len(),
                inputs: self.inputs.len(),
            });
        }
        for (step, s) in self.states.iter().enumerate() {
            if s.len() != sys.num_latches() {
                return Err(TraceError::Width {
                    step,
                    found: s.len(),
                    expected: sys.num_latches(),
                });
            }
        }
        for (step, x) in self.inputs.iter().enumerate() {
            if x.len() != sys.num_inputs() {
                return Err(TraceError::Width {
                    step,
                    found: x.len(),
                    expected: sys.num_inputs(),
                });
            }
        }
        if !sys.eval_predicate(Predicate::Init, &self.states[0]) {
            return Err(TraceError::NotInitial);
        }
        for (step, x) in self.inputs.iter().enumerate() {
            if sys.eval_step(&self.states[step], x) != self.states[step + 1] {
                return Err(TraceError::BrokenStep { step });
            }
        }
        if !sys.eval_predicate(Predicate::Bad, self.states.last().unwrap()) {
            return Err(TraceError::NotBad);
        }
        Ok(())
    }
}

/// A validated and-inverter transition system.
///
/// Gates are stored in topological order: every `And` operand refers to a
/// node with a smaller index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionSystem {
    nodes: Vec<Node>,
    inputs: Vec<usize>,
    latches: Vec<usize>,
    latch_next: Vec<Signal>,
    init: Signal,
    bad: Signal,
}

impl TransitionSystem {
    pub fn num_latches(&self) -> usize {
        self.latches.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_gates(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::And(..)))
            .count()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> Node {
        self.nodes[idx]
    }

    pub fn input_signal(&self, i: usize) -> Signal {
        Signal::new(self.inputs[i], false)
    }

    pub fn latch_signal(&self, j: usize) -> Signal {
        Signal::new(self.latches[j], false)
    }

    pub fn latch_next(&self) -> &[Signal] {
        &self.latch_next
    }

    pub fn init(&self) -> Signal {
        self.init
    }

    pub fn bad(&self) -> Signal {
        self.bad
    }

    pub fn predicate(&self, which: Predicate) -> Signal {
        match which {
            Predicate::Init => self.init,
            Predicate::Bad => self.bad,
        }
    }

    /// Marks every node in the transitive fan-in of `roots`.
    pub fn cone(&self, roots: &[Signal]) -> Vec<bool> {
        let mut mark = vec![false; self.nodes.len()];
        for r in roots {
            mark[r.node()] = true;
        }
        for idx in (0..self.nodes.len()).rev() {
            if mark[idx] {
                if let Node::And(a, b) = self.nodes[idx] {
                    mark[a.node()] = true;
                    mark[b.node()] = true;
                }
            }
        }
        mark
    }

    /// Number of AND gates in the cone of the next-state functions.
    pub fn transition_cone_size(&self) -> usize {
        self.cone(&self.latch_next)
            .iter()
            .zip(&self.nodes)
            .filter(|(m, n)| **m && matches!(n, Node::And(..)))
            .count()
    }

    fn eval_nodes(&self, state: &[bool], inputs: &[bool]) -> Vec<bool> {
        let mut val = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match *node {
                Node::False => false,
                Node::Input(i) => inputs[i],
                Node::Latch(j) => state[j],
                Node::And(a, b) => lit_value(&val, a) && lit_value(&val, b),
            };
            val.push(v);
        }
        val
    }

    /// Successor of `state` under `inputs`.
    pub fn eval_step(&self, state: &StateVector, inputs: &[bool]) -> StateVector {
        assert_eq!(state.len(), self.num_latches(), "state width");
        assert_eq!(inputs.len(), self.num_inputs(), "input width");
        let val = self.eval_nodes(state.bits(), inputs);
        StateVector(self.latch_next.iter().map(|&s| lit_value(&val, s)).collect())
    }

    pub fn eval_predicate(&self, which: Predicate, state: &StateVector) -> bool {
        assert_eq!(state.len(), self.num_latches(), "state width");
        let inputs = vec![false; self.num_inputs()];
        let val = self.eval_nodes(state.bits(), &inputs);
        lit_value(&val, self.predicate(which))
    }

    /// Some input vector that moves `from` to `to`, by enumeration.
    pub fn find_step_inputs(&self, from: &StateVector, to: &StateVector) -> Option<Vec<bool>> {
        let m = self.num_inputs();
        assert!(m < 32, "input enumeration limited to 31 inputs");
        (0u64..1 << m)
            .map(|x| (0..m).map(|i| (x >> i) & 1 == 1).collect::<Vec<_>>())
            .find(|x| self.eval_step(from, x) == *to)
    }

    /// Re-opens the system for extension. The initial predicate is kept.
    pub fn to_builder(&self) -> SystemBuilder {
        SystemBuilder {
            nodes: self.nodes.clone(),
            inputs: self.inputs.clone(),
            latches: self.latches.clone(),
            latch_next: self.latch_next.iter().map(|&s| Some(s)).collect(),
            init: Some(self.init),
        }
    }

    /// Checks the structural invariants. Systems produced by the parser or
    /// the builder always pass.
    pub fn validate(&self) -> Result<(), String> {
        if self.latches.is_empty() {
            return Err("no latches".into());
        }
        if self.nodes.first() != Some(&Node::False) {
            return Err("node 0 must be the constant".into());
        }
        let len = self.nodes.len();
        for (idx, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::False if idx != 0 => return Err(format!("extra constant at {idx}")),
                Node::Input(i) if self.inputs.get(i) != Some(&idx) => {
                    return Err(format!("input {i} misplaced"))
                }
                Node::Latch(j) if self.latches.get(j) != Some(&idx) => {
                    return Err(format!("latch {j} misplaced"))
                }
                Node::And(a, b) if a.node() >= idx || b.node() >= idx => {
                    return Err(format!("gate {idx} is not topologically ordered"))
                }
                _ => {}
            }
        }
        let all = self.latch_next.iter().chain([&self.init, &self.bad]);
        if all.clone().any(|s| s.node() >= len) {
            return Err("dangling signal".into());
        }
        for (name, root) in [("init", self.init), ("bad", self.bad)] {
            let cone = self.cone(&[root]);
            if self.inputs.iter().any(|&i| cone[i]) {
                return Err(format!("{name} predicate depends on an input"));
            }
        }
        Ok(())
    }
}

#[inline]
fn lit_value(val: &[bool], s: Signal) -> bool {
    val[s.node()] ^ s.is_negated()
}

/// Incremental construction of a [`TransitionSystem`].
#[derive(Debug, Clone)]
pub struct SystemBuilder {
    nodes: Vec<Node>,
    inputs: Vec<usize>,
    latches: Vec<usize>,
    latch_next: Vec<Option<Signal>>,
    init: Option<Signal>,
}

impl Default for SystemBuilder {
    fn default() -> Self {
        SystemBuilder {
            nodes: vec![Node::False],
            inputs: Vec::new(),
            latches: Vec::new(),
            latch_next: Vec::new(),
            init: None,
        }
    }
}

impl SystemBuilder {
    pub fn new() -> SystemBuilder {
        SystemBuilder::default()
    }

    pub fn input(&mut self) -> Signal {
        let idx = self.nodes.len();
        self.nodes.push(Node::Input(self.inputs.len()));
        self.inputs.push(idx);
        Signal::new(idx, false)
    }

    pub fn latch(&mut self) -> Signal {
        let idx = self.nodes.len();
        self.nodes.push(Node::Latch(self.latches.len()));
        self.latches.push(idx);
        self.latch_next.push(None);
        Signal::new(idx, false)
    }

    pub fn latch_signal(&self, j: usize) -> Signal {
        Signal::new(self.latches[j], false)
    }

    pub fn num_latches(&self) -> usize {
        self.latches.len()
    }

    pub fn next_of(&self, j: usize) -> Option<Signal> {
        self.latch_next[j]
    }

    /// AND gate with constant folding.
    pub fn and(&mut self, a: Signal, b: Signal) -> Signal {
        if a == Signal::FALSE || b == Signal::FALSE || a == !b {
            return Signal::FALSE;
        }
        if a == Signal::TRUE || a == b {
            return b;
        }
        if b == Signal::TRUE {
            return a;
        }
        assert!(a.node() < self.nodes.len() && b.node() < self.nodes.len());
        let idx = self.nodes.len();
        self.nodes.push(Node::And(a, b));
        Signal::new(idx, false)
    }

    pub fn or(&mut self, a: Signal, b: Signal) -> Signal {
        !self.and(!a, !b)
    }

    pub fn xor(&mut self, a: Signal, b: Signal) -> Signal {
        let l = self.and(a, !b);
        let r = self.and(!a, b);
        self.or(l, r)
    }

    /// `if sel { then } else { other }`
    pub fn mux(&mut self, sel: Signal, then: Signal, other: Signal) -> Signal {
        let l = self.and(sel, then);
        let r = self.and(!sel, other);
        self.or(l, r)
    }

    pub fn set_next(&mut self, j: usize, next: Signal) {
        self.latch_next[j] = Some(next);
    }

    /// Finishes the system. Unless one was carried over by
    /// [`TransitionSystem::to_builder`], the initial predicate is synthesized
    /// as the conjunction of all negated latches.
    pub fn build(mut self, bad: Signal) -> Result<TransitionSystem, String> {
        if self.latches.is_empty() {
            return Err("a transition system needs at least one latch".into());
        }
        let latch_next = self
            .latch_next
            .iter()
            .enumerate()
            .map(|(j, s)| s.ok_or_else(|| format!("latch {j} has no next-state function")))
            .collect::<Result<Vec<_>, _>>()?;
        let init = match self.init {
            Some(s) => s,
            None => {
                let latches: Vec<Signal> = (0..self.latches.len())
                    .map(|j| !self.latch_signal(j))
                    .collect();
                latches
                    .into_iter()
                    .reduce(|acc, l| self.and(acc, l))
                    .unwrap()
            }
        };
        let sys = TransitionSystem {
            nodes: self.nodes,
            inputs: self.inputs,
            latches: self.latches,
            latch_next,
            init,
            bad,
        };
        sys.validate()?;
        Ok(sys)
    }
}

/// Errors from [`parse_aiger`]. Line numbers are 1-based.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: malformed header: {reason}")]
    Header { line: usize, reason: String },
    #[error("line {line}: unsupported AIGER feature: {what}")]
    Unsupported { line: usize, what: String },
    #[error("line {line}: expected exactly one output, found {found}")]
    OutputCount { line: usize, found: u64 },
    #[error("line {line}: the model has no latches")]
    NoLatches { line: usize },
    #[error("line {line}: literal {lit} out of range (maximum {max})")]
    LiteralOutOfRange { line: usize, lit: u64, max: u64 },
    #[error("line {line}: malformed line: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: variable {var} defined twice")]
    Redefined { line: usize, var: u64 },
    #[error("line {line}: variable {var} is used but never defined")]
    Undefined { line: usize, var: u64 },
    #[error("line {line}: cyclic gate reference through variable {var}")]
    Cycle { line: usize, var: u64 },
    #[error("line {line}: only zero latch resets are supported")]
    NonZeroReset { line: usize },
    #[error("line {line}: the output depends on a primary input")]
    OutputDependsOnInput { line: usize },
    #[error("line {line}: unexpected end of file, missing {missing}")]
    Truncated { line: usize, missing: &'static str },
}

#[derive(Clone, Copy)]
enum Def {
    Input(usize),
    Latch(usize),
    And { idx: usize, line: usize },
}

/// Parses an ASCII AIGER model with one output, read as the bad predicate.
pub fn parse_aiger(text: &[u8]) -> Result<TransitionSystem, ParseError> {
    let text = std::str::from_utf8(text).map_err(|e| ParseError::Malformed {
        line: 1 + text[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
        reason: "not valid text".into(),
    })?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (hline, header) = lines.next().unwrap_or((1, ""));
    let tokens = split_tokens(hline, header)?;
    match tokens.first().copied() {
        Some("aag") => {}
        Some("aig") => {
            return Err(ParseError::Unsupported {
                line: hline,
                what: "binary AIGER".into(),
            })
        }
        _ => {
            return Err(ParseError::Header {
                line: hline,
                reason: "expected 'aag'".into(),
            })
        }
    }
    if tokens.len() > 6 {
        return Err(ParseError::Unsupported {
            line: hline,
            what: "AIGER 1.9 header sections (B C J F)".into(),
        });
    }
    if tokens.len() < 6 {
        return Err(ParseError::Header {
            line: hline,
            reason: "expected 'aag M I L O A'".into(),
        });
    }
    let mut counts = [0u64; 5];
    for (c, t) in counts.iter_mut().zip(&tokens[1..]) {
        *c = t.parse().map_err(|_| ParseError::Header {
            line: hline,
            reason: format!("invalid count {t:?}"),
        })?;
    }
    let [max_var, ni, nl, no, na] = counts;
    if max_var > u32::MAX as u64 / 4 || ni + nl + na > max_var {
        return Err(ParseError::Header {
            line: hline,
            reason: format!("M = {max_var} is inconsistent with I + L + A"),
        });
    }
    if no != 1 {
        return Err(ParseError::OutputCount {
            line: hline,
            found: no,
        });
    }
    if nl == 0 {
        return Err(ParseError::NoLatches { line: hline });
    }
    let max_lit = 2 * max_var + 1;
    let mut defs: Vec<Option<Def>> = vec![None; max_var as usize + 1];

    let mut next_line = |missing: &'static str| {
        lines.next().ok_or(ParseError::Truncated {
            line: text.split('\n').count(),
            missing,
        })
    };
    let lit_at = |line: usize, tok: &str| -> Result<u64, ParseError> {
        let lit: u64 = tok.parse().map_err(|_| ParseError::Malformed {
            line,
            reason: format!("invalid literal {tok:?}"),
        })?;
        if lit > max_lit {
            return Err(ParseError::LiteralOutOfRange {
                line,
                lit,
                max: max_lit,
            });
        }
        Ok(lit)
    };
    let define = |defs: &mut Vec<Option<Def>>, line: usize, lit: u64, def: Def| {
        if lit < 2 || lit & 1 == 1 {
            return Err(ParseError::Malformed {
                line,
                reason: format!("{lit} cannot be defined (must be even and non-constant)"),
            });
        }
        let var = (lit >> 1) as usize;
        if defs[var].is_some() {
            return Err(ParseError::Redefined {
                line,
                var: var as u64,
            });
        }
        defs[var] = Some(def);
        Ok(())
    };

    for i in 0..ni as usize {
        let (line, l) = next_line("input")?;
        let toks = split_tokens(line, l)?;
        if toks.len() != 1 {
            return Err(ParseError::Malformed {
                line,
                reason: "input line must hold one literal".into(),
            });
        }
        let lit = lit_at(line, toks[0])?;
        define(&mut defs, line, lit, Def::Input(i))?;
    }

    let mut latch_lines = Vec::with_capacity(nl as usize);
    for j in 0..nl as usize {
        let (line, l) = next_line("latch")?;
        let toks = split_tokens(line, l)?;
        if toks.len() != 2 && toks.len() != 3 {
            return Err(ParseError::Malformed {
                line,
                reason: "latch line must be 'lit next [reset]'".into(),
            });
        }
        let lit = lit_at(line, toks[0])?;
        let next = lit_at(line, toks[1])?;
        if toks.len() == 3 && lit_at(line, toks[2])? != 0 {
            return Err(ParseError::NonZeroReset { line });
        }
        define(&mut defs, line, lit, Def::Latch(j))?;
        latch_lines.push((line, next));
    }

    let (oline, l) = next_line("output")?;
    let toks = split_tokens(oline, l)?;
    if toks.len() != 1 {
        return Err(ParseError::Malformed {
            line: oline,
            reason: "output line must hold one literal".into(),
        });
    }
    let output = lit_at(oline, toks[0])?;

    let mut gates = Vec::with_capacity(na as usize);
    for idx in 0..na as usize {
        let (line, l) = next_line("and gate")?;
        let toks = split_tokens(line, l)?;
        if toks.len() != 3 {
            return Err(ParseError::Malformed {
                line,
                reason: "and line must be 'lhs rhs0 rhs1'".into(),
            });
        }
        let lhs = lit_at(line, toks[0])?;
        let r0 = lit_at(line, toks[1])?;
        let r1 = lit_at(line, toks[2])?;
        define(&mut defs, line, lhs, Def::And { idx, line })?;
        gates.push((line, lhs, r0, r1));
    }

    // Symbol table and comment section.
    for (line, l) in lines {
        if l.is_empty() {
            continue;
        }
        if l == "c" || l.starts_with("c ") {
            break;
        }
        let ok = l.split_once(' ').is_some_and(|(head, _)| {
            head.len() > 1
                && matches!(head.as_bytes()[0], b'i' | b'l' | b'o')
                && head[1..].bytes().all(|b| b.is_ascii_digit())
        });
        if !ok {
            return Err(ParseError::Malformed {
                line,
                reason: "unexpected content after the gate section".into(),
            });
        }
    }

    // Every referenced variable must be defined.
    let check_ref = |line: usize, lit: u64| -> Result<(), ParseError> {
        let var = lit >> 1;
        if var != 0 && defs[var as usize].is_none() {
            return Err(ParseError::Undefined { line, var });
        }
        Ok(())
    };
    for &(line, next) in &latch_lines {
        check_ref(line, next)?;
    }
    check_ref(oline, output)?;
    for &(line, _, r0, r1) in &gates {
        check_ref(line, r0)?;
        check_ref(line, r1)?;
    }

    // Topological order of the gates (iterative DFS, gray/black marking).
    let mut b = SystemBuilder::new();
    for _ in 0..ni {
        b.input();
    }
    for _ in 0..nl {
        b.latch();
    }
    let mut node_of: Vec<Option<usize>> = vec![None; max_var as usize + 1];
    node_of[0] = Some(0);
    for (var, def) in defs.iter().enumerate() {
        match def {
            Some(Def::Input(i)) => node_of[var] = Some(b.inputs[*i]),
            Some(Def::Latch(j)) => node_of[var] = Some(b.latches[*j]),
            _ => {}
        }
    }
    let mut on_stack = vec![false; max_var as usize + 1];
    for root in 0..gates.len() {
        let root_var = (gates[root].1 >> 1) as usize;
        if node_of[root_var].is_some() {
            continue;
        }
        let mut stack = vec![(root_var, false)];
        while let Some((var, expanded)) = stack.pop() {
            let Some(Def::And { idx, line }) = defs[var] else {
                continue;
            };
            let (_, _, r0, r1) = gates[idx];
            if expanded {
                on_stack[var] = false;
                let sig = |lit: u64| Signal::new(node_of[(lit >> 1) as usize].unwrap(), lit & 1 == 1);
                let node = b.nodes.len();
                b.nodes.push(Node::And(sig(r0), sig(r1)));
                node_of[var] = Some(node);
                continue;
            }
            if node_of[var].is_some() {
                continue;
            }
            if on_stack[var] {
                return Err(ParseError::Cycle {
                    line,
                    var: var as u64,
                });
            }
            on_stack[var] = true;
            stack.push((var, true));
            for lit in [r1, r0] {
                let v = (lit >> 1) as usize;
                if node_of[v].is_none() {
                    if on_stack[v] {
                        return Err(ParseError::Cycle { line, var: v as u64 });
                    }
                    stack.push((v, false));
                }
            }
        }
    }

    let sig = |lit: u64| Signal::new(node_of[(lit >> 1) as usize].unwrap(), lit & 1 == 1);
    for (j, &(_, next)) in latch_lines.iter().enumerate() {
        b.set_next(j, sig(next));
    }
    let bad = sig(output);
    let probe = b.clone();
    let cone = {
        let mut mark = vec![false; probe.nodes.len()];
        mark[bad.node()] = true;
        for idx in (0..probe.nodes.len()).rev() {
            if mark[idx] {
                if let Node::And(x, y) = probe.nodes[idx] {
                    mark[x.node()] = true;
                    mark[y.node()] = true;
                }
            }
        }
        mark
    };
    if probe.inputs.iter().any(|&i| cone[i]) {
        return Err(ParseError::OutputDependsOnInput { line: oline });
    }
    Ok(b.build(bad).expect("parser output satisfies system invariants"))
}

fn split_tokens(line: usize, l: &str) -> Result<Vec<&str>, ParseError> {
    if l.is_empty() {
        return Ok(Vec::new());
    }
    let toks: Vec<&str> = l.split(' ').collect();
    if toks.iter().any(|t| t.is_empty()) {
        return Err(ParseError::Malformed {
            line,
            reason: "tokens must be separated by single spaces".into(),
        });
    }
    Ok(toks)
}

/// Serializes the system as strict ASCII AIGER: inputs, latches, then the
/// gates in the cone of the next-state functions and the bad predicate,
/// renumbered densely. The synthesized initial predicate is not written.
pub fn write_aiger(sys: &TransitionSystem) -> String {
    let mut roots = sys.latch_next.clone();
    roots.push(sys.bad);
    let cone = sys.cone(&roots);
    let mut var_of = vec![0u64; sys.nodes.len()];
    let mut next_var = 1u64;
    for &i in &sys.inputs {
        var_of[i] = next_var;
        next_var += 1;
    }
    for &l in &sys.latches {
        var_of[l] = next_var;
        next_var += 1;
    }
    let mut gates = Vec::new();
    for (idx, node) in sys.nodes.iter().enumerate() {
        if let Node::And(a, b) = node {
            if cone[idx] {
                var_of[idx] = next_var;
                next_var += 1;
                gates.push((idx, *a, *b));
            }
        }
    }
    let lit = |s: Signal| 2 * var_of[s.node()] + s.is_negated() as u64;
    let mut out = format!(
        "aag {} {} {} 1 {}\n",
        next_var - 1,
        sys.inputs.len(),
        sys.latches.len(),
        gates.len()
    );
    for &i in &sys.inputs {
        out.push_str(&format!("{}\n", 2 * var_of[i]));
    }
    for (j, &l) in sys.latches.iter().enumerate() {
        out.push_str(&format!("{} {}\n", 2 * var_of[l], lit(sys.latch_next[j])));
    }
    out.push_str(&format!("{}\n", lit(sys.bad)));
    for (idx, a, b) in gates {
        out.push_str(&format!("{} {} {}\n", 2 * var_of[idx], lit(a), lit(b)));
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub const COUNTER: &str = "aag 6 0 2 1 4\n2 3\n4 11\n12\n6 2 5\n8 3 4\n10 7 9\n12 2 4\n";
    pub const SELF_LOOP: &str = "aag 1 0 1 1 0\n2 2\n2\n";

    pub fn counter() -> TransitionSystem {
        parse_aiger(COUNTER.as_bytes()).unwrap()
    }

    fn st(v: u64, n: usize) -> StateVector {
        StateVector::from_index(v, n)
    }

    #[test]
    fn counter_steps() {
        let sys = counter();
        assert_eq!(sys.num_latches(), 2);
        assert_eq!(sys.num_inputs(), 0);
        let succ: Vec<u64> = (0..4).map(|v| sys.eval_step(&st(v, 2), &[]).index()).collect();
        assert_eq!(succ, vec![1, 2, 3, 0]);
    }

    #[test]
    fn counter_predicates() {
        let sys = counter();
        assert!(sys.eval_predicate(Predicate::Bad, &st(3, 2)));
        assert!(!sys.eval_predicate(Predicate::Bad, &st(1, 2)));
        assert!(sys.eval_predicate(Predicate::Init, &st(0, 2)));
        assert!(!sys.eval_predicate(Predicate::Init, &st(1, 2)));
        assert!(!sys.eval_predicate(Predicate::Init, &st(2, 2)));
    }

    #[test]
    fn self_loop_system() {
        let sys = parse_aiger(SELF_LOOP.as_bytes()).unwrap();
        assert_eq!(sys.eval_step(&st(1, 1), &[]), st(1, 1));
        assert_eq!(sys.eval_step(&st(0, 1), &[]), st(0, 1));
        assert!(sys.eval_predicate(Predicate::Bad, &st(1, 1)));
        assert!(sys.eval_predicate(Predicate::Init, &st(0, 1)));
    }

    #[test]
    fn rejects_two_outputs() {
        let err = parse_aiger(b"aag 1 0 1 2 0\n2 2\n2\n3\n").unwrap_err();
        assert_eq!(err, ParseError::OutputCount { line: 1, found: 2 });
    }

    #[test]
    fn rejects_no_latches() {
        let err = parse_aiger(b"aag 1 1 0 1 0\n2\n2\n").unwrap_err();
        assert_eq!(err, ParseError::NoLatches { line: 1 });
    }

    #[test]
    fn rejects_out_of_range_literal() {
        let err = parse_aiger(b"aag 1 0 1 1 0\n2 4\n2\n").unwrap_err();
        assert_eq!(
            err,
            ParseError::LiteralOutOfRange {
                line: 2,
                lit: 4,
                max: 3
            }
        );
    }

    #[test]
    fn rejects_cycles() {
        let err = parse_aiger(b"aag 3 0 1 1 2\n2 4\n4\n4 2 6\n6 4 2\n").unwrap_err();
        assert!(matches!(err, ParseError::Cycle { .. }), "{err:?}");
        let err = parse_aiger(b"aag 2 0 1 1 1\n2 4\n2\n4 4 2\n").unwrap_err();
        assert!(matches!(err, ParseError::Cycle { line: 4, .. }), "{err:?}");
    }

    #[test]
    fn rejects_header_problems() {
        assert!(matches!(
            parse_aiger(b"aig 1 0 1 1 0\n").unwrap_err(),
            ParseError::Unsupported { .. }
        ));
        assert!(matches!(
            parse_aiger(b"aag 1 0 1 1 0 1\n2 2\n2\n").unwrap_err(),
            ParseError::Unsupported { .. }
        ));
        assert!(matches!(
            parse_aiger(b"aag 1 0 1\n").unwrap_err(),
            ParseError::Header { .. }
        ));
        assert!(matches!(
            parse_aiger(b"").unwrap_err(),
            ParseError::Header { .. }
        ));
        assert!(matches!(
            parse_aiger(b"aag  1 0 1 1 0\n").unwrap_err(),
            ParseError::Malformed { line: 1, .. }
        ));
    }

    #[test]
    fn rejects_resets_and_undefined() {
        assert_eq!(
            parse_aiger(b"aag 1 0 1 1 0\n2 2 1\n2\n").unwrap_err(),
            ParseError::NonZeroReset { line: 2 }
        );
        assert!(parse_aiger(b"aag 1 0 1 1 0\n2 2 0\n2\n").is_ok());
        assert_eq!(
            parse_aiger(b"aag 2 0 1 1 0\n2 4\n2\n").unwrap_err(),
            ParseError::Undefined { line: 2, var: 2 }
        );
        assert_eq!(
            parse_aiger(b"aag 2 1 1 1 0\n2\n4 2\n2\n").unwrap_err(),
            ParseError::OutputDependsOnInput { line: 4 }
        );
        assert!(matches!(
            parse_aiger(b"aag 2 0 2 1 0\n2 2\n").unwrap_err(),
            ParseError::Truncated { .. }
        ));
    }

    #[test]
    fn accepts_symbols_and_comments() {
        let text = format!("{COUNTER}l0 lo\nl1 hi\no0 bad\nc\nanything goes\n");
        assert_eq!(parse_aiger(text.as_bytes()).unwrap(), counter());
        let bad = format!("{COUNTER}garbage\n");
        assert!(matches!(
            parse_aiger(bad.as_bytes()).unwrap_err(),
            ParseError::Malformed { line: 9, .. }
        ));
    }

    #[test]
    fn gates_may_be_listed_out_of_order() {
        // Same counter, gates permuted.
        let text = "aag 6 0 2 1 4\n2 3\n4 11\n12\n12 2 4\n10 7 9\n8 3 4\n6 2 5\n";
        let sys = parse_aiger(text.as_bytes()).unwrap();
        for v in 0..4 {
            assert_eq!(
                sys.eval_step(&st(v, 2), &[]),
                counter().eval_step(&st(v, 2), &[])
            );
        }
    }

    #[test]
    fn write_then_parse_preserves_behaviour() {
        let sys = counter();
        let again = parse_aiger(write_aiger(&sys).as_bytes()).unwrap();
        assert_eq!(write_aiger(&again), write_aiger(&sys));
        for v in 0..4 {
            assert_eq!(again.eval_step(&st(v, 2), &[]), sys.eval_step(&st(v, 2), &[]));
        }
    }

    #[test]
    fn trace_validation() {
        let sys = counter();
        let good = Trace {
            states: (0..4).map(|v| st(v, 2)).collect(),
            inputs: vec![vec![]; 3],
        };
        assert_eq!(good.validate(&sys), Ok(()));
        let mut broken = good.clone();
        broken.states[2] = st(3, 2);
        assert_eq!(broken.validate(&sys), Err(TraceError::BrokenStep { step: 1 }));
        let short = Trace {
            states: (0..3).map(|v| st(v, 2)).collect(),
            inputs: vec![vec![]; 2],
        };
        assert_eq!(short.validate(&sys), Err(TraceError::NotBad));
    }

    #[test]
    fn cone_of_bad_is_one_gate() {
        let sys = counter();
        let cone = sys.cone(&[sys.bad()]);
        let gates = cone
            .iter()
            .zip(sys.nodes())
            .filter(|(m, n)| **m && matches!(n, Node::And(..)))
            .count();
        assert_eq!(gates, 1);
        assert_eq!(sys.transition_cone_size(), 3);
    }
}
