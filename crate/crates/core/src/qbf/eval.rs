//! Exact QBF evaluation for desk-scale formulas.
//!
//! Recursive counterexample-guided expansion. For `∃X ∀Y Φ` the solver
//! keeps an abstraction `∃X. ⋀_μ Φ[Y := μ]` over the universal moves `μ`
//! seen so far (inner bound variables renamed per copy), proposes `X` from
//! it, and asks the dual problem `∃Y. ¬Φ[X := τ]` for a counter-move. No
//! counter-move means `X` wins; an unsatisfiable abstraction means no `X`
//! does. Both sub-problems have one quantifier alternation less, which
//! bounds the recursion. Formulas live in a hash-consed AND-inverter graph
//! so negation and substitution are cheap and constants fold away.

use std::collections::{HashMap, HashSet};

use crate::limits::{Budget, Limits};
use crate::logic::{Lit, Qbf, Quantifier, Var};
use crate::satcore::{Outcome, Solver, SolverStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalConfig {
    /// Formulas with more universal variables are refused as
    /// `ResourceLimit`.
    pub max_universals: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { max_universals: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QbfOutcome {
    /// True. Holds the values chosen for the outermost existential block,
    /// indexed by `var - 1`; all other entries are `false`.
    True(Vec<bool>),
    False,
    ResourceLimit,
}

impl QbfOutcome {
    pub fn decided(&self) -> Option<bool> {
        match self {
            QbfOutcome::True(_) => Some(true),
            QbfOutcome::False => Some(false),
            QbfOutcome::ResourceLimit => None,
        }
    }
}

/// Decides a QBF. Free matrix variables are treated as outermost
/// existentials.
pub fn naive_qbf_eval(qbf: &Qbf, cfg: &EvalConfig, limits: &Limits) -> QbfOutcome {
    naive_qbf_eval_with_stats(qbf, cfg, limits).0
}

/// [`naive_qbf_eval`] plus the summed statistics of all SAT calls.
pub fn naive_qbf_eval_with_stats(
    qbf: &Qbf,
    cfg: &EvalConfig,
    limits: &Limits,
) -> (QbfOutcome, SolverStats) {
    let qbf = qbf.closed();
    if qbf.num_universals() > cfg.max_universals {
        return (QbfOutcome::ResourceLimit, SolverStats::default());
    }
    let defs = extract_gates(&qbf);
    let mut aig = Aig::new(qbf.matrix.num_vars);
    let mut memo = HashMap::new();
    let clauses: Vec<Edge> = qbf
        .matrix
        .clauses
        .iter()
        .enumerate()
        .filter(|(i, _)| !defs.consumed[*i])
        .map(|(_, c)| {
            let lits: Vec<Edge> = c
                .iter()
                .map(|&l| lit_edge(&mut aig, &defs.gates, &mut memo, l))
                .collect();
            aig.or_all(&lits)
        })
        .collect();
    let matrix = aig.and_all(&clauses);

    let mut blocks: Vec<Block> = qbf
        .prefix
        .iter()
        .map(|b| Block {
            exists: b.quantifier == Quantifier::Exists,
            vars: b
                .vars
                .iter()
                .filter(|v| defs.gates[v.index() as usize].is_none())
                .map(|v| v.index())
                .collect(),
        })
        .collect();
    if blocks.first().is_none_or(|b| !b.exists) {
        blocks.insert(0, Block { exists: true, vars: Vec::new() });
    }
    let mut cx = Ctx {
        aig,
        budget: limits.start(),
        stats: SolverStats::default(),
    };
    let mut blocks = normalize(&blocks);
    let mut matrix = matrix;
    if let [.., last] = blocks.as_slice() {
        if blocks.len() > 1 && last.exists && last.vars.len() <= EXPAND_LIMIT {
            let vars: HashSet<u32> = last.vars.iter().copied().collect();
            matrix = expand_exists(&mut cx.aig, matrix, &vars);
            blocks.pop();
        }
    }
    let mut game = Game::new(&mut cx, &blocks, matrix);
    let result = game.solve(&mut cx);
    game.absorb_into(&mut cx.stats);
    let outcome = match result {
        Err(Limit) => QbfOutcome::ResourceLimit,
        Ok(None) => QbfOutcome::False,
        Ok(Some(tau)) => {
            let mut values = vec![false; qbf.matrix.num_vars as usize];
            for (v, b) in tau {
                if let Some(slot) = values.get_mut(v as usize - 1) {
                    *slot = b;
                }
            }
            QbfOutcome::True(values)
        }
    };
    (outcome, cx.stats)
}

/// Innermost existential blocks up to this size are expanded away.
const EXPAND_LIMIT: usize = 4;

/// `exists vars. e`, pushing the quantifier through conjunctions into the
/// parts that mention `vars` and expanding it there.
fn expand_exists(aig: &mut Aig, e: Edge, vars: &HashSet<u32>) -> Edge {
    let support = aig.support(e);
    let mine: Vec<u32> = {
        let mut v: Vec<u32> = support.intersection(vars).copied().collect();
        v.sort_unstable();
        v
    };
    if mine.is_empty() {
        return e;
    }
    if e & 1 == 0 {
        if let Node::And(a, b) = aig.nodes[(e >> 1) as usize] {
            let in_a = aig.support(a).iter().any(|v| vars.contains(v));
            let in_b = aig.support(b).iter().any(|v| vars.contains(v));
            if !(in_a && in_b) {
                let a = expand_exists(aig, a, vars);
                let b = expand_exists(aig, b, vars);
                return aig.and(a, b);
            }
        }
    }
    let copies: Vec<Edge> = (0..1u32 << mine.len())
        .map(|bits| {
            let fix: HashMap<u32, Edge> = mine
                .iter()
                .enumerate()
                .map(|(i, &v)| (v, (bits >> i & 1) as Edge))
                .collect();
            aig.subst(e, &fix)
        })
        .collect();
    aig.or_all(&copies)
}

/// A recovered definition `var <-> f(inputs)`.
#[derive(Debug, Clone)]
enum Gate {
    /// `var` (or its negation when `negated`) is the conjunction of `inputs`.
    And { negated: bool, inputs: Vec<Lit> },
    /// `var = table[2x + y]`.
    Binary { x: Var, y: Var, table: [bool; 4] },
}

impl Gate {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Gate::And { inputs, .. } => inputs.iter().map(|l| l.var()).collect(),
            Gate::Binary { x, y, .. } => vec![*x, *y],
        }
    }
}

struct Definitions {
    /// Indexed by variable.
    gates: Vec<Option<Gate>>,
    /// Clauses replaced by a definition.
    consumed: Vec<bool>,
}

/// Recovers Tseitin definitions of innermost existential variables: AND
/// gates (`o -> a_i` for each input plus `o | !a_1 | ... | !a_n`) and
/// two-input functions given by four ternary clauses. Definitions are
/// accepted only while they stay acyclic, so each defined variable is a
/// function of the rest and can be substituted away.
fn extract_gates(qbf: &Qbf) -> Definitions {
    let clauses = &qbf.matrix.clauses;
    let num_vars = qbf.matrix.num_vars as usize;
    let mut gates: Vec<Option<Gate>> = vec![None; num_vars + 1];
    let mut consumed = vec![false; clauses.len()];
    // The outermost block's values are reported, so it is never substituted away.
    let Some(last) = qbf
        .prefix
        .last()
        .filter(|b| b.quantifier == Quantifier::Exists && qbf.prefix.len() > 1)
    else {
        return Definitions { gates, consumed };
    };

    let mut occurs: Vec<Vec<usize>> = vec![Vec::new(); num_vars + 1];
    let mut binary: HashMap<(Lit, Lit), usize> = HashMap::new();
    for (i, c) in clauses.iter().enumerate() {
        for l in c {
            occurs[l.var().index() as usize].push(i);
        }
        if let [a, b] = c[..] {
            binary.insert((a.min(b), a.max(b)), i);
        }
    }
    let depends_on = |gates: &Vec<Option<Gate>>, from: &[Var], target: Var| {
        let mut stack: Vec<Var> = from.to_vec();
        let mut seen = HashSet::new();
        while let Some(v) = stack.pop() {
            if v == target {
                return true;
            }
            if seen.insert(v) {
                if let Some(g) = &gates[v.index() as usize] {
                    stack.extend(g.inputs());
                }
            }
        }
        false
    };

    for &g in &last.vars {
        let gi = g.index() as usize;
        let mut found: Option<(Gate, Vec<usize>)> = None;
        'and: for negated in [false, true] {
            let o = Lit::new(g, negated);
            'clause: for &ci in &occurs[gi] {
                let c = &clauses[ci];
                if c.len() < 2 || !c.contains(&o) {
                    continue;
                }
                let mut used = vec![ci];
                let mut inputs = Vec::with_capacity(c.len() - 1);
                for &l in c.iter().filter(|&&l| l != o) {
                    let key = ((!o).min(!l), (!o).max(!l));
                    match binary.get(&key) {
                        Some(&bi) if l.var() != g => {
                            used.push(bi);
                            inputs.push(!l);
                        }
                        _ => continue 'clause,
                    }
                }
                found = Some((Gate::And { negated, inputs }, used));
                break 'and;
            }
        }
        if found.is_none() {
            found = binary_gate(clauses, &occurs[gi], g);
        }
        let Some((gate, used)) = found else { continue };
        if depends_on(&gates, &gate.inputs(), g) {
            continue;
        }
        for u in used {
            consumed[u] = true;
        }
        gates[gi] = Some(gate);
    }
    Definitions { gates, consumed }
}

/// Four ternary clauses over `{g, x, y}` that exclude exactly one value of
/// `g` for each `(x, y)`.
fn binary_gate(clauses: &[Vec<Lit>], occ: &[usize], g: Var) -> Option<(Gate, Vec<usize>)> {
    let mut groups: HashMap<(Var, Var), Vec<usize>> = HashMap::new();
    for &ci in occ {
        let c = &clauses[ci];
        if c.len() != 3 {
            continue;
        }
        let mut others: Vec<Var> = c.iter().map(|l| l.var()).filter(|&v| v != g).collect();
        others.sort();
        if others.len() == 2 && others[0] != others[1] {
            groups.entry((others[0], others[1])).or_default().push(ci);
        }
    }
    for ((x, y), cis) in groups {
        let mut excluded: [Option<bool>; 4] = [None; 4];
        let mut used = Vec::new();
        let mut ok = true;
        for &ci in &cis {
            let value = |v: Var| clauses[ci].iter().find(|l| l.var() == v).unwrap().is_negated();
            let slot = 2 * value(x) as usize + value(y) as usize;
            let t = value(g);
            match excluded[slot] {
                None => {
                    excluded[slot] = Some(t);
                    used.push(ci);
                }
                Some(prev) if prev == t => {}
                Some(_) => ok = false,
            }
        }
        if ok && excluded.iter().all(Option::is_some) {
            let table = excluded.map(|e| !e.unwrap());
            return Some((Gate::Binary { x, y, table }, used));
        }
    }
    None
}

fn lit_edge(aig: &mut Aig, gates: &[Option<Gate>], memo: &mut HashMap<u32, Edge>, l: Lit) -> Edge {
    var_edge(aig, gates, memo, l.var()) ^ l.is_negated() as u32
}

fn var_edge(aig: &mut Aig, gates: &[Option<Gate>], memo: &mut HashMap<u32, Edge>, v: Var) -> Edge {
    if let Some(&e) = memo.get(&v.index()) {
        return e;
    }
    let e = match &gates[v.index() as usize] {
        None => aig.var(v.index()),
        Some(Gate::And { negated, inputs }) => {
            let ins: Vec<Edge> = inputs.iter().map(|&l| lit_edge(aig, gates, memo, l)).collect();
            aig.and_all(&ins) ^ *negated as u32
        }
        Some(Gate::Binary { x, y, table }) => {
            let ex = var_edge(aig, gates, memo, *x);
            let ey = var_edge(aig, gates, memo, *y);
            let mut terms = Vec::new();
            for (slot, &on) in table.iter().enumerate() {
                if on {
                    let a = ex ^ (slot < 2) as u32;
                    let b = ey ^ (slot % 2 == 0) as u32;
                    terms.push(aig.and(a, b));
                }
            }
            aig.or_all(&terms)
        }
    };
    memo.insert(v.index(), e);
    e
}

/// AIG edge: node index shifted left once, low bit = negation.
type Edge = u32;
const FALSE: Edge = 0;
const TRUE: Edge = 1;

#[derive(Debug, Clone, Copy)]
enum Node {
    False,
    Var(u32),
    And(Edge, Edge),
}

struct Aig {
    nodes: Vec<Node>,
    strash: HashMap<(Edge, Edge), u32>,
    var_nodes: HashMap<u32, u32>,
    next_var: u32,
}

impl Aig {
    fn new(num_vars: u32) -> Aig {
        Aig {
            nodes: vec![Node::False],
            strash: HashMap::new(),
            var_nodes: HashMap::new(),
            next_var: num_vars + 1,
        }
    }

    fn var(&mut self, v: u32) -> Edge {
        let nodes = &mut self.nodes;
        let idx = *self.var_nodes.entry(v).or_insert_with(|| {
            nodes.push(Node::Var(v));
            nodes.len() as u32 - 1
        });
        idx << 1
    }

    fn fresh(&mut self) -> u32 {
        self.next_var += 1;
        self.next_var - 1
    }

    fn and(&mut self, a: Edge, b: Edge) -> Edge {
        if a == FALSE || b == FALSE || a == b ^ 1 {
            return FALSE;
        }
        if a == TRUE || a == b {
            return b;
        }
        if b == TRUE {
            return a;
        }
        let key = (a.min(b), a.max(b));
        if let Some(&n) = self.strash.get(&key) {
            return n << 1;
        }
        self.nodes.push(Node::And(key.0, key.1));
        let n = self.nodes.len() as u32 - 1;
        self.strash.insert(key, n);
        n << 1
    }

    /// Balanced, so that recursion depth stays logarithmic.
    fn and_all(&mut self, items: &[Edge]) -> Edge {
        match items.len() {
            0 => TRUE,
            1 => items[0],
            n => {
                let l = self.and_all(&items[..n / 2]);
                let r = self.and_all(&items[n / 2..]);
                self.and(l, r)
            }
        }
    }

    fn or_all(&mut self, items: &[Edge]) -> Edge {
        let neg: Vec<Edge> = items.iter().map(|&e| e ^ 1).collect();
        self.and_all(&neg) ^ 1
    }

    /// Replaces variables by edges, folding constants.
    fn subst(&mut self, root: Edge, map: &HashMap<u32, Edge>) -> Edge {
        let mut memo = HashMap::new();
        self.subst_rec(root, map, &mut memo)
    }

    fn subst_rec(&mut self, e: Edge, map: &HashMap<u32, Edge>, memo: &mut HashMap<u32, Edge>) -> Edge {
        let node = e >> 1;
        let neg = e & 1;
        if let Some(&r) = memo.get(&node) {
            return r ^ neg;
        }
        let r = match self.nodes[node as usize] {
            Node::False => FALSE,
            Node::Var(v) => map.get(&v).copied().unwrap_or(node << 1),
            Node::And(a, b) => {
                let ra = self.subst_rec(a, map, memo);
                if ra == FALSE {
                    FALSE
                } else {
                    let rb = self.subst_rec(b, map, memo);
                    self.and(ra, rb)
                }
            }
        };
        memo.insert(node, r);
        r ^ neg
    }

    /// Variables in the cone of `root`.
    fn support(&self, root: Edge) -> HashSet<u32> {
        let mut seen = HashSet::new();
        let mut vars = HashSet::new();
        let mut stack = vec![root >> 1];
        while let Some(n) = stack.pop() {
            if !seen.insert(n) {
                continue;
            }
            match self.nodes[n as usize] {
                Node::False => {}
                Node::Var(v) => {
                    vars.insert(v);
                }
                Node::And(a, b) => {
                    stack.push(a >> 1);
                    stack.push(b >> 1);
                }
            }
        }
        vars
    }
}

#[derive(Debug, Clone)]
struct Block {
    exists: bool,
    vars: Vec<u32>,
}

/// Drops empty inner blocks and merges equal neighbours; the first block
/// is kept even when empty.
fn normalize(blocks: &[Block]) -> Vec<Block> {
    let mut out: Vec<Block> = Vec::with_capacity(blocks.len());
    for (i, b) in blocks.iter().enumerate() {
        if i > 0 && b.vars.is_empty() {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.exists == b.exists => last.vars.extend_from_slice(&b.vars),
            _ => out.push(b.clone()),
        }
    }
    out
}

struct Limit;

/// Incremental SAT over AIG cones: each node is encoded once.
struct IncrementalSat {
    solver: Solver,
    encoded: HashMap<u32, Var>,
}

impl IncrementalSat {
    fn new(budget: Budget) -> IncrementalSat {
        let mut solver = Solver::new();
        solver.set_budget(budget);
        IncrementalSat {
            solver,
            encoded: HashMap::new(),
        }
    }

    fn node_var(&mut self, n: u32) -> Var {
        if let Some(&v) = self.encoded.get(&n) {
            return v;
        }
        let v = self.solver.new_var();
        self.encoded.insert(n, v);
        v
    }

    fn edge_lit(&mut self, e: Edge) -> Lit {
        Lit::new(self.node_var(e >> 1), e & 1 == 1)
    }

    /// Encodes the cone of `root` (new nodes only) and asserts it.
    fn assert(&mut self, aig: &Aig, root: Edge) {
        if root == TRUE {
            return;
        }
        if root == FALSE {
            self.add(&[]);
            return;
        }
        let mut stack = vec![(root >> 1, false)];
        while let Some((n, expanded)) = stack.pop() {
            if self.encoded.contains_key(&n) {
                continue;
            }
            match aig.nodes[n as usize] {
                Node::False => {
                    let v = self.node_var(n);
                    self.add(&[v.neg()]);
                }
                Node::Var(_) => {
                    self.node_var(n);
                }
                Node::And(a, b) if !expanded => {
                    stack.push((n, true));
                    stack.push((a >> 1, false));
                    stack.push((b >> 1, false));
                }
                Node::And(a, b) => {
                    let g = self.node_var(n).pos();
                    let la = self.edge_lit(a);
                    let lb = self.edge_lit(b);
                    self.add(&[!g, la]);
                    self.add(&[!g, lb]);
                    self.add(&[g, !la, !lb]);
                }
            }
        }
        let r = self.edge_lit(root);
        self.add(&[r]);
    }

    fn add(&mut self, clause: &[Lit]) {
        self.solver
            .add_clause(clause)
            .expect("encoded literals are declared");
    }

    /// Values of `vars` in a model, or `None` when unsatisfiable.
    fn solve(&mut self, aig: &Aig, vars: &[u32]) -> Result<Option<Vec<bool>>, Limit> {
        match self.solver.solve(&[]) {
            Outcome::Sat(model) => Ok(Some(
                vars.iter()
                    .map(|v| {
                        aig.var_nodes
                            .get(v)
                            .and_then(|n| self.encoded.get(n))
                            .is_some_and(|x| model[x.index() as usize - 1])
                    })
                    .collect(),
            )),
            Outcome::Unsat(_) => Ok(None),
            Outcome::ResourceLimit => Err(Limit),
        }
    }

    fn absorb_into(&self, stats: &mut SolverStats) {
        let s = self.solver.stats();
        stats.solves += s.solves;
        stats.decisions += s.decisions;
        stats.propagations += s.propagations;
        stats.conflicts += s.conflicts;
        stats.restarts += s.restarts;
        stats.learned += s.learned;
        stats.original_clauses += s.original_clauses;
        stats.peak_bytes = stats.peak_bytes.max(s.peak_bytes);
    }
}

struct Ctx {
    aig: Aig,
    budget: Budget,
    stats: SolverStats,
}

/// A persistent counterexample-guided game for `exists X forall Y rest. matrix`.
/// Conjuncts may be added later; the abstraction keeps everything it learned.
enum Game {
    Leaf {
        x: Vec<u32>,
        sat: Box<IncrementalSat>,
    },
    Nested {
        x: Vec<u32>,
        y: Vec<u32>,
        rest: Vec<Block>,
        matrix: Edge,
        abs: Box<Game>,
        moves: Vec<HashMap<u32, Edge>>,
    },
}

impl Game {
    /// `blocks` must alternate and start existential; inner blocks may be empty.
    fn new(cx: &mut Ctx, blocks: &[Block], matrix: Edge) -> Game {
        debug_assert!(blocks[0].exists);
        let x = blocks[0].vars.clone();
        if blocks.len() == 1 {
            let mut sat = IncrementalSat::new(cx.budget);
            sat.assert(&cx.aig, matrix);
            return Game::Leaf { x, sat: Box::new(sat) };
        }
        let rest = blocks[2..].to_vec();
        let mut abs_blocks = vec![Block {
            exists: true,
            vars: x.clone(),
        }];
        abs_blocks.extend(rest.iter().skip(1).map(|b| Block {
            exists: b.exists,
            vars: Vec::new(),
        }));
        let abs = Game::new(cx, &abs_blocks, TRUE);
        Game::Nested {
            x,
            y: blocks[1].vars.clone(),
            rest,
            matrix,
            abs: Box::new(abs),
            moves: Vec::new(),
        }
    }

    fn width(&self) -> usize {
        match self {
            Game::Leaf { .. } => 1,
            Game::Nested { rest, .. } => rest.len() + 2,
        }
    }

    /// Conjoins `conj`, whose new variables are `fresh` (aligned with the blocks).
    fn add(&mut self, cx: &mut Ctx, fresh: &[Vec<u32>], conj: Edge) -> Result<(), Limit> {
        match self {
            Game::Leaf { x, sat } => {
                x.extend_from_slice(&fresh[0]);
                sat.assert(&cx.aig, conj);
                Ok(())
            }
            Game::Nested {
                x,
                y,
                rest,
                matrix,
                abs,
                moves,
            } => {
                x.extend_from_slice(&fresh[0]);
                y.extend_from_slice(&fresh[1]);
                for (b, f) in rest.iter_mut().zip(&fresh[2..]) {
                    b.vars.extend_from_slice(f);
                }
                *matrix = cx.aig.and(*matrix, conj);
                let mut abs_fresh = vec![Vec::new(); abs.width()];
                abs_fresh[0] = fresh[0].clone();
                let quants: Vec<bool> = rest.iter().map(|b| b.exists).collect();
                let mut copies = TRUE;
                for map in moves.iter_mut() {
                    for &v in &fresh[1] {
                        map.insert(v, FALSE);
                    }
                    let renamed = rename(cx, map, &fresh[2..]);
                    let copy = cx.aig.subst(conj, map);
                    let copy = miniscope(cx, copy, &renamed, &quants)?;
                    keep_support(cx, copy, renamed, &mut abs_fresh);
                    copies = cx.aig.and(copies, copy);
                }
                abs.add(cx, &abs_fresh, copies)
            }
        }
    }

    /// A winning assignment of the first block, if any.
    fn solve(&mut self, cx: &mut Ctx) -> Result<Option<HashMap<u32, bool>>, Limit> {
        if cx.budget.timed_out() {
            return Err(Limit);
        }
        match self {
            Game::Leaf { x, sat } => {
                let r = sat.solve(&cx.aig, x)?;
                Ok(r.map(|vals| x.iter().copied().zip(vals).collect()))
            }
            Game::Nested {
                x,
                y,
                rest,
                matrix,
                abs,
                moves,
            } => loop {
                if cx.budget.timed_out() {
                    return Err(Limit);
                }
                let Some(candidate) = abs.solve(cx)? else {
                    return Ok(None);
                };
                let tau: HashMap<u32, bool> =
                    x.iter().map(|&v| (v, candidate[&v])).collect();
                let fix_x: HashMap<u32, Edge> =
                    tau.iter().map(|(&v, &b)| (v, b as Edge)).collect();
                let reduced = cx.aig.subst(*matrix, &fix_x);
                if reduced == TRUE {
                    return Ok(Some(tau));
                }
                let mu = if reduced == FALSE {
                    HashMap::new()
                } else {
                    let mut dual = vec![Block {
                        exists: true,
                        vars: y.clone(),
                    }];
                    dual.extend(rest.iter().map(|b| Block {
                        exists: !b.exists,
                        vars: b.vars.clone(),
                    }));
                    let dual = normalize(&dual);
                    let mut game = Game::new(cx, &dual, reduced ^ 1);
                    let r = game.solve(cx);
                    game.absorb_into(&mut cx.stats);
                    match r? {
                        None => return Ok(Some(tau)),
                        Some(m) => m,
                    }
                };

                // Refine with a copy of the inner formula under the counter-move.
                let mut map: HashMap<u32, Edge> = y
                    .iter()
                    .map(|v| (*v, mu.get(v).copied().unwrap_or(false) as Edge))
                    .collect();
                let groups: Vec<Vec<u32>> = rest.iter().map(|b| b.vars.clone()).collect();
                let renamed = rename(cx, &mut map, &groups);
                let copy = cx.aig.subst(*matrix, &map);
                let quants: Vec<bool> = rest.iter().map(|b| b.exists).collect();
                let copy = miniscope(cx, copy, &renamed, &quants)?;
                let mut abs_fresh = vec![Vec::new(); abs.width()];
                keep_support(cx, copy, renamed, &mut abs_fresh);
                abs.add(cx, &abs_fresh, copy)?;
                moves.push(map);
            },
        }
    }

    fn absorb_into(&self, stats: &mut SolverStats) {
        match self {
            Game::Leaf { sat, .. } => sat.absorb_into(stats),
            Game::Nested { abs, .. } => abs.absorb_into(stats),
        }
    }
}

/// Decides the parts of `e` that mention only renamed variables and share
/// none of them with the remainder, replacing each by its value.
/// `renamed[i]` are the variables quantified by `quants[i]` (inner to all others).
fn miniscope(
    cx: &mut Ctx,
    e: Edge,
    renamed: &[Vec<u32>],
    quants: &[bool],
) -> Result<Edge, Limit> {
    let level: HashMap<u32, usize> = renamed
        .iter()
        .enumerate()
        .flat_map(|(i, g)| g.iter().map(move |&v| (v, i)))
        .collect();
    if level.is_empty() {
        return Ok(e);
    }
    close_parts(cx, e, &level, quants)
}

fn close_parts(
    cx: &mut Ctx,
    e: Edge,
    level: &HashMap<u32, usize>,
    quants: &[bool],
) -> Result<Edge, Limit> {
    let Node::And(..) = cx.aig.nodes[(e >> 1) as usize] else {
        return Ok(e);
    };
    // A negated AND is a disjunction of the negated conjuncts.
    let flip = e & 1;
    let mut parts = Vec::new();
    let mut stack = vec![e ^ flip];
    while let Some(p) = stack.pop() {
        match cx.aig.nodes[(p >> 1) as usize] {
            Node::And(a, b) if p & 1 == 0 => {
                stack.push(a);
                stack.push(b);
            }
            _ => parts.push(p ^ flip),
        }
    }

    // Components of parts linked through shared renamed variables.
    let supports: Vec<HashSet<u32>> = parts.iter().map(|&p| cx.aig.support(p)).collect();
    let mut comp: Vec<usize> = (0..parts.len()).collect();
    fn find(comp: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while comp[r] != r {
            r = comp[r];
        }
        comp[i] = r;
        r
    }
    let mut owner: HashMap<u32, usize> = HashMap::new();
    for (i, sup) in supports.iter().enumerate() {
        for v in sup.iter().filter(|v| level.contains_key(v)) {
            match owner.get(v) {
                Some(&j) => {
                    let (a, b) = (find(&mut comp, i), find(&mut comp, j));
                    comp[a] = b;
                }
                None => {
                    owner.insert(*v, i);
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..parts.len() {
        let r = find(&mut comp, i);
        groups.entry(r).or_default().push(i);
    }

    let (unit, absorbing) = if flip == 0 { (TRUE, FALSE) } else { (FALSE, TRUE) };
    let mut out = unit;
    let mut keys: Vec<usize> = groups.keys().copied().collect();
    keys.sort_unstable();
    for key in keys {
        let members = &groups[&key];
        let mut vars: HashSet<u32> = HashSet::new();
        for &i in members {
            vars.extend(supports[i].iter().copied());
        }
        let closed = !vars.is_empty() && vars.iter().all(|v| level.contains_key(v));
        let value = if closed {
            let mut g = unit;
            for &i in members {
                g = if flip == 0 {
                    cx.aig.and(g, parts[i])
                } else {
                    cx.aig.and(g ^ 1, parts[i] ^ 1) ^ 1
                };
            }
            let mut blocks = vec![Block {
                exists: true,
                vars: Vec::new(),
            }];
            let mut by_level: Vec<Vec<u32>> = vec![Vec::new(); quants.len()];
            for v in &vars {
                by_level[level[v]].push(*v);
            }
            for (vs, &q) in by_level.into_iter().zip(quants) {
                blocks.push(Block { exists: q, vars: vs });
            }
            let blocks = normalize(&blocks);
            let mut game = Game::new(cx, &blocks, g);
            let r = game.solve(cx);
            game.absorb_into(&mut cx.stats);
            if r?.is_some() {
                TRUE
            } else {
                FALSE
            }
        } else if members.len() == 1 {
            close_parts(cx, parts[members[0]], level, quants)?
        } else {
            let mut g = unit;
            for &i in members {
                g = if flip == 0 {
                    cx.aig.and(g, parts[i])
                } else {
                    cx.aig.and(g ^ 1, parts[i] ^ 1) ^ 1
                };
            }
            g
        };
        if value == absorbing {
            return Ok(absorbing);
        }
        out = if flip == 0 {
            cx.aig.and(out, value)
        } else {
            cx.aig.and(out ^ 1, value ^ 1) ^ 1
        };
    }
    Ok(out)
}

/// Maps every variable in `groups` to a fresh one, recording it in `map`.
fn rename(cx: &mut Ctx, map: &mut HashMap<u32, Edge>, groups: &[Vec<u32>]) -> Vec<Vec<u32>> {
    groups
        .iter()
        .map(|g| {
            g.iter()
                .map(|&old| {
                    let new = cx.aig.fresh();
                    let e = cx.aig.var(new);
                    map.insert(old, e);
                    new
                })
                .collect()
        })
        .collect()
}

fn keep_support(cx: &Ctx, copy: Edge, renamed: Vec<Vec<u32>>, out: &mut [Vec<u32>]) {
    let support = cx.aig.support(copy);
    for (i, fresh) in renamed.into_iter().enumerate() {
        out[i].extend(fresh.into_iter().filter(|v| support.contains(v)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{Cnf, QuantBlock};
    use proptest::prelude::*;

    fn qbf(prefix: &[(Quantifier, &[u32])], n: u32, clauses: &[&[i64]]) -> Qbf {
        Qbf {
            prefix: prefix
                .iter()
                .map(|&(quantifier, vs)| QuantBlock {
                    quantifier,
                    vars: vs.iter().map(|&v| Var::new(v)).collect(),
                })
                .collect(),
            matrix: Cnf::from_dimacs(n, clauses),
        }
    }

    fn eval(q: &Qbf) -> Option<bool> {
        naive_qbf_eval(q, &EvalConfig::default(), &Limits::default()).decided()
    }

    /// Textbook recursive semantics, one variable at a time.
    fn brute(q: &Qbf) -> bool {
        let q = q.closed();
        let order: Vec<(Quantifier, Var)> = q
            .prefix
            .iter()
            .flat_map(|b| b.vars.iter().map(move |&v| (b.quantifier, v)))
            .collect();
        fn go(q: &Qbf, order: &[(Quantifier, Var)], asg: &mut Vec<bool>) -> bool {
            let Some((&(quant, v), rest)) = order.split_first() else {
                return crate::logic::eval_matrix(&q.matrix, asg);
            };
            let mut results = [false, true].into_iter().map(|b| {
                asg[v.index() as usize - 1] = b;
                go(q, rest, asg)
            });
            match quant {
                Quantifier::Exists => results.any(|r| r),
                Quantifier::Forall => results.all(|r| r),
            }
        }
        go(&q, &order, &mut vec![false; q.matrix.num_vars as usize])
    }

    use Quantifier::{Exists as E, Forall as A};

    #[test]
    fn small_cases() {
        assert_eq!(eval(&qbf(&[(A, &[1])], 1, &[&[1]])), Some(false));
        assert_eq!(eval(&qbf(&[(E, &[1]), (A, &[2])], 2, &[&[1, 2]])), Some(true));
        assert_eq!(eval(&qbf(&[(A, &[2]), (E, &[1])], 2, &[&[1, 2], &[-1, -2]])), Some(true));
        assert_eq!(eval(&qbf(&[(E, &[1]), (A, &[2])], 2, &[&[1, 2], &[-1, -2]])), Some(false));
        assert_eq!(eval(&qbf(&[], 0, &[])), Some(true));
        assert_eq!(eval(&qbf(&[], 0, &[&[]])), Some(false));
        assert_eq!(eval(&qbf(&[(A, &[1])], 1, &[&[1, -1]])), Some(true));
    }

    #[test]
    fn outer_witness_is_reported() {
        let q = qbf(&[(E, &[1]), (A, &[2])], 2, &[&[1, 2]]);
        assert_eq!(
            naive_qbf_eval(&q, &EvalConfig::default(), &Limits::default()),
            QbfOutcome::True(vec![true, false])
        );
    }

    #[test]
    fn universal_cap() {
        let vars: Vec<u32> = (1..=17).collect();
        let q = qbf(&[(A, &vars)], 17, &[&[1, -1]]);
        assert_eq!(eval(&q), None);
        let cfg = EvalConfig { max_universals: 17 };
        assert_eq!(naive_qbf_eval(&q, &cfg, &Limits::default()).decided(), Some(true));
    }

    #[test]
    fn timeout_reports_limit() {
        let q = qbf(&[(E, &[1]), (A, &[2])], 2, &[&[1, 2]]);
        let limits = Limits::new(std::time::Duration::ZERO, 1 << 30);
        assert_eq!(
            naive_qbf_eval(&q, &EvalConfig::default(), &limits),
            QbfOutcome::ResourceLimit
        );
    }

    fn arb_qbf() -> impl Strategy<Value = Qbf> {
        (1u32..=7, 1usize..=5).prop_flat_map(|(n, blocks)| {
            let clause = prop::collection::vec((1..=n as i64, any::<bool>()), 1..=3);
            (
                prop::collection::vec(0..blocks, n as usize),
                any::<bool>(),
                prop::collection::vec(clause, 0..=12),
            )
                .prop_map(move |(level, start_forall, clauses)| {
                    let prefix = (0..blocks)
                        .map(|b| QuantBlock {
                            quantifier: if (b % 2 == 0) == start_forall {
                                Quantifier::Forall
                            } else {
                                Quantifier::Exists
                            },
                            vars: (1..=n)
                                .filter(|&v| level[v as usize - 1] == b)
                                .map(Var::new)
                                .collect(),
                        })
                        .collect();
                    let mut matrix = Cnf::new(n);
                    for c in clauses {
                        matrix.add_clause(
                            c.into_iter()
                                .map(|(v, neg)| Lit::from_dimacs(if neg { -v } else { v }))
                                .collect(),
                        );
                    }
                    Qbf { prefix, matrix }
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(600))]
        #[test]
        fn agrees_with_brute_force(q in arb_qbf()) {
            prop_assert_eq!(eval(&q), Some(brute(&q)));
        }

        #[test]
        fn outer_witness_satisfies(q in arb_qbf()) {
            // Fixing the outer block to the reported witness keeps it true.
            let cfg = EvalConfig::default();
            if let QbfOutcome::True(values) = naive_qbf_eval(&q, &cfg, &Limits::default()) {
                let closed = q.closed();
                let mut fixed = closed.clone();
                if closed.prefix[0].quantifier == Quantifier::Exists {
                    for v in &closed.prefix[0].vars {
                        let i = v.index() as usize - 1;
                        fixed.matrix.add_clause(vec![Lit::with_value(*v, values[i])]);
                    }
                }
                prop_assert!(brute(&fixed));
            }
        }
    }
}
