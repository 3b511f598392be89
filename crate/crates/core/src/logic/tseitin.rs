//! Circuit-to-clause translation.
//!
//! Every gate gets a defining variable with the full three-clause
//! definition `g <-> a & b`. Both directions are kept because gate
//! variables also occur under universally quantified antecedents, where a
//! polarity-reduced encoding would be unsound.

use std::ops::Not;

use super::{Cnf, Group, Lit, Role, StateBlock, Var, VarMap};
use crate::tsys::{Node, Signal, TransitionSystem};

/// A circuit value after encoding: a constant or a literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoded {
    Const(bool),
    Lit(Lit),
}

impl Not for Encoded {
    type Output = Encoded;
    fn not(self) -> Encoded {
        match self {
            Encoded::Const(b) => Encoded::Const(!b),
            Encoded::Lit(l) => Encoded::Lit(!l),
        }
    }
}

impl From<Lit> for Encoded {
    fn from(l: Lit) -> Encoded {
        Encoded::Lit(l)
    }
}

/// Accumulates clauses and role-tagged variables.
#[derive(Debug, Default)]
pub struct CnfBuilder {
    map: VarMap,
    clauses: Vec<Vec<Lit>>,
    guard: Option<Lit>,
    aux_counter: u32,
}

impl CnfBuilder {
    pub fn new() -> CnfBuilder {
        CnfBuilder::default()
    }

    pub fn map(&self) -> &VarMap {
        &self.map
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn alloc(&mut self, role: Role) -> Var {
        self.map.alloc(role)
    }

    /// Allocates `n` bits for a state block.
    pub fn state(&mut self, block: StateBlock, n: usize) -> Vec<Lit> {
        (0..n as u32)
            .map(|bit| self.map.alloc(Role::State { block, bit }).pos())
            .collect()
    }

    pub fn inputs(&mut self, step: u32, m: usize) -> Vec<Lit> {
        (0..m as u32)
            .map(|bit| self.map.alloc(Role::Input { step, bit }).pos())
            .collect()
    }

    /// While set, `lit` is appended to every emitted clause.
    pub fn set_guard(&mut self, lit: Option<Lit>) {
        self.guard = lit;
    }

    pub fn clause(&mut self, mut clause: Vec<Lit>) {
        if let Some(g) = self.guard {
            clause.push(g);
        }
        self.clauses.push(clause);
    }

    /// Asserts `e`. A false constant yields the empty clause.
    pub fn assert(&mut self, e: Encoded) {
        match e {
            Encoded::Const(true) => {}
            Encoded::Const(false) => self.clause(vec![]),
            Encoded::Lit(l) => self.clause(vec![l]),
        }
    }

    /// Constrains `a <-> b`.
    pub fn equate(&mut self, a: Lit, b: Encoded) {
        match b {
            Encoded::Const(v) => self.clause(vec![if v { a } else { !a }]),
            Encoded::Lit(b) => {
                self.clause(vec![!a, b]);
                self.clause(vec![a, !b]);
            }
        }
    }

    fn fresh(&mut self, group: Group) -> Lit {
        let index = self.aux_counter;
        self.aux_counter += 1;
        self.map.alloc(Role::Aux { group, index }).pos()
    }

    /// Adds the disjunction of `items` as one clause.
    pub fn assert_any(&mut self, items: &[Encoded]) {
        let mut lits = Vec::with_capacity(items.len());
        for &e in items {
            match e {
                Encoded::Const(true) => return,
                Encoded::Const(false) => {}
                Encoded::Lit(l) => lits.push(l),
            }
        }
        self.clause(lits);
    }

    /// Defines `g <-> a & b` with a fresh variable from `group`, folding
    /// constants.
    pub fn and2(&mut self, group: Group, a: Encoded, b: Encoded) -> Encoded {
        self.and_all(group, &[a, b])
    }

    /// Defines the conjunction of `items`. Constants and duplicates are
    /// folded; a single remaining operand is returned as is.
    pub fn and_all(&mut self, group: Group, items: &[Encoded]) -> Encoded {
        let mut lits: Vec<Lit> = Vec::with_capacity(items.len());
        for &e in items {
            match e {
                Encoded::Const(false) => return Encoded::Const(false),
                Encoded::Const(true) => {}
                Encoded::Lit(l) => {
                    if lits.contains(&!l) {
                        return Encoded::Const(false);
                    }
                    if !lits.contains(&l) {
                        lits.push(l);
                    }
                }
            }
        }
        match lits.len() {
            0 => Encoded::Const(true),
            1 => Encoded::Lit(lits[0]),
            _ => {
                let g = self.fresh(group);
                self.define_and(g, &lits);
                Encoded::Lit(g)
            }
        }
    }

    pub fn or_all(&mut self, group: Group, items: &[Encoded]) -> Encoded {
        let negated: Vec<Encoded> = items.iter().map(|&e| !e).collect();
        !self.and_all(group, &negated)
    }

    /// `a <-> b` as a single encoded value.
    pub fn xnor(&mut self, group: Group, a: Encoded, b: Encoded) -> Encoded {
        match (a, b) {
            (Encoded::Const(x), e) | (e, Encoded::Const(x)) => {
                if x {
                    e
                } else {
                    !e
                }
            }
            (Encoded::Lit(x), Encoded::Lit(y)) if x == y => Encoded::Const(true),
            (Encoded::Lit(x), Encoded::Lit(y)) if x == !y => Encoded::Const(false),
            (Encoded::Lit(x), Encoded::Lit(y)) => {
                let t = self.fresh(group);
                self.clause(vec![!t, !x, y]);
                self.clause(vec![!t, x, !y]);
                self.clause(vec![t, x, y]);
                self.clause(vec![t, !x, !y]);
                Encoded::Lit(t)
            }
        }
    }

    /// Bitwise equality of two equally long state vectors.
    pub fn equal(&mut self, group: Group, a: &[Lit], b: &[Lit]) -> Encoded {
        assert_eq!(a.len(), b.len());
        let bits: Vec<Encoded> = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| self.xnor(group, x.into(), y.into()))
            .collect();
        self.and_all(group, &bits)
    }

    fn define_and(&mut self, g: Lit, operands: &[Lit]) {
        for &x in operands {
            self.clause(vec![!g, x]);
        }
        let mut long: Vec<Lit> = operands.iter().map(|&x| !x).collect();
        long.push(g);
        self.clause(long);
    }

    /// Encodes the cone of `roots` with latches bound to `latches` and
    /// inputs bound to `inputs`. Opens a new Tseitin group; gate variables
    /// are tagged with their node index. `inputs` may be empty when the cone
    /// reads no input (the initial and bad predicates).
    pub fn encode(
        &mut self,
        sys: &TransitionSystem,
        roots: &[Signal],
        latches: &[Lit],
        inputs: &[Lit],
        group: Group,
    ) -> Vec<Encoded> {
        assert_eq!(latches.len(), sys.num_latches());
        assert!(inputs.is_empty() || inputs.len() == sys.num_inputs());
        self.map.open_group(group);
        let cone = sys.cone(roots);
        let mut val: Vec<Option<Encoded>> = vec![None; sys.nodes().len()];
        for (idx, node) in sys.nodes().iter().enumerate() {
            if !cone[idx] {
                continue;
            }
            let v = match *node {
                Node::False => Encoded::Const(false),
                Node::Input(i) => Encoded::Lit(*inputs.get(i).expect("input binding required")),
                Node::Latch(j) => Encoded::Lit(latches[j]),
                Node::And(a, b) => {
                    let ea = signal_value(&val, a);
                    let eb = signal_value(&val, b);
                    match (ea, eb) {
                        (Encoded::Const(false), _) | (_, Encoded::Const(false)) => {
                            Encoded::Const(false)
                        }
                        (Encoded::Const(true), e) | (e, Encoded::Const(true)) => e,
                        (Encoded::Lit(x), Encoded::Lit(y)) => {
                            let g = self
                                .map
                                .alloc(Role::Tseitin {
                                    group,
                                    index: idx as u32,
                                })
                                .pos();
                            self.define_and(g, &[x, y]);
                            Encoded::Lit(g)
                        }
                    }
                }
            };
            val[idx] = Some(v);
        }
        roots.iter().map(|&r| signal_value(&val, r)).collect()
    }

    pub fn finish(self) -> (Cnf, VarMap) {
        (
            Cnf {
                num_vars: self.map.len() as u32,
                clauses: self.clauses,
            },
            self.map,
        )
    }
}

fn signal_value(val: &[Option<Encoded>], s: Signal) -> Encoded {
    let v = val[s.node()].expect("operand encoded before use");
    if s.is_negated() {
        !v
    } else {
        v
    }
}

/// Stand-alone encoding of the cone of `roots`: latch `j` becomes variable
/// `j + 1`, inputs follow, then one variable per gate in the cone. The roots
/// are returned, not asserted.
pub fn tseitin(sys: &TransitionSystem, roots: &[Signal]) -> (Cnf, VarMap, Vec<Encoded>) {
    let mut b = CnfBuilder::new();
    let latches = b.state(StateBlock::Z(0), sys.num_latches());
    let inputs = b.inputs(0, sys.num_inputs());
    let out = b.encode(sys, roots, &latches, &inputs, Group::Transition(0));
    let (cnf, map) = b.finish();
    (cnf, map, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::eval_matrix;
    use crate::tsys::tests::counter;
    use crate::tsys::{parse_aiger, SystemBuilder};
    use std::collections::BTreeSet;

    fn clause_set(cnf: &Cnf) -> BTreeSet<Vec<i64>> {
        cnf.clauses
            .iter()
            .map(|c| {
                let mut v: Vec<i64> = c.iter().map(|l| l.to_dimacs()).collect();
                v.sort();
                v
            })
            .collect()
    }

    #[test]
    fn single_and_gate() {
        // latches a, b; bad = a & b
        let sys = parse_aiger(b"aag 3 0 2 1 1\n2 2\n4 4\n6\n6 2 4\n").unwrap();
        let (cnf, _, out) = tseitin(&sys, &[sys.bad()]);
        assert_eq!(out, vec![Encoded::Lit(Lit::from_dimacs(3))]);
        let expected: BTreeSet<Vec<i64>> = [vec![-3, 1], vec![-3, 2], vec![-2, -1, 3]]
            .into_iter()
            .map(|mut c| {
                c.sort();
                c
            })
            .collect();
        assert_eq!(clause_set(&cnf), expected);
    }

    #[test]
    fn constant_root_needs_nothing() {
        let sys = counter();
        let (cnf, map, out) = tseitin(&sys, &[Signal::TRUE]);
        assert_eq!(out, vec![Encoded::Const(true)]);
        assert!(cnf.clauses.is_empty());
        assert_eq!(map.count_roles(|r| matches!(r, Role::Tseitin { .. })), 0);
    }

    #[test]
    fn counter_bad_cone() {
        let sys = counter();
        let (cnf, map, _) = tseitin(&sys, &[sys.bad()]);
        assert_eq!(cnf.num_clauses(), 3);
        assert_eq!(map.count_roles(|r| matches!(r, Role::Tseitin { .. })), 1);
    }

    /// Exhaustive check: for every assignment of the original variables, the
    /// CNF has an extension iff the root evaluates as the circuit does.
    fn check_projection(sys: &TransitionSystem, root: Signal) {
        let (mut cnf, map, out) = tseitin(sys, &[root]);
        let n = sys.num_latches();
        let m = sys.num_inputs();
        let orig = n + m;
        let fresh = map.len() - orig;
        let root_holds = match out[0] {
            Encoded::Const(b) => Some(b),
            Encoded::Lit(l) => {
                cnf.clauses.push(vec![l]);
                None
            }
        };
        for a in 0u32..1 << orig {
            let state: Vec<bool> = (0..n).map(|j| (a >> j) & 1 == 1).collect();
            let inputs: Vec<bool> = (0..m).map(|i| (a >> (n + i)) & 1 == 1).collect();
            let expect = circuit_value(sys, root, &state, &inputs);
            let has_ext = (0u32..1 << fresh).any(|f| {
                let mut full: Vec<bool> = (0..orig).map(|b| (a >> b) & 1 == 1).collect();
                full.extend((0..fresh).map(|b| (f >> b) & 1 == 1));
                eval_matrix(&cnf, &full)
            });
            match root_holds {
                Some(c) => {
                    assert_eq!(c, expect);
                    assert!(has_ext);
                }
                None => assert_eq!(has_ext, expect, "assignment {a:b}"),
            }
        }
    }

    fn circuit_value(sys: &TransitionSystem, s: Signal, state: &[bool], inputs: &[bool]) -> bool {
        let mut val = Vec::new();
        for node in sys.nodes() {
            let v = match *node {
                Node::False => false,
                Node::Input(i) => inputs[i],
                Node::Latch(j) => state[j],
                Node::And(a, b) => {
                    (val[a.node()] ^ a.is_negated()) && (val[b.node()] ^ b.is_negated())
                }
            };
            val.push(v);
        }
        val[s.node()] ^ s.is_negated()
    }

    #[test]
    fn projection_matches_circuit_on_small_circuits() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let nl = rng.gen_range(1..=3);
            let ni = rng.gen_range(0..=4 - nl);
            let mut b = SystemBuilder::new();
            let mut pool = vec![Signal::FALSE];
            for _ in 0..ni {
                pool.push(b.input());
            }
            for _ in 0..nl {
                pool.push(b.latch());
            }
            for _ in 0..rng.gen_range(1..6) {
                let x = pool[rng.gen_range(0..pool.len())];
                let y = pool[rng.gen_range(0..pool.len())];
                let g = b.and(
                    if rng.gen() { !x } else { x },
                    if rng.gen() { !y } else { y },
                );
                pool.push(g);
            }
            for j in 0..nl {
                b.set_next(j, pool[rng.gen_range(0..pool.len())]);
            }
            let root = pool[rng.gen_range(0..pool.len())];
            let root = if rng.gen() { !root } else { root };
            let sys = b.build(Signal::FALSE).unwrap();
            check_projection(&sys, root);
        }
    }

    #[test]
    fn guard_extends_every_clause() {
        let sys = counter();
        let mut b = CnfBuilder::new();
        let z = b.state(StateBlock::U, 2);
        let act = b.alloc(Role::Activation(crate::logic::Activation::Bad)).pos();
        b.set_guard(Some(!act));
        let out = b.encode(&sys, &[sys.bad()], &z, &[], Group::Bad);
        b.assert(out[0]);
        let (cnf, _) = b.finish();
        assert_eq!(cnf.num_clauses(), 4);
        assert!(cnf.clauses.iter().all(|c| c.contains(&!act)));
    }

    #[test]
    fn xnor_and_equal() {
        let mut b = CnfBuilder::new();
        let x = b.state(StateBlock::U, 2);
        let y = b.state(StateBlock::V, 2);
        let e = b.equal(Group::Link(0), &x, &y);
        b.assert(e);
        let (cnf, map) = b.finish();
        let n = map.len();
        for a in 0u32..16 {
            let ok = (0u32..1 << (n - 4)).any(|f| {
                let mut full: Vec<bool> = (0..4).map(|i| (a >> i) & 1 == 1).collect();
                full.extend((0..n - 4).map(|i| (f >> i) & 1 == 1));
                eval_matrix(&cnf, &full)
            });
            assert_eq!(ok, (a & 3) == (a >> 2), "{a:04b}");
        }
    }
}
