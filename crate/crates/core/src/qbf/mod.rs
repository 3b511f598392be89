//! Reachability as quantified Boolean formulas.
//!
//! The diameter encoding keeps one transition relation over a universally
//! quantified pair `(U, V)` and requires every consecutive pair
//! `(Z_i, Z_{i+1})` to be one of its instances. The squaring encoding
//! halves the bound per quantifier level, so a bound `2^m` needs `m`
//! universal blocks and still a single transition relation.

mod eval;

pub use eval::{naive_qbf_eval, naive_qbf_eval_with_stats, EvalConfig, QbfOutcome};

use std::time::Instant;

use thiserror::Error;

use crate::limits::Limits;
use crate::logic::{
    CnfBuilder, Encoded, Group, Lit, Qbf, QuantBlock, Quantifier, Role, StateBlock, Var, VarMap,
};
use crate::tsys::{Signal, StateVector, Trace, TransitionSystem};
use crate::unroll::step_inputs;
use crate::verdict::{BmcResult, Stats, Verdict};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QbfError {
    #[error("bound {0} is not a power of two")]
    NotPowerOfTwo(u32),
}

/// Encodes `TR(U, V)`: the next-state cone over `U` and step-0 inputs,
/// compared bitwise with `V`.
fn encode_tr(b: &mut CnfBuilder, sys: &TransitionSystem, u: &[Lit], v: &[Lit]) -> Encoded {
    let xs = b.inputs(0, sys.num_inputs());
    let group = Group::Transition(0);
    let next = b.encode(sys, sys.latch_next(), u, &xs, group);
    let bits: Vec<Encoded> = v
        .iter()
        .zip(next)
        .map(|(&vj, e)| b.xnor(group, vj.into(), e))
        .collect();
    b.and_all(group, &bits)
}

fn assert_predicate(b: &mut CnfBuilder, sys: &TransitionSystem, root: Signal, z: &[Lit], group: Group) {
    let e = b.encode(sys, &[root], z, &[], group);
    b.assert(e[0]);
}

/// Splits variables into prefix blocks: `outer` state blocks existential,
/// then each entry of `inner` as its own block, then everything else
/// existential.
fn build_prefix(map: &VarMap, blocks: &[(Quantifier, Vec<StateBlock>)]) -> Vec<QuantBlock> {
    let mut prefix: Vec<QuantBlock> = blocks
        .iter()
        .map(|(q, sbs)| QuantBlock {
            quantifier: *q,
            vars: sbs.iter().flat_map(|&sb| map.state_vars(sb)).collect(),
        })
        .collect();
    let placed: std::collections::HashSet<Var> =
        prefix.iter().flat_map(|b| b.vars.iter().copied()).collect();
    prefix.push(QuantBlock {
        quantifier: Quantifier::Exists,
        vars: map.roles().map(|(v, _)| v).filter(|v| !placed.contains(v)).collect(),
    });
    prefix
}

/// `∃Z_0..Z_k ∀U,V ∃(inputs, aux). I(Z_0) ∧ F(Z_k) ∧
/// ⋀_i ((U = Z_i ∧ V = Z_{i+1}) → TR(U, V))`.
///
/// The universal block always has `2n` variables and the transition cone is
/// encoded once, whatever `k`. At `k = 0` the implication is vacuous.
pub fn encode_diameter_qbf(sys: &TransitionSystem, k: u32) -> (Qbf, VarMap) {
    let n = sys.num_latches();
    let mut b = CnfBuilder::new();
    let z: Vec<_> = (0..=k).map(|i| b.state(StateBlock::Z(i), n)).collect();
    let u = b.state(StateBlock::U, n);
    let v = b.state(StateBlock::V, n);

    assert_predicate(&mut b, sys, sys.init(), &z[0], Group::Init);
    assert_predicate(&mut b, sys, sys.bad(), &z[k as usize], Group::Bad);
    let tr = encode_tr(&mut b, sys, &u, &v);
    for i in 0..k as usize {
        let group = Group::Link(i as u32);
        let eu = b.equal(group, &u, &z[i]);
        let ev = b.equal(group, &v, &z[i + 1]);
        let guard = b.and2(group, eu, ev);
        b.assert_any(&[!guard, tr]);
    }
    let (matrix, map) = b.finish();
    let zs: Vec<StateBlock> = (0..=k).map(StateBlock::Z).collect();
    let prefix = build_prefix(
        &map,
        &[
            (Quantifier::Exists, zs),
            (Quantifier::Forall, vec![StateBlock::U, StateBlock::V]),
        ],
    );
    (Qbf { prefix, matrix }, map)
}

/// Adds a fresh last input `stay`; when it is set every latch keeps its
/// value. Reachability within `k` steps of the original equals reachability
/// in exactly `k` steps of the result.
pub fn add_self_loops(sys: &TransitionSystem) -> TransitionSystem {
    let mut b = sys.to_builder();
    let stay = b.input();
    for j in 0..b.num_latches() {
        let l = b.latch_signal(j);
        let next = b.next_of(j).expect("built systems define every latch");
        let muxed = b.mux(stay, l, next);
        b.set_next(j, muxed);
    }
    b.build(sys.bad()).expect("self-loop extension is valid")
}

/// Maps a trace of `add_self_loops(sys)` back to `sys`, dropping the
/// stuttering steps.
pub fn strip_self_loops(trace: &Trace) -> Trace {
    let mut states = vec![trace.states[0].clone()];
    let mut inputs = Vec::new();
    for (i, x) in trace.inputs.iter().enumerate() {
        let (&stay, real) = x.split_last().expect("self-loop input present");
        if !stay {
            states.push(trace.states[i + 1].clone());
            inputs.push(real.to_vec());
        }
    }
    Trace { states, inputs }
}

/// The two ends of a squaring encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ends {
    /// `I(Z_0) ∧ F(Z_k)`.
    Predicates,
    /// `Z_0` and `Z_k` fixed to concrete states.
    States(StateVector, StateVector),
}

fn log2_exact(k: u32) -> Result<u32, QbfError> {
    if k.is_power_of_two() {
        Ok(k.trailing_zeros())
    } else {
        Err(QbfError::NotPowerOfTwo(k))
    }
}

/// Iterative squaring for a power-of-two bound `k = 2^m`.
///
/// Prefix `∃(Z_0, Z_k, M_1) ∀(U_1, V_1) ∃M_2 ∀(U_2, V_2) … ∀(U_m, V_m)
/// ∃(inputs, aux)`; level `ℓ` requires `(U_ℓ, V_ℓ)` to be one of the two
/// halves `(X, M_ℓ)` or `(M_ℓ, Y)` of its parent interval, and the innermost
/// pair must be a transition. For `k = 1` the formula is
/// `I(Z_0) ∧ TR(Z_0, Z_1) ∧ F(Z_1)`.
pub fn encode_squaring_qbf(sys: &TransitionSystem, k: u32) -> Result<(Qbf, VarMap), QbfError> {
    encode_squaring_between(sys, k, &Ends::Predicates)
}

pub fn encode_squaring_between(
    sys: &TransitionSystem,
    k: u32,
    ends: &Ends,
) -> Result<(Qbf, VarMap), QbfError> {
    let m = log2_exact(k)?;
    let n = sys.num_latches();
    let mut b = CnfBuilder::new();
    let z0 = b.state(StateBlock::Z(0), n);
    let zk = b.state(StateBlock::Z(k), n);
    match ends {
        Ends::Predicates => {
            assert_predicate(&mut b, sys, sys.init(), &z0, Group::Init);
            assert_predicate(&mut b, sys, sys.bad(), &zk, Group::Bad);
        }
        Ends::States(s, t) => {
            for (lits, state) in [(&z0, s), (&zk, t)] {
                for (&l, &bit) in lits.iter().zip(state.bits()) {
                    b.clause(vec![if bit { l } else { !l }]);
                }
            }
        }
    }

    let mut blocks = vec![(Quantifier::Exists, vec![StateBlock::Z(0), StateBlock::Z(k)])];
    let (mut x, mut y) = (z0, zk);
    let mut antecedents = Vec::with_capacity(m as usize);
    for level in 1..=m {
        let mid = b.state(StateBlock::Mid(level), n);
        let u = b.state(StateBlock::LevelU(level), n);
        let v = b.state(StateBlock::LevelV(level), n);
        let group = Group::Link(level);
        let left_u = b.equal(group, &u, &x);
        let left_v = b.equal(group, &v, &mid);
        let left = b.and2(group, left_u, left_v);
        let right_u = b.equal(group, &u, &mid);
        let right_v = b.equal(group, &v, &y);
        let right = b.and2(group, right_u, right_v);
        antecedents.push(b.or_all(group, &[left, right]));
        blocks[(level - 1) as usize * 2].1.push(StateBlock::Mid(level));
        blocks.push((Quantifier::Forall, vec![StateBlock::LevelU(level), StateBlock::LevelV(level)]));
        blocks.push((Quantifier::Exists, Vec::new()));
        (x, y) = (u, v);
    }
    let tr = encode_tr(&mut b, sys, &x, &y);
    let mut clause: Vec<Encoded> = antecedents.into_iter().map(|a| !a).collect();
    clause.push(tr);
    b.assert_any(&clause);
    let (matrix, map) = b.finish();
    let prefix = build_prefix(&map, &blocks);
    Ok((Qbf { prefix, matrix }.normalized(), map))
}

fn read_state(map: &VarMap, values: &[bool], block: StateBlock) -> StateVector {
    StateVector::new(
        map.state_vars(block)
            .into_iter()
            .map(|v| values[v.index() as usize - 1])
            .collect(),
    )
}

fn with_inputs(sys: &TransitionSystem, states: Vec<StateVector>) -> Trace {
    let inputs = states
        .windows(2)
        .map(|w| step_inputs(sys, &w[0], &w[1]).expect("consecutive witness states are a transition"))
        .collect();
    Trace { states, inputs }
}

fn qbf_stats(qbf: &Qbf) -> Stats {
    Stats {
        vars: qbf.matrix.num_vars as u64,
        clauses: qbf.matrix.num_clauses() as u64,
        ..Stats::default()
    }
}

/// Exactly-`k` reachability through the diameter encoding.
pub fn solve_diameter(sys: &TransitionSystem, k: u32, cfg: &EvalConfig, limits: &Limits) -> BmcResult {
    let start = Instant::now();
    let (qbf, map) = encode_diameter_qbf(sys, k);
    let mut stats = qbf_stats(&qbf);
    let (outcome, s) = naive_qbf_eval_with_stats(&qbf, cfg, limits);
    stats.absorb(&s);
    let verdict = match outcome {
        QbfOutcome::True(values) => {
            let states = (0..=k).map(|i| read_state(&map, &values, StateBlock::Z(i))).collect();
            Verdict::Reachable(with_inputs(sys, states))
        }
        QbfOutcome::False => Verdict::UnreachableAtBound,
        QbfOutcome::ResourceLimit => Verdict::ResourceLimit,
    };
    BmcResult {
        verdict,
        stats,
        wall_time: start.elapsed(),
    }
}

/// Exactly-`k` reachability through iterative squaring, `k` a power of two.
/// The witness is rebuilt by solving both halves with fixed end points.
pub fn solve_squaring(
    sys: &TransitionSystem,
    k: u32,
    cfg: &EvalConfig,
    limits: &Limits,
) -> Result<BmcResult, QbfError> {
    let start = Instant::now();
    let (qbf, map) = encode_squaring_qbf(sys, k)?;
    let mut stats = qbf_stats(&qbf);
    let (outcome, s) = naive_qbf_eval_with_stats(&qbf, cfg, limits);
    stats.absorb(&s);
    let verdict = match outcome {
        QbfOutcome::True(values) => {
            let first = read_state(&map, &values, StateBlock::Z(0));
            let last = read_state(&map, &values, StateBlock::Z(k));
            let mut states = vec![first.clone()];
            let done = if k == 1 {
                states.push(last);
                true
            } else {
                let mid = read_state(&map, &values, StateBlock::Mid(1));
                let mut fill = Refiner {
                    sys,
                    cfg,
                    limits,
                    stats: &mut stats,
                };
                fill.path(&first, &mid, k / 2, &mut states) && fill.path(&mid, &last, k / 2, &mut states)
            };
            if done {
                Verdict::Reachable(with_inputs(sys, states))
            } else {
                Verdict::ResourceLimit
            }
        }
        QbfOutcome::False => Verdict::UnreachableAtBound,
        QbfOutcome::ResourceLimit => Verdict::ResourceLimit,
    };
    Ok(BmcResult {
        verdict,
        stats,
        wall_time: start.elapsed(),
    })
}

struct Refiner<'a> {
    sys: &'a TransitionSystem,
    cfg: &'a EvalConfig,
    limits: &'a Limits,
    stats: &'a mut Stats,
}

impl Refiner<'_> {
    /// Appends the states after `from` on a `len`-step path to `to`.
    /// Returns false when the evaluator runs out of resources.
    fn path(&mut self, from: &StateVector, to: &StateVector, len: u32, out: &mut Vec<StateVector>) -> bool {
        if len == 1 {
            out.push(to.clone());
            return true;
        }
        let ends = Ends::States(from.clone(), to.clone());
        let (qbf, map) = encode_squaring_between(self.sys, len, &ends).expect("halves stay powers of two");
        let (outcome, s) = naive_qbf_eval_with_stats(&qbf, self.cfg, self.limits);
        self.stats.absorb(&s);
        match outcome {
            QbfOutcome::True(values) => {
                let mid = read_state(&map, &values, StateBlock::Mid(1));
                self.path(from, &mid, len / 2, out) && self.path(&mid, to, len / 2, out)
            }
            QbfOutcome::False => panic!("a half of a proven path was refuted"),
            QbfOutcome::ResourceLimit => false,
        }
    }
}

/// Number of Tseitin groups holding a copy of the transition cone.
pub fn transition_copies(map: &VarMap) -> usize {
    map.count_groups(|g| matches!(g, Group::Transition(_)))
}

/// Variables defined by gates of the transition cone.
pub fn transition_gate_vars(map: &VarMap) -> usize {
    map.count_roles(|r| {
        matches!(
            r,
            Role::Tseitin {
                group: Group::Transition(_),
                ..
            }
        )
    })
}
