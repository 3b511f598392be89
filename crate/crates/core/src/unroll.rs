//! Classic bounded model checking: `k` copies of the transition relation
//! between consecutive state vectors `Z_0 .. Z_k`, with the initial
//! predicate on `Z_0` and the bad predicate on `Z_k`.

use std::time::Instant;

use crate::limits::Limits;
use crate::logic::{Cnf, CnfBuilder, Group, StateBlock, VarMap};
use crate::satcore::{Outcome, Solver};
use crate::tsys::{StateVector, Trace, TransitionSystem};
use crate::verdict::{BmcResult, Stats, Verdict};

/// Encodes bad-state reachability in exactly `k` steps.
///
/// Variables are allocated as `Z_0 .. Z_k`, then the inputs of steps
/// `0 .. k-1`, then Tseitin variables (init cone, one transition cone per
/// step, bad cone).
pub fn encode_unrolled(sys: &TransitionSystem, k: u32) -> (Cnf, VarMap) {
    let n = sys.num_latches();
    let mut b = CnfBuilder::new();
    let z: Vec<_> = (0..=k).map(|i| b.state(StateBlock::Z(i), n)).collect();
    let xs: Vec<_> = (0..k).map(|i| b.inputs(i, sys.num_inputs())).collect();

    let init = b.encode(sys, &[sys.init()], &z[0], &[], Group::Init);
    b.assert(init[0]);
    for i in 0..k as usize {
        let next = b.encode(
            sys,
            sys.latch_next(),
            &z[i],
            &xs[i],
            Group::Transition(i as u32),
        );
        for (j, &e) in next.iter().enumerate() {
            b.equate(z[i + 1][j], e);
        }
    }
    let bad = b.encode(
        sys,
        &[sys.bad()],
        &z[k as usize],
        &[],
        Group::Bad,
    );
    b.assert(bad[0]);
    b.finish()
}

/// Reads `Z_0 .. Z_k` and the per-step inputs out of a model.
pub(crate) fn decode_trace(map: &VarMap, model: &[bool], k: u32) -> Trace {
    let value = |v: crate::logic::Var| model[v.index() as usize - 1];
    let states = (0..=k)
        .map(|i| StateVector::new(map.state_vars(StateBlock::Z(i)).into_iter().map(value).collect()))
        .collect();
    let inputs = (0..k)
        .map(|i| map.input_vars(i).into_iter().map(value).collect())
        .collect();
    Trace { states, inputs }
}

/// Inputs driving `from` to `to` in one step, found by a SAT call.
pub(crate) fn step_inputs(
    sys: &TransitionSystem,
    from: &StateVector,
    to: &StateVector,
) -> Option<Vec<bool>> {
    let n = sys.num_latches();
    let mut b = CnfBuilder::new();
    let u = b.state(StateBlock::Z(0), n);
    let v = b.state(StateBlock::Z(1), n);
    let xs = b.inputs(0, sys.num_inputs());
    let next = b.encode(sys, sys.latch_next(), &u, &xs, Group::Transition(0));
    for (j, &e) in next.iter().enumerate() {
        b.equate(v[j], e);
    }
    for (lits, state) in [(&u, from), (&v, to)] {
        for (&l, &bit) in lits.iter().zip(state.bits()) {
            b.clause(vec![if bit { l } else { !l }]);
        }
    }
    let (cnf, map) = b.finish();
    match Solver::from_cnf(&cnf).solve(&[]) {
        Outcome::Sat(model) => Some(
            map.input_vars(0)
                .into_iter()
                .map(|v| model[v.index() as usize - 1])
                .collect(),
        ),
        _ => None,
    }
}

pub fn solve_unrolled(sys: &TransitionSystem, k: u32, limits: &Limits) -> BmcResult {
    let start = Instant::now();
    let budget = limits.start();
    let (cnf, map) = encode_unrolled(sys, k);
    let mut stats = Stats {
        vars: cnf.num_vars as u64,
        clauses: cnf.num_clauses() as u64,
        ..Stats::default()
    };
    let mut solver = Solver::from_cnf(&cnf);
    solver.set_budget(budget);
    let verdict = match solver.solve(&[]) {
        Outcome::Sat(model) => {
            let trace = decode_trace(&map, &model, k);
            debug_assert_eq!(trace.validate(sys), Ok(()));
            Verdict::Reachable(trace)
        }
        Outcome::Unsat(_) => Verdict::UnreachableAtBound,
        Outcome::ResourceLimit => Verdict::ResourceLimit,
    };
    stats.absorb(&solver.stats());
    BmcResult {
        verdict,
        stats,
        wall_time: start.elapsed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::Role;
    use crate::tsys::tests::{counter, SELF_LOOP};
    use crate::tsys::parse_aiger;

    fn reach(sys: &TransitionSystem, k: u32) -> Option<Trace> {
        match solve_unrolled(sys, k, &Limits::default()).verdict {
            Verdict::Reachable(t) => Some(t),
            Verdict::UnreachableAtBound => None,
            Verdict::ResourceLimit => panic!("limit"),
        }
    }

    #[test]
    fn counter_bounds() {
        let sys = counter();
        assert!(reach(&sys, 0).is_none());
        assert!(reach(&sys, 2).is_none());
        let t = reach(&sys, 3).unwrap();
        let idx: Vec<u64> = t.states.iter().map(StateVector::index).collect();
        assert_eq!(idx, vec![0, 1, 2, 3]);
        let t7 = reach(&sys, 7).unwrap();
        assert_eq!(t7.states[4].index(), 0);
        assert_eq!(t7.validate(&sys), Ok(()));
    }

    #[test]
    fn step_inputs_by_sat() {
        let sys = counter();
        let s = |i| StateVector::from_index(i, 2);
        assert_eq!(step_inputs(&sys, &s(0), &s(1)), Some(vec![]));
        assert_eq!(step_inputs(&sys, &s(0), &s(2)), None);
        let cnf = crate::oracle::random_3cnf(4, 12, 20);
        let sys = crate::oracle::cnf_system(&cnf);
        let x = step_inputs(&sys, &StateVector::zeros(1), &StateVector::new(vec![true])).unwrap();
        assert!(crate::logic::eval_matrix(&cnf, &x));
    }

    #[test]
    fn k0_encoding_has_only_z0() {
        let (cnf, map) = encode_unrolled(&counter(), 0);
        assert_eq!(map.state_vars(StateBlock::Z(0)).len(), 2);
        assert!(map.state_vars(StateBlock::Z(1)).is_empty());
        assert!(Solver::from_cnf(&cnf).solve(&[]).is_unsat());
    }

    #[test]
    fn self_loop_never_reaches() {
        let sys = parse_aiger(SELF_LOOP.as_bytes()).unwrap();
        for k in 0..=8 {
            assert!(reach(&sys, k).is_none(), "k = {k}");
        }
    }

    #[test]
    fn one_transition_cone_per_step() {
        let sys = counter();
        for k in 0..6 {
            let (_, map) = encode_unrolled(&sys, k);
            assert_eq!(
                map.count_groups(|g| matches!(g, Group::Transition(_))),
                k as usize
            );
            let tr_vars = map.count_roles(|r| {
                matches!(
                    r,
                    Role::Tseitin {
                        group: Group::Transition(_),
                        ..
                    }
                )
            });
            assert_eq!(tr_vars, 3 * k as usize);
        }
    }
}
