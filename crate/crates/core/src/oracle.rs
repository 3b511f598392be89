//! Explicit-state reachability, the referee for every symbolic engine, and
//! the generators for the random test corpus.
//!
//! Layers are bitsets over all `2^n` states: `S_0` holds the initial
//! states and `S_{i+1}` the images of `S_i` under every input vector. Exact
//! mode asks whether `S_k` meets the bad states, up-to mode whether any
//! `S_i` with `i <= k` does.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::logic::{Cnf, Lit};
use crate::tsys::{Predicate, Signal, StateVector, SystemBuilder, Trace, TransitionSystem};

pub const MAX_LATCHES: usize = 20;
pub const MAX_INPUTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    UpTo,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("{latches} latches exceed the explicit-state limit of {MAX_LATCHES}")]
    TooManyLatches { latches: usize },
    #[error("{inputs} inputs exceed the explicit-state limit of {MAX_INPUTS}")]
    TooManyInputs { inputs: usize },
}

#[derive(Clone, PartialEq, Eq)]
struct Bitset(Vec<u64>);

impl Bitset {
    fn new(bits: usize) -> Bitset {
        Bitset(vec![0; bits.div_ceil(64)])
    }

    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &word)| {
            (0..64).filter(move |b| word >> b & 1 == 1).map(move |b| w * 64 + b)
        })
    }

    fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }
}

fn input_vector(x: usize, m: usize) -> Vec<bool> {
    (0..m).map(|i| x >> i & 1 == 1).collect()
}

/// Explicit layered reachability. On success the witness trace has length
/// `k` (exact) or the first layer that meets the bad states (up-to).
pub fn layered_reach(
    sys: &TransitionSystem,
    k: u32,
    mode: Mode,
) -> Result<(bool, Option<Trace>), OracleError> {
    let n = sys.num_latches();
    let m = sys.num_inputs();
    if n > MAX_LATCHES {
        return Err(OracleError::TooManyLatches { latches: n });
    }
    if m > MAX_INPUTS {
        return Err(OracleError::TooManyInputs { inputs: m });
    }
    let states = 1usize << n;
    let bad: Vec<bool> = (0..states)
        .map(|s| sys.eval_predicate(Predicate::Bad, &StateVector::from_index(s as u64, n)))
        .collect();

    let mut layers = Vec::with_capacity(k as usize + 1);
    let mut first = Bitset::new(states);
    for s in 0..states {
        if sys.eval_predicate(Predicate::Init, &StateVector::from_index(s as u64, n)) {
            first.insert(s);
        }
    }
    layers.push(first);
    let hit = |layer: &Bitset| layer.iter().find(|&s| bad[s]);

    let mut target = None;
    for i in 0..=k as usize {
        if mode == Mode::UpTo || i == k as usize {
            if let Some(s) = hit(&layers[i]) {
                target = Some((i, s));
                break;
            }
        }
        if i == k as usize {
            break;
        }
        let mut next = Bitset::new(states);
        if !layers[i].is_empty() {
            for s in layers[i].iter() {
                let sv = StateVector::from_index(s as u64, n);
                for x in 0..1usize << m {
                    let t = sys.eval_step(&sv, &input_vector(x, m));
                    next.insert(t.index() as usize);
                }
            }
        }
        layers.push(next);
    }

    let Some((depth, last)) = target else {
        return Ok((false, None));
    };
    // Backward chaining through the layers.
    let mut states_rev = vec![StateVector::from_index(last as u64, n)];
    let mut inputs_rev = Vec::new();
    for layer in layers[..depth].iter().rev() {
        let cur = states_rev.last().unwrap().clone();
        let (pred, x) = layer
            .iter()
            .find_map(|p| {
                let pv = StateVector::from_index(p as u64, n);
                (0..1usize << m)
                    .map(|x| input_vector(x, m))
                    .find(|x| sys.eval_step(&pv, x) == cur)
                    .map(|x| (pv, x))
            })
            .expect("every layer state has a predecessor in the previous layer");
        states_rev.push(pred);
        inputs_rev.push(x);
    }
    states_rev.reverse();
    inputs_rev.reverse();
    Ok((
        true,
        Some(Trace {
            states: states_rev,
            inputs: inputs_rev,
        }),
    ))
}

/// Shape of a random system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub latches: usize,
    pub inputs: usize,
    pub gates: usize,
}

impl Shape {
    /// Draws a shape with `1..=max_latches` latches, `0..=2` inputs and
    /// `4..=30` gates.
    pub fn random(rng: &mut impl Rng, max_latches: usize) -> Shape {
        Shape {
            latches: rng.gen_range(1..=max_latches),
            inputs: rng.gen_range(0..=2),
            gates: rng.gen_range(4..=30),
        }
    }
}

fn maybe_not(rng: &mut impl Rng, s: Signal) -> Signal {
    if rng.gen() {
        !s
    } else {
        s
    }
}

/// Deterministic random system. The bad predicate is a conjunction of up to
/// three latch literals; the remaining gate budget builds the next-state
/// logic over latches, inputs and earlier gates. At most `shape.gates` AND
/// gates are created (constant folding may produce fewer).
pub fn random_system(seed: u64, shape: Shape) -> TransitionSystem {
    assert!((1..=8).contains(&shape.latches), "1..=8 latches");
    assert!(shape.inputs <= 2, "at most 2 inputs");
    assert!(shape.gates <= 30, "at most 30 gates");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = SystemBuilder::new();
    let inputs: Vec<Signal> = (0..shape.inputs).map(|_| b.input()).collect();
    let latches: Vec<Signal> = (0..shape.latches).map(|_| b.latch()).collect();

    let terms = rng.gen_range(1..=shape.latches.min(3));
    let mut picked = latches.clone();
    for i in (1..picked.len()).rev() {
        picked.swap(i, rng.gen_range(0..=i));
    }
    let bad_lits: Vec<Signal> = picked[..terms]
        .iter()
        .map(|&l| maybe_not(&mut rng, l))
        .collect();
    let budget = shape.gates.saturating_sub(terms - 1);
    let mut bad = bad_lits[0];
    for &l in &bad_lits[1..] {
        bad = b.and(bad, l);
    }

    let mut pool: Vec<Signal> = inputs.iter().chain(&latches).copied().collect();
    let base = pool.len();
    for _ in 0..budget {
        let x = pool[rng.gen_range(0..pool.len())];
        let mut y = pool[rng.gen_range(0..pool.len())];
        if y.node() == x.node() && pool.len() > 1 {
            y = pool[(pool.iter().position(|&p| p == x).unwrap() + 1) % pool.len()];
        }
        let x = maybe_not(&mut rng, x);
        let y = maybe_not(&mut rng, y);
        let g = b.and(x, y);
        if !g.is_const() && !pool.contains(&g) && !pool.contains(&!g) {
            pool.push(g);
        }
    }
    for j in 0..shape.latches {
        // Prefer gate outputs so the next-state logic is not trivial.
        let s = if pool.len() > base && rng.gen_bool(0.8) {
            pool[rng.gen_range(base..pool.len())]
        } else {
            pool[rng.gen_range(0..pool.len())]
        };
        b.set_next(j, maybe_not(&mut rng, s));
    }
    b.build(bad).expect("generator output is a valid system")
}

/// `count` systems drawn from consecutive seeds with random shapes.
pub fn random_corpus(seed: u64, count: usize, max_latches: usize) -> Vec<(u64, TransitionSystem)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let s = rng.gen::<u64>();
            let shape = Shape::random(&mut rng, max_latches);
            (s, random_system(s, shape))
        })
        .collect()
}

/// Uniform random 3-CNF (distinct variables within a clause).
pub fn random_3cnf(seed: u64, vars: u32, clauses: usize) -> Cnf {
    assert!(vars >= 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cnf = Cnf::new(vars);
    for _ in 0..clauses {
        let mut c: Vec<Lit> = Vec::with_capacity(3);
        while c.len() < 3 {
            let v = rng.gen_range(1..=vars) as i64;
            if c.iter().all(|l| l.var().index() as i64 != v) {
                c.push(Lit::from_dimacs(if rng.gen() { v } else { -v }));
            }
        }
        cnf.add_clause(c);
    }
    cnf
}

/// A one-latch system whose latch becomes true iff the inputs satisfy
/// `cnf`; bad is the latch. Reachable at bound 1 iff `cnf` is satisfiable.
pub fn cnf_system(cnf: &Cnf) -> TransitionSystem {
    let mut b = SystemBuilder::new();
    let inputs: Vec<Signal> = (0..cnf.num_vars).map(|_| b.input()).collect();
    let latch = b.latch();
    let mut all = Signal::TRUE;
    for clause in &cnf.clauses {
        let mut any = Signal::FALSE;
        for l in clause {
            let s = inputs[l.var().index() as usize - 1];
            let s = if l.is_negated() { !s } else { s };
            any = b.or(any, s);
        }
        all = b.and(all, any);
    }
    b.set_next(0, all);
    b.build(latch).expect("valid system")
}
