//! A CDCL SAT solver with assumptions.
//!
//! Two watched literals with blockers, first-UIP learning with local
//! minimization, non-chronological backjumping, activity-based branching
//! (ties broken by the lowest variable index), phase saving, Luby restarts
//! (unit 64 conflicts) and activity-based reduction of learned clauses.
//!
//! The solver is incremental: clauses may be added between calls to
//! [`Solver::solve`], and learned clauses survive across calls unless
//! [`Solver::forget_learned`] is used.

use thiserror::Error;

use crate::limits::Budget;
use crate::logic::{Cnf, Lit, Var};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SolverError {
    #[error("literal {lit} refers to undeclared variable (solver has {num_vars})")]
    UndeclaredVariable { lit: i64, num_vars: usize },
}

/// Result of [`Solver::solve`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// Total model, indexed by `var - 1`.
    Sat(Vec<bool>),
    /// Assumptions sufficient for inconsistency (not necessarily minimal).
    Unsat(Vec<Lit>),
    ResourceLimit,
}

impl Outcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, Outcome::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, Outcome::Unsat(_))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub solves: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub conflicts: u64,
    pub restarts: u64,
    pub learned: u64,
    pub original_clauses: u64,
    pub peak_bytes: u64,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub var_decay: f64,
    pub clause_decay: f64,
    pub restart_unit: u64,
    pub phase_saving: bool,
    pub restarts: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            var_decay: 0.95,
            clause_decay: 0.999,
            restart_unit: 64,
            phase_saving: true,
            restarts: true,
        }
    }
}

const UNDEF: u8 = 2;
const NO_REASON: u32 = u32::MAX;
const BUDGET_CHECK_INTERVAL: u64 = 32;

#[derive(Debug, Clone)]
struct Clause {
    lits: Vec<Lit>,
    learnt: bool,
    deleted: bool,
    activity: f64,
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    cref: u32,
    blocker: Lit,
}

/// Max-heap over variable activity; ties go to the lower index.
#[derive(Debug, Default)]
struct VarHeap {
    heap: Vec<u32>,
    pos: Vec<u32>,
}

impl VarHeap {
    const ABSENT: u32 = u32::MAX;

    fn grow(&mut self, n: usize) {
        self.pos.resize(n, Self::ABSENT);
    }

    fn contains(&self, v: usize) -> bool {
        self.pos[v] != Self::ABSENT
    }

    #[inline]
    fn before(act: &[f64], a: u32, b: u32) -> bool {
        let (x, y) = (act[a as usize], act[b as usize]);
        x > y || (x == y && a < b)
    }

    fn push(&mut self, v: usize, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.pos[v] = self.heap.len() as u32;
        self.heap.push(v as u32);
        self.up(self.heap.len() - 1, act);
    }

    fn pop(&mut self, act: &[f64]) -> Option<usize> {
        if self.heap.is_empty() {
            return None;
        }
        let top = self.heap.swap_remove(0);
        self.pos[top as usize] = Self::ABSENT;
        if !self.heap.is_empty() {
            self.pos[self.heap[0] as usize] = 0;
            self.down(0, act);
        }
        Some(top as usize)
    }

    fn bumped(&mut self, v: usize, act: &[f64]) {
        if self.contains(v) {
            self.up(self.pos[v] as usize, act);
        }
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        let x = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            if !Self::before(act, x, self.heap[parent]) {
                break;
            }
            self.heap[i] = self.heap[parent];
            self.pos[self.heap[i] as usize] = i as u32;
            i = parent;
        }
        self.heap[i] = x;
        self.pos[x as usize] = i as u32;
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        let x = self.heap[i];
        loop {
            let l = 2 * i + 1;
            if l >= self.heap.len() {
                break;
            }
            let r = l + 1;
            let child = if r < self.heap.len() && Self::before(act, self.heap[r], self.heap[l]) {
                r
            } else {
                l
            };
            if !Self::before(act, self.heap[child], x) {
                break;
            }
            self.heap[i] = self.heap[child];
            self.pos[self.heap[i] as usize] = i as u32;
            i = child;
        }
        self.heap[i] = x;
        self.pos[x as usize] = i as u32;
    }
}

/// Luby sequence 1 1 2 1 1 2 4 1 1 2 ... (0-based index).
pub fn luby(mut i: u64) -> u64 {
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < i + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != i {
        size = (size - 1) >> 1;
        seq -= 1;
        i %= size;
    }
    1 << seq
}

#[derive(Debug)]
pub struct Solver {
    config: SolverConfig,
    budget: Budget,
    ok: bool,

    clauses: Vec<Clause>,
    learnts: Vec<u32>,
    free_slots: usize,
    watches: Vec<Vec<Watcher>>,

    assigns: Vec<u8>,
    level: Vec<u32>,
    reason: Vec<u32>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,

    activity: Vec<f64>,
    var_inc: f64,
    cla_inc: f64,
    heap: VarHeap,
    polarity: Vec<bool>,
    seen: Vec<bool>,

    assumptions: Vec<Lit>,
    max_learnts: f64,
    simp_trail: usize,
    lit_bytes: u64,
    stats: SolverStats,
}

impl Default for Solver {
    fn default() -> Self {
        Solver::new()
    }
}

enum Search {
    Sat,
    Unsat(Vec<Lit>),
    Restart,
    Budget,
}

impl Solver {
    pub fn new() -> Solver {
        Solver::with_config(SolverConfig::default())
    }

    pub fn with_config(config: SolverConfig) -> Solver {
        Solver {
            config,
            budget: Budget::unlimited(),
            ok: true,
            clauses: Vec::new(),
            learnts: Vec::new(),
            free_slots: 0,
            watches: Vec::new(),
            assigns: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: Vec::new(),
            var_inc: 1.0,
            cla_inc: 1.0,
            heap: VarHeap::default(),
            polarity: Vec::new(),
            seen: Vec::new(),
            assumptions: Vec::new(),
            max_learnts: 0.0,
            simp_trail: 0,
            lit_bytes: 0,
            stats: SolverStats::default(),
        }
    }

    /// Loads every clause of `cnf`, declaring its variables first.
    pub fn from_cnf(cnf: &Cnf) -> Solver {
        let mut s = Solver::new();
        s.load(cnf);
        s
    }

    pub fn load(&mut self, cnf: &Cnf) {
        self.ensure_vars(cnf.num_vars as usize);
        for c in &cnf.clauses {
            self.add_clause(c).expect("clause within declared variables");
        }
    }

    pub fn set_budget(&mut self, budget: Budget) {
        self.budget = budget;
    }

    pub fn num_vars(&self) -> usize {
        self.assigns.len()
    }

    pub fn new_var(&mut self) -> Var {
        let v = self.assigns.len();
        self.assigns.push(UNDEF);
        self.level.push(0);
        self.reason.push(NO_REASON);
        self.activity.push(0.0);
        self.polarity.push(false);
        self.seen.push(false);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.heap.grow(v + 1);
        self.heap.push(v, &self.activity);
        Var::new(v as u32 + 1)
    }

    pub fn ensure_vars(&mut self, n: usize) {
        while self.num_vars() < n {
            self.new_var();
        }
    }

    /// False once the clause database is known to be unsatisfiable.
    pub fn is_ok(&self) -> bool {
        self.ok
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    /// Live clauses, original and learned.
    pub fn num_clauses(&self) -> usize {
        self.clauses.len() - self.free_slots
    }

    pub fn num_learned(&self) -> usize {
        self.learnts.len()
    }

    /// Approximate bytes held by the clause database and watch lists.
    pub fn mem_bytes(&self) -> u64 {
        let per_var = 2 * std::mem::size_of::<Vec<Watcher>>() + 40;
        self.lit_bytes
            + self.clauses.len() as u64 * std::mem::size_of::<Clause>() as u64
            + self.num_vars() as u64 * per_var as u64
            + 2 * self.lit_bytes
    }

    #[inline]
    fn value_lit(&self, l: Lit) -> u8 {
        let a = self.assigns[l.var().index() as usize - 1];
        if a == UNDEF {
            UNDEF
        } else {
            a ^ l.is_negated() as u8
        }
    }

    #[inline]
    fn vidx(l: Lit) -> usize {
        l.var().index() as usize - 1
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    fn check_lits(&self, lits: &[Lit]) -> Result<(), SolverError> {
        for &l in lits {
            if l.var().index() as usize > self.num_vars() {
                return Err(SolverError::UndeclaredVariable {
                    lit: l.to_dimacs(),
                    num_vars: self.num_vars(),
                });
            }
        }
        Ok(())
    }

    /// Adds a clause. Returns `Ok(false)` when the database has become
    /// unsatisfiable (the solver then answers UNSAT forever).
    pub fn add_clause(&mut self, lits: &[Lit]) -> Result<bool, SolverError> {
        self.check_lits(lits)?;
        self.stats.original_clauses += 1;
        if !self.ok {
            return Ok(false);
        }
        debug_assert_eq!(self.decision_level(), 0);
        let mut c: Vec<Lit> = lits.to_vec();
        c.sort_unstable();
        c.dedup();
        let mut out = Vec::with_capacity(c.len());
        for (i, &l) in c.iter().enumerate() {
            if i + 1 < c.len() && c[i + 1] == !l {
                return Ok(true);
            }
            match self.value_lit(l) {
                1 => return Ok(true),
                0 => {}
                _ => out.push(l),
            }
        }
        match out.len() {
            0 => {
                self.ok = false;
            }
            1 => {
                self.enqueue(out[0], NO_REASON);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                self.attach(out, false);
            }
        }
        Ok(self.ok)
    }

    fn attach(&mut self, lits: Vec<Lit>, learnt: bool) -> u32 {
        debug_assert!(lits.len() >= 2);
        self.lit_bytes += 4 * lits.len() as u64;
        let clause = Clause {
            lits,
            learnt,
            deleted: false,
            activity: 0.0,
        };
        let cref = self.clauses.len() as u32;
        self.watches[(!clause.lits[0]).code()].push(Watcher {
            cref,
            blocker: clause.lits[1],
        });
        self.watches[(!clause.lits[1]).code()].push(Watcher {
            cref,
            blocker: clause.lits[0],
        });
        self.clauses.push(clause);
        if learnt {
            self.learnts.push(cref);
            self.stats.learned += 1;
        }
        cref
    }

    fn delete(&mut self, cref: u32) {
        let c = &mut self.clauses[cref as usize];
        if !c.deleted {
            c.deleted = true;
            self.lit_bytes -= 4 * c.lits.len() as u64;
            c.lits = Vec::new();
            self.free_slots += 1;
        }
    }

    fn enqueue(&mut self, l: Lit, reason: u32) {
        let v = Self::vidx(l);
        debug_assert_eq!(self.assigns[v], UNDEF);
        self.assigns[v] = !l.is_negated() as u8;
        self.level[v] = self.decision_level() as u32;
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Unit propagation. Returns a conflicting clause, if any.
    fn propagate(&mut self) -> Option<u32> {
        let mut conflict = None;
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[p.code()]);
            let mut i = 0;
            let mut j = 0;
            'watchers: while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.clauses[w.cref as usize].deleted {
                    continue;
                }
                if self.value_lit(w.blocker) == 1 {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let clause = &mut self.clauses[w.cref as usize].lits;
                if clause[0] == false_lit {
                    clause.swap(0, 1);
                }
                let first = clause[0];
                let nw = Watcher {
                    cref: w.cref,
                    blocker: first,
                };
                if first != w.blocker && self.value_lit(first) == 1 {
                    ws[j] = nw;
                    j += 1;
                    continue;
                }
                let clause = &mut self.clauses[w.cref as usize].lits;
                for k in 2..clause.len() {
                    let l = clause[k];
                    let val = {
                        let a = self.assigns[Self::vidx(l)];
                        if a == UNDEF {
                            UNDEF
                        } else {
                            a ^ l.is_negated() as u8
                        }
                    };
                    if val != 0 {
                        clause.swap(1, k);
                        let new_watch = !clause[1];
                        self.watches[new_watch.code()].push(nw);
                        continue 'watchers;
                    }
                }
                ws[j] = nw;
                j += 1;
                if self.value_lit(first) == 0 {
                    conflict = Some(w.cref);
                    self.qhead = self.trail.len();
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, w.cref);
                }
            }
            ws.truncate(j);
            let slot = &mut self.watches[p.code()];
            // Watchers added to this list during the loop are kept.
            ws.append(slot);
            *slot = ws;
            if conflict.is_some() {
                break;
            }
        }
        conflict
    }

    fn cancel_until(&mut self, level: usize) {
        if self.decision_level() <= level {
            return;
        }
        let lim = self.trail_lim[level];
        for idx in (lim..self.trail.len()).rev() {
            let l = self.trail[idx];
            let v = Self::vidx(l);
            self.assigns[v] = UNDEF;
            self.reason[v] = NO_REASON;
            if self.config.phase_saving {
                self.polarity[v] = !l.is_negated();
            }
            self.heap.push(v, &self.activity);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(level);
        self.qhead = lim;
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.bumped(v, &self.activity);
    }

    fn bump_clause(&mut self, cref: u32) {
        let c = &mut self.clauses[cref as usize];
        if !c.learnt {
            return;
        }
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for &l in &self.learnts {
                self.clauses[l as usize].activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP conflict analysis. Returns the learned clause (asserting
    /// literal first, a literal of the backjump level second) and the
    /// backjump level.
    fn analyze(&mut self, mut confl: u32) -> (Vec<Lit>, usize) {
        let mut learnt: Vec<Lit> = vec![Lit::from_code(0)];
        let mut path = 0usize;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();
        let current = self.decision_level() as u32;
        loop {
            self.bump_clause(confl);
            let lits = self.clauses[confl as usize].lits.clone();
            let start = if p.is_some() { 1 } else { 0 };
            for &q in &lits[start..] {
                let v = Self::vidx(q);
                if !self.seen[v] && self.level[v] > 0 {
                    self.bump_var(v);
                    self.seen[v] = true;
                    if self.level[v] >= current {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[Self::vidx(self.trail[idx])] {
                    break;
                }
            }
            let lit = self.trail[idx];
            let v = Self::vidx(lit);
            self.seen[v] = false;
            path -= 1;
            p = Some(lit);
            if path == 0 {
                break;
            }
            confl = self.reason[v];
            debug_assert_ne!(confl, NO_REASON);
        }
        learnt[0] = !p.unwrap();

        // Local minimization: drop literals implied by other learned literals.
        let keep: Vec<bool> = learnt
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                if i == 0 {
                    return true;
                }
                let r = self.reason[Self::vidx(l)];
                if r == NO_REASON {
                    return true;
                }
                self.clauses[r as usize].lits[1..].iter().any(|&q| {
                    let v = Self::vidx(q);
                    !self.seen[v] && self.level[v] > 0
                })
            })
            .collect();
        for &l in &learnt[1..] {
            self.seen[Self::vidx(l)] = false;
        }
        let mut out: Vec<Lit> = learnt
            .into_iter()
            .zip(keep)
            .filter_map(|(l, k)| k.then_some(l))
            .collect();

        let bt = if out.len() == 1 {
            0
        } else {
            let (max_i, _) = out
                .iter()
                .enumerate()
                .skip(1)
                .max_by_key(|(i, l)| (self.level[Self::vidx(**l)], std::cmp::Reverse(*i)))
                .unwrap();
            out.swap(1, max_i);
            self.level[Self::vidx(out[1])] as usize
        };
        (out, bt)
    }

    /// Assumptions responsible for `p` (an assumption) being false.
    fn analyze_final(&mut self, p: Lit) -> Vec<Lit> {
        let mut core = vec![p];
        if self.decision_level() == 0 {
            return core;
        }
        self.seen[Self::vidx(p)] = true;
        for idx in (self.trail_lim[0]..self.trail.len()).rev() {
            let l = self.trail[idx];
            let v = Self::vidx(l);
            if !self.seen[v] {
                continue;
            }
            let r = self.reason[v];
            if r == NO_REASON {
                core.push(l);
            } else {
                for &q in &self.clauses[r as usize].lits[1..] {
                    let qv = Self::vidx(q);
                    if self.level[qv] > 0 {
                        self.seen[qv] = true;
                    }
                }
            }
            self.seen[v] = false;
        }
        self.seen[Self::vidx(p)] = false;
        core
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.heap.pop(&self.activity) {
            if self.assigns[v] == UNDEF {
                self.stats.decisions += 1;
                return Some(Lit::with_value(Var::new(v as u32 + 1), self.polarity[v]));
            }
        }
        None
    }

    fn reduce_db(&mut self) {
        let mut cands: Vec<u32> = self.learnts.clone();
        cands.sort_by(|&a, &b| {
            let (ca, cb) = (&self.clauses[a as usize], &self.clauses[b as usize]);
            ca.activity
                .partial_cmp(&cb.activity)
                .unwrap()
                .then(a.cmp(&b))
        });
        let half = cands.len() / 2;
        let mut removed = 0;
        for &cref in &cands {
            if removed >= half {
                break;
            }
            let c = &self.clauses[cref as usize];
            if c.lits.len() <= 2 || self.is_locked(cref) {
                continue;
            }
            self.delete(cref);
            removed += 1;
        }
        let clauses = &self.clauses;
        self.learnts.retain(|&c| !clauses[c as usize].deleted);
    }

    fn is_locked(&self, cref: u32) -> bool {
        let c = &self.clauses[cref as usize];
        let first = c.lits[0];
        self.value_lit(first) == 1 && self.reason[Self::vidx(first)] == cref
    }

    /// Removes clauses satisfied at level 0 and compacts the database when
    /// enough slots are free.
    fn simplify(&mut self) {
        debug_assert_eq!(self.decision_level(), 0);
        if self.trail.len() == self.simp_trail && self.free_slots * 2 <= self.clauses.len() {
            return;
        }
        if self.trail.len() != self.simp_trail {
            for cref in 0..self.clauses.len() as u32 {
                let c = &self.clauses[cref as usize];
                if !c.deleted && c.lits.iter().any(|&l| self.value_lit(l) == 1) {
                    self.delete(cref);
                }
            }
            let clauses = &self.clauses;
            self.learnts.retain(|&c| !clauses[c as usize].deleted);
            self.simp_trail = self.trail.len();
        }
        if self.free_slots * 2 > self.clauses.len() {
            self.compact();
        }
    }

    fn compact(&mut self) {
        for r in &mut self.reason {
            *r = NO_REASON;
        }
        let old = std::mem::take(&mut self.clauses);
        self.learnts.clear();
        for w in &mut self.watches {
            w.clear();
        }
        self.free_slots = 0;
        self.lit_bytes = 0;
        let learned_before = self.stats.learned;
        for c in old.into_iter().filter(|c| !c.deleted) {
            let activity = c.activity;
            let cref = self.attach(c.lits, c.learnt);
            self.clauses[cref as usize].activity = activity;
        }
        self.stats.learned = learned_before;
    }

    fn over_budget(&mut self) -> bool {
        let used = self.mem_bytes();
        self.stats.peak_bytes = self.stats.peak_bytes.max(used);
        self.budget.timed_out() || self.budget.over_memory(used)
    }

    fn search(&mut self, conflict_limit: u64) -> Search {
        let mut conflicts = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.stats.conflicts += 1;
                conflicts += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Search::Unsat(Vec::new());
                }
                let (learnt, bt) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], NO_REASON);
                } else {
                    let asserting = learnt[0];
                    let cref = self.attach(learnt, true);
                    self.bump_clause(cref);
                    self.enqueue(asserting, cref);
                }
                self.var_inc /= self.config.var_decay;
                self.cla_inc /= self.config.clause_decay;
                if self.stats.conflicts.is_multiple_of(BUDGET_CHECK_INTERVAL) && self.over_budget() {
                    return Search::Budget;
                }
                continue;
            }

            if self.config.restarts && conflicts >= conflict_limit {
                self.cancel_until(0);
                return Search::Restart;
            }
            if self.learnts.len() as f64 - self.trail.len() as f64 >= self.max_learnts {
                self.reduce_db();
            }

            let mut next = None;
            while self.decision_level() < self.assumptions.len() {
                let p = self.assumptions[self.decision_level()];
                match self.value_lit(p) {
                    1 => self.trail_lim.push(self.trail.len()),
                    0 => {
                        let core = self.analyze_final(p);
                        return Search::Unsat(core);
                    }
                    _ => {
                        next = Some(p);
                        break;
                    }
                }
            }
            let next = match next {
                Some(p) => p,
                None => match self.pick_branch() {
                    Some(p) => p,
                    None => return Search::Sat,
                },
            };
            if self.stats.decisions.is_multiple_of(64 * BUDGET_CHECK_INTERVAL) && self.budget.timed_out()
            {
                return Search::Budget;
            }
            self.trail_lim.push(self.trail.len());
            self.enqueue(next, NO_REASON);
        }
    }

    /// Decides the clause database under `assumptions`.
    pub fn solve(&mut self, assumptions: &[Lit]) -> Outcome {
        self.check_lits(assumptions)
            .expect("assumption over undeclared variable");
        self.stats.solves += 1;
        if !self.ok {
            return Outcome::Unsat(Vec::new());
        }
        if self.over_budget() {
            return Outcome::ResourceLimit;
        }
        self.simplify();
        self.assumptions = assumptions.to_vec();
        if self.max_learnts == 0.0 {
            self.max_learnts = (self.num_clauses() as f64 / 3.0).max(2000.0);
        }
        let mut round = 0u64;
        let outcome = loop {
            let limit = luby(round) * self.config.restart_unit;
            match self.search(limit) {
                Search::Sat => {
                    let model = self.assigns.iter().map(|&a| a == 1).collect();
                    break Outcome::Sat(model);
                }
                Search::Unsat(core) => break Outcome::Unsat(core),
                Search::Budget => break Outcome::ResourceLimit,
                Search::Restart => {
                    self.stats.restarts += 1;
                    self.max_learnts *= 1.05;
                    round += 1;
                }
            }
        };
        self.cancel_until(0);
        self.assumptions.clear();
        let used = self.mem_bytes();
        self.stats.peak_bytes = self.stats.peak_bytes.max(used);
        outcome
    }

    /// Drops every learned clause.
    pub fn forget_learned(&mut self) {
        debug_assert_eq!(self.decision_level(), 0);
        for cref in std::mem::take(&mut self.learnts) {
            self.delete(cref);
        }
    }

    pub fn learned_clauses(&self) -> Vec<Vec<Lit>> {
        self.learnts
            .iter()
            .map(|&c| self.clauses[c as usize].lits.clone())
            .collect()
    }

    /// The current database as a CNF: level-0 units, then live clauses.
    pub fn to_cnf(&self, include_learned: bool) -> Cnf {
        let mut cnf = Cnf::new(self.num_vars() as u32);
        if !self.ok {
            cnf.clauses.push(Vec::new());
            return cnf;
        }
        let level0 = self.trail_lim.first().copied().unwrap_or(self.trail.len());
        for &l in &self.trail[..level0] {
            cnf.clauses.push(vec![l]);
        }
        for c in &self.clauses {
            if !c.deleted && (include_learned || !c.learnt) {
                cnf.clauses.push(c.lits.clone());
            }
        }
        cnf
    }
}
