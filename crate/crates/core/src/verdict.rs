use std::time::Duration;

use crate::tsys::Trace;

/// Answer of an engine for one bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Reachable(Trace),
    UnreachableAtBound,
    ResourceLimit,
}

impl Verdict {
    pub fn is_reachable(&self) -> bool {
        matches!(self, Verdict::Reachable(_))
    }

    /// `Some(reachable?)` unless the engine ran out of resources.
    pub fn decided(&self) -> Option<bool> {
        match self {
            Verdict::Reachable(_) => Some(true),
            Verdict::UnreachableAtBound => Some(false),
            Verdict::ResourceLimit => None,
        }
    }

    pub fn trace(&self) -> Option<&Trace> {
        match self {
            Verdict::Reachable(t) => Some(t),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Reachable(_) => "reachable",
            Verdict::UnreachableAtBound => "unreachable",
            Verdict::ResourceLimit => "resource-limit",
        }
    }
}

/// Engine counters. Fields an engine does not use stay zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub vars: u64,
    pub clauses: u64,
    pub solver_calls: u64,
    pub decisions: u64,
    pub conflicts: u64,
    pub propagations: u64,
    pub window_shifts: u64,
    pub peak_bytes: u64,
}

impl Stats {
    pub(crate) fn absorb(&mut self, s: &crate::satcore::SolverStats) {
        self.solver_calls += s.solves;
        self.decisions += s.decisions;
        self.conflicts += s.conflicts;
        self.propagations += s.propagations;
        self.peak_bytes = self.peak_bytes.max(s.peak_bytes);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BmcResult {
    pub verdict: Verdict,
    pub stats: Stats,
    pub wall_time: Duration,
}
