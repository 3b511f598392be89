//! Bounded reachability for AIGER transition systems, checked four ways:
//! SAT on the k-fold unrolling, QBF with a single transition copy, QBF by
//! iterative squaring, and a windowed depth-first path search that keeps
//! one transition copy in a SAT solver and slides it along the path.
//!
//! An explicit-state [`oracle`] referees all of them at desk scale.

pub mod harness;
pub mod jsat;
pub mod limits;
pub mod logic;
pub mod oracle;
pub mod qbf;
pub mod satcore;
pub mod tsys;
pub mod unroll;
pub mod verdict;

pub use limits::Limits;
pub use tsys::{parse_aiger, Predicate, Signal, StateVector, Trace, TransitionSystem};
pub use verdict::{BmcResult, Stats, Verdict};
