//! Propositional and quantified formulas in clause form.

mod dimacs;
mod formula;
mod tseitin;
mod varmap;

pub use dimacs::{parse_dimacs, parse_qdimacs, write_dimacs, write_dimacs_with_comment, write_qdimacs, DimacsError};
pub use formula::{eval_matrix, Cnf, Lit, Qbf, QuantBlock, Quantifier, Var};
pub use tseitin::{tseitin, CnfBuilder, Encoded};
pub use varmap::{Activation, Group, Role, StateBlock, VarMap};
