use std::collections::HashSet;
use std::fmt;

/// A propositional variable, numbered from 1 as in DIMACS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(u32);

impl Var {
    pub fn new(index: u32) -> Var {
        assert!(index >= 1, "variables are numbered from 1");
        Var(index)
    }

    pub fn index(self) -> u32 {
        self.0
    }

    pub fn pos(self) -> Lit {
        Lit::new(self, false)
    }

    pub fn neg(self) -> Lit {
        Lit::new(self, true)
    }
}

/// A variable with a sign. Packed as `var << 1 | negated`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: Var, negated: bool) -> Lit {
        Lit((var.0 << 1) | negated as u32)
    }

    /// From a nonzero DIMACS integer.
    pub fn from_dimacs(x: i64) -> Lit {
        assert!(x != 0);
        Lit::new(Var::new(x.unsigned_abs() as u32), x < 0)
    }

    pub fn to_dimacs(self) -> i64 {
        let v = self.var().0 as i64;
        if self.is_negated() {
            -v
        } else {
            v
        }
    }

    #[inline]
    pub fn var(self) -> Var {
        Var(self.0 >> 1)
    }

    #[inline]
    pub fn is_negated(self) -> bool {
        self.0 & 1 == 1
    }

    /// Dense code, usable as an index: `2 * (var - 1) + negated`.
    #[inline]
    pub fn code(self) -> usize {
        self.0 as usize - 2
    }

    #[inline]
    pub fn from_code(code: usize) -> Lit {
        Lit(code as u32 + 2)
    }

    /// The literal that is true when `value` is assigned to its variable.
    pub fn with_value(var: Var, value: bool) -> Lit {
        Lit::new(var, !value)
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    #[inline]
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Cnf {
    pub num_vars: u32,
    pub clauses: Vec<Vec<Lit>>,
}

impl Cnf {
    pub fn new(num_vars: u32) -> Cnf {
        Cnf {
            num_vars,
            clauses: Vec::new(),
        }
    }

    /// Shorthand for tests and examples: clauses as DIMACS integers.
    pub fn from_dimacs(num_vars: u32, clauses: &[&[i64]]) -> Cnf {
        Cnf {
            num_vars,
            clauses: clauses
                .iter()
                .map(|c| c.iter().map(|&x| Lit::from_dimacs(x)).collect())
                .collect(),
        }
    }

    pub fn add_clause(&mut self, clause: Vec<Lit>) {
        debug_assert!(clause.iter().all(|l| l.var().0 <= self.num_vars));
        self.clauses.push(clause);
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn num_literals(&self) -> usize {
        self.clauses.iter().map(Vec::len).sum()
    }
}

/// True iff every clause has a literal satisfied by `assignment`, which is
/// indexed by `var - 1`.
pub fn eval_matrix(cnf: &Cnf, assignment: &[bool]) -> bool {
    assert!(assignment.len() >= cnf.num_vars as usize, "assignment must be total");
    cnf.clauses.iter().all(|c| {
        c.iter()
            .any(|l| assignment[l.var().0 as usize - 1] != l.is_negated())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantifier {
    Exists,
    Forall,
}

impl Quantifier {
    pub fn dual(self) -> Quantifier {
        match self {
            Quantifier::Exists => Quantifier::Forall,
            Quantifier::Forall => Quantifier::Exists,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantBlock {
    pub quantifier: Quantifier,
    pub vars: Vec<Var>,
}

/// A prenex QBF with a CNF matrix. Matrix variables missing from the prefix
/// are existential and outermost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Qbf {
    pub prefix: Vec<QuantBlock>,
    pub matrix: Cnf,
}

impl Qbf {
    /// Drops empty blocks and merges neighbours with the same quantifier.
    pub fn normalized(&self) -> Qbf {
        let mut prefix: Vec<QuantBlock> = Vec::new();
        for block in &self.prefix {
            if block.vars.is_empty() {
                continue;
            }
            match prefix.last_mut() {
                Some(last) if last.quantifier == block.quantifier => {
                    last.vars.extend_from_slice(&block.vars)
                }
                _ => prefix.push(block.clone()),
            }
        }
        Qbf {
            prefix,
            matrix: self.matrix.clone(),
        }
    }

    /// Normalizes and binds every free variable `1..=num_vars` in an
    /// outermost existential block.
    pub fn closed(&self) -> Qbf {
        let bound: HashSet<Var> = self
            .prefix
            .iter()
            .flat_map(|b| b.vars.iter().copied())
            .collect();
        let free: Vec<Var> = (1..=self.matrix.num_vars)
            .map(Var)
            .filter(|v| !bound.contains(v))
            .collect();
        let mut prefix = vec![QuantBlock {
            quantifier: Quantifier::Exists,
            vars: free,
        }];
        prefix.extend(self.prefix.iter().cloned());
        Qbf {
            prefix,
            matrix: self.matrix.clone(),
        }
        .normalized()
    }

    pub fn num_universals(&self) -> usize {
        self.prefix
            .iter()
            .filter(|b| b.quantifier == Quantifier::Forall)
            .map(|b| b.vars.len())
            .sum()
    }

    /// Number of universal blocks after normalization.
    pub fn universal_blocks(&self) -> usize {
        self.normalized()
            .prefix
            .iter()
            .filter(|b| b.quantifier == Quantifier::Forall)
            .count()
    }

    /// Checks that prefix variables are in range and pairwise disjoint.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = HashSet::new();
        for v in self.prefix.iter().flat_map(|b| &b.vars) {
            if v.0 == 0 || v.0 > self.matrix.num_vars {
                return Err(format!("prefix variable {} out of range", v.0));
            }
            if !seen.insert(*v) {
                return Err(format!("variable {} quantified twice", v.0));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lit_codes() {
        let l = Lit::from_dimacs(-3);
        assert_eq!(l.var().index(), 3);
        assert!(l.is_negated());
        assert_eq!(l.to_dimacs(), -3);
        assert_eq!(Lit::from_code(l.code()), l);
        assert_eq!((!l).to_dimacs(), 3);
        assert_eq!(Lit::from_dimacs(1).code(), 0);
    }

    #[test]
    fn matrix_evaluation() {
        let c = Cnf::from_dimacs(2, &[&[1, -2]]);
        assert!(eval_matrix(&c, &[false, false]));
        let c = Cnf::from_dimacs(1, &[&[1]]);
        assert!(!eval_matrix(&c, &[false]));
        assert!(eval_matrix(&Cnf::new(3), &[false, true, false]));
    }

    #[test]
    fn normalization_merges_and_closes() {
        let v = |i| Var::new(i);
        let q = Qbf {
            prefix: vec![
                QuantBlock {
                    quantifier: Quantifier::Forall,
                    vars: vec![v(2)],
                },
                QuantBlock {
                    quantifier: Quantifier::Exists,
                    vars: vec![],
                },
                QuantBlock {
                    quantifier: Quantifier::Forall,
                    vars: vec![v(3)],
                },
            ],
            matrix: Cnf::from_dimacs(3, &[&[1, 2, 3]]),
        };
        let n = q.closed();
        assert_eq!(n.prefix.len(), 2);
        assert_eq!(n.prefix[0].vars, vec![v(1)]);
        assert_eq!(n.prefix[1].vars, vec![v(2), v(3)]);
        assert_eq!(q.universal_blocks(), 1);
        assert_eq!(q.num_universals(), 2);
    }
}
