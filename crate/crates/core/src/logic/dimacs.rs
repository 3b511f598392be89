//! DIMACS and QDIMACS text formats.
//!
//! Writers emit LF newlines and single spaces, nothing else. Readers accept
//! comment lines anywhere before the clauses and clauses spanning lines.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Cnf, Lit, Qbf, QuantBlock, Quantifier, Var};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DimacsError {
    #[error("missing 'p cnf' header")]
    MissingHeader,
    #[error("line {line}: malformed header")]
    BadHeader { line: usize },
    #[error("line {line}: invalid token {token:?}")]
    BadToken { line: usize, token: String },
    #[error("line {line}: variable {var} exceeds the declared {max}")]
    VarOutOfRange { line: usize, var: u64, max: u32 },
    #[error("header declares {expected} clauses, found {found}")]
    ClauseCount { expected: usize, found: usize },
    #[error("last clause is not terminated by 0")]
    Unterminated,
    #[error("line {line}: quantifier line after the first clause")]
    MisplacedQuantifier { line: usize },
}

pub fn write_dimacs(cnf: &Cnf) -> String {
    let mut out = format!("p cnf {} {}\n", cnf.num_vars, cnf.clauses.len());
    write_clauses(&mut out, cnf);
    out
}

/// Like [`write_dimacs`] with leading `c` lines, one per line of `comment`.
pub fn write_dimacs_with_comment(cnf: &Cnf, comment: &str) -> String {
    let mut out = String::new();
    for line in comment.lines() {
        out.push_str("c ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(&write_dimacs(cnf));
    out
}

/// Writes the closed, normalized form of `qbf`: free variables are bound
/// in an outermost existential block and neighbouring blocks with the same
/// quantifier are merged.
pub fn write_qdimacs(qbf: &Qbf) -> String {
    let q = qbf.closed();
    let mut out = format!(
        "p cnf {} {}\n",
        q.matrix.num_vars,
        q.matrix.clauses.len()
    );
    for block in &q.prefix {
        out.push(match block.quantifier {
            Quantifier::Exists => 'e',
            Quantifier::Forall => 'a',
        });
        for v in &block.vars {
            write!(out, " {}", v.index()).unwrap();
        }
        out.push_str(" 0\n");
    }
    write_clauses(&mut out, &q.matrix);
    out
}

fn write_clauses(out: &mut String, cnf: &Cnf) {
    for clause in &cnf.clauses {
        for lit in clause {
            write!(out, "{lit} ").unwrap();
        }
        out.push_str("0\n");
    }
}

pub fn parse_dimacs(text: &str) -> Result<Cnf, DimacsError> {
    let q = parse_qdimacs(text)?;
    Ok(q.matrix)
}

pub fn parse_qdimacs(text: &str) -> Result<Qbf, DimacsError> {
    let mut header: Option<(u32, usize)> = None;
    let mut prefix = Vec::new();
    let mut clauses = Vec::new();
    let mut current: Vec<Lit> = Vec::new();
    let mut open = false;

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        let mut toks = trimmed.split_whitespace();
        let first = toks.next().unwrap();
        if first == "p" {
            if header.is_some() {
                return Err(DimacsError::BadHeader { line: line_no });
            }
            let rest: Vec<&str> = toks.collect();
            match rest.as_slice() {
                ["cnf", v, c] => {
                    let v = v.parse().map_err(|_| DimacsError::BadHeader { line: line_no })?;
                    let c = c.parse().map_err(|_| DimacsError::BadHeader { line: line_no })?;
                    header = Some((v, c));
                }
                _ => return Err(DimacsError::BadHeader { line: line_no }),
            }
            continue;
        }
        let (num_vars, _) = header.ok_or(DimacsError::MissingHeader)?;
        let range_check = |x: i64| -> Result<(), DimacsError> {
            if x.unsigned_abs() > num_vars as u64 {
                return Err(DimacsError::VarOutOfRange {
                    line: line_no,
                    var: x.unsigned_abs(),
                    max: num_vars,
                });
            }
            Ok(())
        };
        let bad_token = |t: &str| DimacsError::BadToken {
            line: line_no,
            token: t.to_string(),
        };
        if first == "e" || first == "a" {
            if !clauses.is_empty() || open {
                return Err(DimacsError::MisplacedQuantifier { line: line_no });
            }
            let quantifier = if first == "e" {
                Quantifier::Exists
            } else {
                Quantifier::Forall
            };
            let mut vars = Vec::new();
            let mut terminated = false;
            for t in toks {
                if terminated {
                    return Err(bad_token(t));
                }
                let x: i64 = t.parse().map_err(|_| bad_token(t))?;
                if x == 0 {
                    terminated = true;
                } else if x < 0 {
                    return Err(bad_token(t));
                } else {
                    range_check(x)?;
                    vars.push(Var::new(x as u32));
                }
            }
            if !terminated {
                return Err(DimacsError::Unterminated);
            }
            prefix.push(QuantBlock { quantifier, vars });
            continue;
        }
        for t in std::iter::once(first).chain(toks) {
            let x: i64 = t.parse().map_err(|_| bad_token(t))?;
            if x == 0 {
                clauses.push(std::mem::take(&mut current));
                open = false;
            } else {
                range_check(x)?;
                current.push(Lit::from_dimacs(x));
                open = true;
            }
        }
    }
    let (num_vars, expected) = header.ok_or(DimacsError::MissingHeader)?;
    if open {
        return Err(DimacsError::Unterminated);
    }
    if clauses.len() != expected {
        return Err(DimacsError::ClauseCount {
            expected,
            found: clauses.len(),
        });
    }
    Ok(Qbf {
        prefix,
        matrix: Cnf { num_vars, clauses },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: u32) -> Var {
        Var::new(i)
    }

    #[test]
    fn dimacs_golden() {
        assert_eq!(
            write_dimacs(&Cnf::from_dimacs(2, &[&[1, -2]])),
            "p cnf 2 1\n1 -2 0\n"
        );
        assert_eq!(write_dimacs(&Cnf::new(1)), "p cnf 1 0\n");
        assert_eq!(
            write_dimacs(&Cnf::from_dimacs(3, &[&[1], &[-1]])),
            "p cnf 3 2\n1 0\n-1 0\n"
        );
        assert_eq!(
            write_dimacs_with_comment(&Cnf::from_dimacs(1, &[&[1]]), "engine unroll\nbound 3"),
            "c engine unroll\nc bound 3\np cnf 1 1\n1 0\n"
        );
    }

    #[test]
    fn qdimacs_golden() {
        let q = Qbf {
            prefix: vec![
                QuantBlock {
                    quantifier: Quantifier::Exists,
                    vars: vec![v(1)],
                },
                QuantBlock {
                    quantifier: Quantifier::Forall,
                    vars: vec![v(2)],
                },
                QuantBlock {
                    quantifier: Quantifier::Exists,
                    vars: vec![v(3)],
                },
            ],
            matrix: Cnf::from_dimacs(3, &[&[1, 2, 3]]),
        };
        assert_eq!(
            write_qdimacs(&q),
            "p cnf 3 1\ne 1 0\na 2 0\ne 3 0\n1 2 3 0\n"
        );
        let free = Qbf {
            prefix: vec![],
            matrix: Cnf::from_dimacs(1, &[&[1]]),
        };
        assert_eq!(write_qdimacs(&free), "p cnf 1 1\ne 1 0\n1 0\n");
    }

    #[test]
    fn qdimacs_merges_adjacent_blocks() {
        let q = Qbf {
            prefix: vec![
                QuantBlock {
                    quantifier: Quantifier::Forall,
                    vars: vec![v(1)],
                },
                QuantBlock {
                    quantifier: Quantifier::Forall,
                    vars: vec![v(2)],
                },
                QuantBlock {
                    quantifier: Quantifier::Exists,
                    vars: vec![v(3)],
                },
            ],
            matrix: Cnf::from_dimacs(3, &[&[1, 2, 3]]),
        };
        assert_eq!(write_qdimacs(&q), "p cnf 3 1\na 1 2 0\ne 3 0\n1 2 3 0\n");
    }

    #[test]
    fn parse_accepts_comments_and_split_clauses() {
        let cnf = parse_dimacs("c hello\np cnf 3 2\n1 -2\n 3 0 -1 0\n").unwrap();
        assert_eq!(cnf, Cnf::from_dimacs(3, &[&[1, -2, 3], &[-1]]));
    }

    #[test]
    fn parse_errors() {
        assert_eq!(parse_dimacs("1 0\n"), Err(DimacsError::MissingHeader));
        assert_eq!(
            parse_dimacs("p cnf 1 1\n2 0\n"),
            Err(DimacsError::VarOutOfRange {
                line: 2,
                var: 2,
                max: 1
            })
        );
        assert_eq!(
            parse_dimacs("p cnf 1 2\n1 0\n"),
            Err(DimacsError::ClauseCount {
                expected: 2,
                found: 1
            })
        );
        assert_eq!(parse_dimacs("p cnf 1 1\n1\n"), Err(DimacsError::Unterminated));
        assert!(matches!(
            parse_dimacs("p cnf 1 1\nx 0\n"),
            Err(DimacsError::BadToken { line: 2, .. })
        ));
        assert_eq!(
            parse_qdimacs("p cnf 2 1\n1 0\ne 2 0\n"),
            Err(DimacsError::MisplacedQuantifier { line: 3 })
        );
    }
}
