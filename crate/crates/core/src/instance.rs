//! Instance files: a JSON document format and an extended DIMACS reader.
//!
//! JSON:
//! ```json
//! {"variables": [{"name": "x", "domain": ["false", "true"]}, ...],
//!  "constraints": [
//!    {"type": "robust_sat", "vars": ["x", "y"], "negated": [false, true], "delta": 0.5},
//!    {"type": "robust_coloring", "vars": ["a", "b", "c"], "delta": 0.1},
//!    {"type": "table", "vars": ["a", "b"], "forbidden": [["red", "red"], [1, 2]]}]}
//! ```
//! `negated` defaults to all false and a missing `delta` gives an ordinary
//! clause. Robust-SAT literals may also be written as
//! `"literals": [{"var": "x", "negated": true}, ...]`. Table rows use value
//! labels or value indices.
//!
//! DIMACS: `p cnf <n> <m>` or `p rsat <n> <m> <delta>`, then clauses of signed
//! 1-based literals each terminated by `0`. Variables are named `1..=n`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::constraint::{Constraint, ConstraintKind, RobustColoring, RobustSat, Table};
use crate::error::{Error, Result};
use crate::formula::{CspFormula, Variable};

/// Largest variable count accepted from a DIMACS header.
pub const MAX_DIMACS_VARS: usize = 1 << 21;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Doc {
    variables: Vec<VarDoc>,
    #[serde(default)]
    constraints: Vec<ConDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VarDoc {
    name: String,
    domain: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LiteralDoc {
    var: String,
    #[serde(default)]
    negated: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ConDoc {
    RobustSat {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vars: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        negated: Option<Vec<bool>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        literals: Option<Vec<LiteralDoc>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
    },
    RobustColoring {
        vars: Vec<String>,
        delta: f64,
    },
    Table {
        vars: Vec<String>,
        forbidden: Vec<Vec<ValueRef>>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ValueRef {
    Index(u32),
    Label(String),
}

struct Names<'a> {
    index: HashMap<&'a str, usize>,
    vars: &'a [Variable],
}

impl Names<'_> {
    fn scope(&self, names: &[String]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.index
                    .get(n.as_str())
                    .copied()
                    .ok_or_else(|| Error::UnknownVariable(n.clone()))
            })
            .collect()
    }

    fn value(&self, v: usize, r: &ValueRef) -> Result<u32> {
        let labels = &self.vars[v].labels;
        match r {
            ValueRef::Index(i) if (*i as usize) < labels.len() => Ok(*i),
            ValueRef::Index(i) => Err(Error::Parse(format!(
                "value index {i} out of range for variable {}",
                self.vars[v].name
            ))),
            ValueRef::Label(l) => labels
                .iter()
                .position(|x| x == l)
                .map(|i| i as u32)
                .ok_or_else(|| {
                    Error::Parse(format!("unknown label {l:?} for variable {}", self.vars[v].name))
                }),
        }
    }
}

/// Parse a JSON instance document.
pub fn parse_json(text: &str) -> Result<CspFormula> {
    let doc: Doc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let vars: Vec<Variable> = doc
        .variables
        .into_iter()
        .map(|v| Variable::new(v.name, v.domain))
        .collect();
    let names = Names {
        index: vars.iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect(),
        vars: &vars,
    };
    let mut constraints = Vec::with_capacity(doc.constraints.len());
    for (j, c) in doc.constraints.into_iter().enumerate() {
        let con = match c {
            ConDoc::RobustSat {
                vars: scope_names,
                negated,
                literals,
                delta,
            } => {
                let (scope_names, negated) = match (scope_names, literals) {
                    (Some(s), None) => {
                        let neg = negated.unwrap_or_else(|| vec![false; s.len()]);
                        (s, neg)
                    }
                    (None, Some(lits)) if negated.is_none() => {
                        lits.into_iter().map(|l| (l.var, l.negated)).unzip()
                    }
                    _ => {
                        return Err(Error::Parse(format!(
                            "constraint {j}: robust_sat needs either vars (with optional negated) or literals"
                        )))
                    }
                };
                if negated.len() != scope_names.len() {
                    return Err(Error::Parse(format!(
                        "constraint {j}: {} negation flags for {} variables",
                        negated.len(),
                        scope_names.len()
                    )));
                }
                let kind = match delta {
                    Some(d) => RobustSat::new(negated, d)?,
                    None => RobustSat::plain(negated)?,
                };
                Constraint {
                    scope: names.scope(&scope_names)?,
                    kind: ConstraintKind::RobustSat(kind),
                }
            }
            ConDoc::RobustColoring {
                vars: scope_names,
                delta,
            } => {
                let scope = names.scope(&scope_names)?;
                let colors = scope.first().map(|&v| vars[v].domain_size()).unwrap_or(2);
                Constraint {
                    kind: ConstraintKind::RobustColoring(RobustColoring::new(
                        scope.len(),
                        colors,
                        delta,
                    )?),
                    scope,
                }
            }
            ConDoc::Table {
                vars: scope_names,
                forbidden,
            } => {
                let scope = names.scope(&scope_names)?;
                let dims: Vec<u32> = scope.iter().map(|&v| vars[v].domain_size()).collect();
                let mut rows = Vec::with_capacity(forbidden.len());
                for row in &forbidden {
                    if row.len() != scope.len() {
                        return Err(Error::Parse(format!(
                            "constraint {j}: table row of length {} for {} variables",
                            row.len(),
                            scope.len()
                        )));
                    }
                    rows.push(
                        scope
                            .iter()
                            .zip(row)
                            .map(|(&v, r)| names.value(v, r))
                            .collect::<Result<Vec<u32>>>()?,
                    );
                }
                Constraint {
                    kind: ConstraintKind::Table(Table::new(dims, rows)?),
                    scope,
                }
            }
        };
        constraints.push(con);
    }
    CspFormula::new(vars, constraints)
}

/// Serialize to the JSON format accepted by [`parse_json`].
pub fn to_json(formula: &CspFormula) -> String {
    let vars = formula.variables();
    let scope_names =
        |c: &Constraint| -> Vec<String> { c.scope.iter().map(|&v| vars[v].name.clone()).collect() };
    let constraints = formula
        .constraints()
        .iter()
        .map(|c| match &c.kind {
            ConstraintKind::RobustSat(r) => {
                let k = r.negated().len();
                let plain = r.min_true() == 1 && r.delta() == 1.0 / k as f64;
                ConDoc::RobustSat {
                    vars: Some(scope_names(c)),
                    negated: Some(r.negated().to_vec()),
                    literals: None,
                    delta: (!plain).then_some(r.delta()),
                }
            }
            ConstraintKind::RobustColoring(r) => ConDoc::RobustColoring {
                vars: scope_names(c),
                delta: r.delta(),
            },
            ConstraintKind::Table(t) => ConDoc::Table {
                vars: scope_names(c),
                forbidden: t
                    .forbidden()
                    .iter()
                    .map(|row| {
                        row.iter()
                            .zip(&c.scope)
                            .map(|(&x, &v)| ValueRef::Label(vars[v].labels[x as usize].clone()))
                            .collect()
                    })
                    .collect(),
            },
        })
        .collect();
    let doc = Doc {
        variables: vars
            .iter()
            .map(|v| VarDoc {
                name: v.name.clone(),
                domain: v.labels.clone(),
            })
            .collect(),
        constraints,
    };
    serde_json::to_string_pretty(&doc).expect("instance documents always serialize")
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

/// Parse an extended DIMACS file (`p cnf` or `p rsat`).
pub fn parse_dimacs(text: &str) -> Result<CspFormula> {
    let mut header: Option<(usize, usize, Option<f64>)> = None;
    let mut clauses: Vec<Vec<i64>> = Vec::new();
    let mut current: Vec<i64> = Vec::new();
    let mut last_line = 0;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        last_line = lineno;
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(parse_err(lineno, "second problem line"));
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| s.parse::<usize>().map_err(|e| parse_err(lineno, e));
            header = Some(match f.as_slice() {
                ["p", "cnf", n, m] => (num(n)?, num(m)?, None),
                ["p", "rsat", n, m, d] => {
                    let d: f64 = d.parse().map_err(|e| parse_err(lineno, e))?;
                    (num(n)?, num(m)?, Some(d))
                }
                _ => return Err(parse_err(lineno, "expected `p cnf n m` or `p rsat n m delta`")),
            });
            if header.is_some_and(|(n, _, _)| n > MAX_DIMACS_VARS) {
                return Err(parse_err(lineno, format!("more than {MAX_DIMACS_VARS} variables")));
            }
            continue;
        }
        let Some((n, m, _)) = header else {
            return Err(parse_err(lineno, "clause before problem line"));
        };
        for tok in line.split_whitespace() {
            let lit: i64 = tok.parse().map_err(|e| parse_err(lineno, e))?;
            if lit == 0 {
                if current.is_empty() {
                    return Err(parse_err(lineno, "empty clause"));
                }
                if clauses.len() == m {
                    return Err(parse_err(lineno, format!("more than {m} clauses")));
                }
                clauses.push(std::mem::take(&mut current));
            } else {
                if lit.unsigned_abs() > n as u64 {
                    return Err(parse_err(lineno, format!("literal {lit} exceeds {n} variables")));
                }
                current.push(lit);
            }
        }
    }
    let Some((n, m, delta)) = header else {
        return Err(Error::Parse("missing problem line".into()));
    };
    if !current.is_empty() {
        return Err(parse_err(last_line, "clause not terminated by 0"));
    }
    if clauses.len() != m {
        return Err(Error::Parse(format!(
            "header declares {m} clauses, found {}",
            clauses.len()
        )));
    }
    let vars: Vec<Variable> = (1..=n).map(|i| Variable::boolean(i.to_string())).collect();
    let mut constraints = Vec::with_capacity(m);
    for (j, mut lits) in clauses.into_iter().enumerate() {
        lits.sort_unstable_by_key(|l| (l.unsigned_abs(), *l));
        lits.dedup();
        if lits.windows(2).any(|w| w[0] == -w[1]) {
            if delta.is_some() {
                return Err(Error::Parse(format!(
                    "clause {j} contains a variable and its negation"
                )));
            }
            // tautologies never constrain anything
            continue;
        }
        let negated: Vec<bool> = lits.iter().map(|&l| l < 0).collect();
        let scope: Vec<usize> = lits.iter().map(|l| l.unsigned_abs() as usize - 1).collect();
        let kind = match delta {
            Some(d) => RobustSat::new(negated, d)?,
            None => RobustSat::plain(negated)?,
        };
        constraints.push(Constraint {
            scope,
            kind: ConstraintKind::RobustSat(kind),
        });
    }
    CspFormula::new(vars, constraints)
}

/// DIMACS text for a formula of Boolean variables named `1..=n` whose
/// constraints are all ordinary clauses, or all robust clauses with one common
/// `delta`. `None` if the formula has no such form.
pub fn to_dimacs(formula: &CspFormula) -> Option<String> {
    let n = formula.num_vars();
    let named = formula
        .variables()
        .iter()
        .enumerate()
        .all(|(i, v)| v.name == (i + 1).to_string() && v.labels == ["false", "true"]);
    if !named {
        return None;
    }
    let mut delta: Option<Option<f64>> = None;
    for c in formula.constraints() {
        let ConstraintKind::RobustSat(r) = &c.kind else {
            return None;
        };
        let plain = r.min_true() == 1 && r.delta() == 1.0 / r.negated().len() as f64;
        let this = (!plain).then_some(r.delta());
        match delta {
            None => delta = Some(this),
            Some(d) if d == this => {}
            Some(_) => return None,
        }
        if this.is_some() && RobustSat::new(r.negated().to_vec(), r.delta()).ok()? != *r {
            return None;
        }
    }
    let mut out = match delta.flatten() {
        None => format!("p cnf {n} {}\n", formula.num_constraints()),
        Some(d) => format!("p rsat {n} {} {d:?}\n", formula.num_constraints()),
    };
    for c in formula.constraints() {
        let ConstraintKind::RobustSat(r) = &c.kind else {
            unreachable!()
        };
        for (&v, &neg) in c.scope.iter().zip(r.negated()) {
            let lit = v as i64 + 1;
            out.push_str(&format!("{} ", if neg { -lit } else { lit }));
        }
        out.push_str("0\n");
    }
    Some(out)
}

/// Parse either format: JSON if the first non-blank character is `{`.
pub fn parse_instance(text: &str) -> Result<CspFormula> {
    if text.trim_start().starts_with('{') {
        parse_json(text)
    } else {
        parse_dimacs(text)
    }
}

/// Structural equality of two formulas: same variables, scopes and payloads.
pub fn same_instance(a: &CspFormula, b: &CspFormula) -> bool {
    a.variables() == b.variables() && a.constraints() == b.constraints()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MIXED: &str = r#"{
      "variables": [
        {"name": "x", "domain": ["false", "true"]},
        {"name": "y", "domain": ["false", "true"]},
        {"name": "a", "domain": ["r", "g", "b"]},
        {"name": "b", "domain": ["r", "g", "b"]},
        {"name": "c", "domain": ["r", "g", "b"]}
      ],
      "constraints": [
        {"type": "robust_sat", "vars": ["x", "y"]},
        {"type": "robust_sat", "literals": [{"var": "x", "negated": true}, {"var": "y"}], "delta": 1.0},
        {"type": "robust_coloring", "vars": ["a", "b", "c"], "delta": 0.1},
        {"type": "table", "vars": ["a", "x"], "forbidden": [["g", "true"], [0, 0]]}
      ]
    }"#;

    #[test]
    fn json_mixed_instance() {
        let f = parse_json(MIXED).unwrap();
        assert_eq!(f.num_vars(), 5);
        assert_eq!(f.num_constraints(), 4);
        match &f.constraint(1).kind {
            ConstraintKind::RobustSat(r) => {
                assert_eq!(r.negated(), &[true, false]);
                assert_eq!(r.min_true(), 2);
            }
            _ => panic!("expected robust_sat"),
        }
        match &f.constraint(3).kind {
            ConstraintKind::Table(t) => assert_eq!(t.forbidden(), &[vec![0, 0], vec![1, 1]]),
            _ => panic!("expected table"),
        }
    }

    #[test]
    fn json_round_trip() {
        let f = parse_json(MIXED).unwrap();
        let g = parse_json(&to_json(&f)).unwrap();
        assert!(same_instance(&f, &g));
        assert_eq!(to_json(&f), to_json(&g));
    }

    #[test]
    fn json_rejects_bad_documents() {
        for bad in [
            "",
            "{}",
            r#"{"variables": [{"name": "x", "domain": ["0"]}]}"#,
            r#"{"variables": [{"name": "x", "domain": ["0", "0"]}]}"#,
            r#"{"variables": [{"name": "x", "domain": ["0", "1"]}, {"name": "x", "domain": ["0", "1"]}]}"#,
            r#"{"variables": [{"name": "x", "domain": ["0", "1"]}], "constraints": [{"type": "robust_sat", "vars": ["z"]}]}"#,
            r#"{"variables": [{"name": "x", "domain": ["0", "1", "2"]}], "constraints": [{"type": "robust_sat", "vars": ["x"]}]}"#,
            r#"{"variables": [{"name": "x", "domain": ["0", "1"]}], "constraints": [{"type": "table", "vars": ["x"], "forbidden": [[2]]}]}"#,
            r#"{"variables": [{"name": "x", "domain": ["0", "1"]}], "constraints": [{"type": "table", "vars": ["x"], "forbidden": [["7"]]}]}"#,
            r#"{"variables": [{"name": "x", "domain": ["0", "1"]}], "constraints": [{"type": "robust_sat", "vars": ["x"], "negated": [true, false]}]}"#,
            r#"{"variables": [{"name": "x", "domain": ["0", "1"]}], "constraints": [{"type": "wat", "vars": ["x"]}]}"#,
            r#"{"variables": [{"name": "x", "domain": ["0", "1"]}], "extra": 1}"#,
        ] {
            assert!(parse_json(bad).is_err(), "accepted {bad}");
        }
    }

    #[test]
    fn dimacs_cnf() {
        let f = parse_dimacs("c comment\np cnf 3 2\n1 -2 0\n2 3\n 0\n").unwrap();
        assert_eq!(f.num_vars(), 3);
        assert_eq!(f.num_constraints(), 2);
        assert_eq!(f.constraint(0).scope, vec![0, 1]);
        assert_eq!(f.variable(2).name, "3");
        let g = parse_dimacs(&to_dimacs(&f).unwrap()).unwrap();
        assert!(same_instance(&f, &g));
    }

    #[test]
    fn dimacs_rsat_header_sets_threshold() {
        let f = parse_dimacs("p rsat 4 1 0.5\n1 2 -3 4 0\n").unwrap();
        match &f.constraint(0).kind {
            ConstraintKind::RobustSat(r) => assert_eq!(r.min_true(), 2),
            _ => panic!("expected robust_sat"),
        }
        let text = to_dimacs(&f).unwrap();
        assert!(text.starts_with("p rsat 4 1 0.5"));
        assert!(same_instance(&f, &parse_dimacs(&text).unwrap()));
    }

    #[test]
    fn dimacs_tautology_and_duplicates() {
        let f = parse_dimacs("p cnf 2 2\n1 -1 0\n2 2 0\n").unwrap();
        assert_eq!(f.num_constraints(), 1);
        assert_eq!(f.constraint(0).scope, vec![1]);
        assert!(parse_dimacs("p rsat 2 1 0.5\n1 -1 0\n").is_err());
    }

    #[test]
    fn dimacs_rejects_malformed() {
        for bad in [
            "",
            "1 2 0\n",
            "p cnf 2 1\n1 3 0\n",
            "p cnf 2 1\n1 2\n",
            "p cnf 2 2\n1 2 0\n",
            "p cnf 2 1\n1 0 2 0\n",
            "p cnf 2 1\n0\n",
            "p cnf 2 1\np cnf 2 1\n1 0\n",
            "p cnf x 1\n",
            "p rsat 2 1 1.5\n1 2 0\n",
            "p cnf 99999999999 0\n",
        ] {
            assert!(parse_dimacs(bad).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn format_detection() {
        assert_eq!(parse_instance(MIXED).unwrap().num_vars(), 5);
        assert_eq!(parse_instance("p cnf 1 0\n").unwrap().num_vars(), 1);
    }

    #[test]
    fn to_dimacs_declines_non_boolean() {
        assert!(to_dimacs(&parse_json(MIXED).unwrap()).is_none());
    }

    proptest! {
        #[test]
        fn json_round_trip_random(
            n in 1usize..6,
            clauses in prop::collection::vec(
                (prop::collection::btree_set(0usize..6, 1..4), prop::collection::vec(any::<bool>(), 4), prop::option::of(0.05f64..1.0)),
                0..6),
        ) {
            let vars: Vec<Variable> = (0..n).map(|i| Variable::boolean(format!("v{i}"))).collect();
            let mut cons = Vec::new();
            for (scope, neg, delta) in clauses {
                let scope: Vec<usize> = scope.into_iter().filter(|&v| v < n).collect();
                if scope.is_empty() { continue; }
                let neg = neg[..scope.len()].to_vec();
                let kind = match delta {
                    Some(d) => RobustSat::new(neg, d).unwrap(),
                    None => RobustSat::plain(neg).unwrap(),
                };
                cons.push(Constraint { scope, kind: ConstraintKind::RobustSat(kind) });
            }
            let f = CspFormula::new(vars, cons).unwrap();
            let g = parse_json(&to_json(&f)).unwrap();
            prop_assert!(same_instance(&f, &g));
        }

        #[test]
        fn parsers_never_panic(s in ".{0,200}") {
            let _ = parse_json(&s);
            let _ = parse_dimacs(&s);
        }
    }
}
