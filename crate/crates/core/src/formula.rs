use std::collections::HashSet;

use crate::assignment::PartialAssignment;
use crate::constraint::{Constraint, ConstraintKind};
use crate::error::{Error, Result};

/// A variable with its ordered value labels; `q_v` is the number of labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub labels: Vec<String>,
}

impl Variable {
    pub fn new(name: impl Into<String>, labels: Vec<String>) -> Self {
        Variable {
            name: name.into(),
            labels,
        }
    }

    pub fn boolean(name: impl Into<String>) -> Self {
        Variable::new(name, vec!["false".into(), "true".into()])
    }

    pub fn with_domain(name: impl Into<String>, q: u32) -> Self {
        Variable::new(name, (0..q).map(|x| x.to_string()).collect())
    }

    #[inline]
    pub fn domain_size(&self) -> u32 {
        self.labels.len() as u32
    }
}

/// A CSP formula `Φ = (V, Q, C)` with incidence and dependency adjacency.
///
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct CspFormula {
    variables: Vec<Variable>,
    domain_sizes: Vec<u32>,
    constraints: Vec<Constraint>,
    var_constraints: Vec<Vec<usize>>,
    dependents: Vec<Vec<usize>>,
    q: u32,
    k: usize,
    degree: usize,
}

impl CspFormula {
    pub fn new(variables: Vec<Variable>, constraints: Vec<Constraint>) -> Result<Self> {
        let mut names = HashSet::new();
        for v in &variables {
            if v.labels.len() < 2 {
                return Err(Error::InvalidFormula(format!(
                    "variable {} has domain size {} < 2",
                    v.name,
                    v.labels.len()
                )));
            }
            if !names.insert(v.name.as_str()) {
                return Err(Error::InvalidFormula(format!("duplicate variable {}", v.name)));
            }
            let mut seen = HashSet::new();
            if !v.labels.iter().all(|l| seen.insert(l.as_str())) {
                return Err(Error::InvalidFormula(format!(
                    "duplicate label in domain of {}",
                    v.name
                )));
            }
        }
        let domain_sizes: Vec<u32> = variables.iter().map(Variable::domain_size).collect();
        for (j, c) in constraints.iter().enumerate() {
            check_scope(j, c, &domain_sizes)?;
        }
        Ok(Self::assemble(variables, constraints))
    }

    /// Builds adjacency without validating scopes against families; used for
    /// simplified formulas whose constraints are already consistent.
    pub(crate) fn assemble(variables: Vec<Variable>, constraints: Vec<Constraint>) -> Self {
        let n = variables.len();
        let domain_sizes: Vec<u32> = variables.iter().map(Variable::domain_size).collect();
        let mut var_constraints = vec![Vec::new(); n];
        for (j, c) in constraints.iter().enumerate() {
            for &v in &c.scope {
                var_constraints[v].push(j);
            }
        }
        let dependents: Vec<Vec<usize>> = constraints
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let mut deps: Vec<usize> = c
                    .scope
                    .iter()
                    .flat_map(|&v| var_constraints[v].iter().copied())
                    .filter(|&d| d != j)
                    .collect();
                deps.sort_unstable();
                deps.dedup();
                deps
            })
            .collect();
        let q = domain_sizes.iter().copied().max().unwrap_or(2).max(2);
        let k = constraints.iter().map(|c| c.scope.len()).max().unwrap_or(1).max(1);
        let degree = dependents.iter().map(|d| d.len() + 1).max().unwrap_or(1);
        CspFormula {
            variables,
            domain_sizes,
            constraints,
            var_constraints,
            dependents,
            q,
            k,
            degree,
        }
    }

    #[inline]
    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    #[inline]
    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, v: usize) -> &Variable {
        &self.variables[v]
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    #[inline]
    pub fn constraint(&self, c: usize) -> &Constraint {
        &self.constraints[c]
    }

    #[inline]
    pub fn domain_size(&self, v: usize) -> u32 {
        self.domain_sizes[v]
    }

    pub fn domain_sizes(&self) -> &[u32] {
        &self.domain_sizes
    }

    /// Constraints whose scope contains `v`.
    #[inline]
    pub fn constraints_of(&self, v: usize) -> &[usize] {
        &self.var_constraints[v]
    }

    /// Constraints other than `c` sharing a variable with it.
    #[inline]
    pub fn dependents(&self, c: usize) -> &[usize] {
        &self.dependents[c]
    }

    /// `q = max_v q_v`.
    pub fn max_domain(&self) -> u32 {
        self.q
    }

    /// `k = max_c |vbl(c)|`.
    pub fn width(&self) -> usize {
        self.k
    }

    /// `Δ`, counting each constraint as its own dependent.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn has_closed_forms(&self) -> bool {
        self.constraints.iter().all(|c| match &c.kind {
            ConstraintKind::RobustColoring(e) => e.has_closed_form(),
            _ => true,
        })
    }

    /// `P[¬c | σ]` for constraint `c`, failing when its family lacks a closed form.
    pub fn violation_probability(&self, c: usize, sigma: &PartialAssignment) -> Result<f64> {
        self.constraints[c]
            .exact_violation_probability(sigma)
            .ok_or(Error::NotClosedForm { constraint: c })
    }

    /// `p_Φ = max_c P[¬c]` under the uniform product distribution.
    pub fn max_violation_probability(&self) -> Result<f64> {
        let empty = PartialAssignment::new(self.num_vars());
        (0..self.num_constraints()).try_fold(0.0f64, |acc, c| {
            Ok(acc.max(self.violation_probability(c, &empty)?))
        })
    }

    /// Whether a full assignment (value index per variable) satisfies every constraint.
    pub fn first_violated(&self, values: &[u32]) -> Option<usize> {
        let mut buf = Vec::with_capacity(self.k);
        self.constraints.iter().position(|c| {
            buf.clear();
            buf.extend(c.scope.iter().map(|&v| values[v]));
            c.kind.is_violated_by(&buf)
        })
    }

    /// Re-derive both adjacency relations from the scopes and compare.
    pub fn adjacency_consistent(&self) -> bool {
        let rebuilt = Self::assemble(self.variables.clone(), self.constraints.clone());
        rebuilt.var_constraints == self.var_constraints && rebuilt.dependents == self.dependents
    }
}

fn check_scope(j: usize, c: &Constraint, domain_sizes: &[u32]) -> Result<()> {
    let n = domain_sizes.len();
    if c.scope.is_empty() {
        return Err(Error::InvalidFormula(format!("constraint {j} has empty scope")));
    }
    if c.scope.len() != c.kind.arity() {
        return Err(Error::InvalidFormula(format!(
            "constraint {j}: scope has {} variables but payload has arity {}",
            c.scope.len(),
            c.kind.arity()
        )));
    }
    let mut seen = HashSet::new();
    for &v in &c.scope {
        if v >= n {
            return Err(Error::InvalidFormula(format!(
                "constraint {j} references variable {v} of {n}"
            )));
        }
        if !seen.insert(v) {
            return Err(Error::InvalidFormula(format!(
                "constraint {j} repeats variable {v}"
            )));
        }
    }
    match &c.kind {
        ConstraintKind::RobustSat(_) => {
            if let Some(&v) = c.scope.iter().find(|&&v| domain_sizes[v] != 2) {
                return Err(Error::InvalidFormula(format!(
                    "robust_sat constraint {j} over non-Boolean variable {v}"
                )));
            }
        }
        ConstraintKind::RobustColoring(e) => {
            if let Some(&v) = c.scope.iter().find(|&&v| domain_sizes[v] != e.colors()) {
                return Err(Error::InvalidFormula(format!(
                    "robust_coloring constraint {j}: variable {v} does not have {} colors",
                    e.colors()
                )));
            }
        }
        ConstraintKind::Table(t) => {
            if c.scope.iter().zip(t.dims()).any(|(&v, &d)| domain_sizes[v] != d) {
                return Err(Error::InvalidFormula(format!(
                    "table constraint {j} dimensions disagree with variable domains"
                )));
            }
        }
    }
    Ok(())
}
