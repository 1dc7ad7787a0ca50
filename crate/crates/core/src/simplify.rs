//! Simplification `Φ^σ` and connected components of its hypergraph.

use std::collections::HashSet;

use crate::assignment::PartialAssignment;
use crate::constraint::Constraint;
use crate::formula::CspFormula;

/// `Φ^σ` together with the maps from its ids back to the original ones.
#[derive(Debug, Clone)]
pub struct Simplified {
    pub formula: CspFormula,
    /// New variable id → original variable id.
    pub var_map: Vec<usize>,
    /// New constraint id → original constraint id.
    pub constraint_map: Vec<usize>,
}

/// Drop constraints satisfied by `σ` and substitute assigned values into the rest.
///
/// Variables set to `Star` count as unassigned and stay in the result.
pub fn simplify(formula: &CspFormula, sigma: &PartialAssignment) -> Simplified {
    let mut new_id = vec![usize::MAX; formula.num_vars()];
    let mut var_map = Vec::new();
    let mut variables = Vec::new();
    for (v, id) in new_id.iter_mut().enumerate() {
        if !sigma.get(v).is_assigned() {
            *id = var_map.len();
            var_map.push(v);
            variables.push(formula.variable(v).clone());
        }
    }
    let mut constraints = Vec::new();
    let mut constraint_map = Vec::new();
    for (j, c) in formula.constraints().iter().enumerate() {
        let view = c.view(sigma);
        if c.kind.is_satisfied(&view) {
            continue;
        }
        let (kind, kept) = c.kind.restrict(&view);
        constraints.push(Constraint {
            scope: kept.iter().map(|&i| new_id[c.scope[i]]).collect(),
            kind,
        });
        constraint_map.push(j);
    }
    Simplified {
        formula: CspFormula::assemble(variables, constraints),
        var_map,
        constraint_map,
    }
}

/// A connected component of the hypergraph of `Φ^σ`, in original ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// Sorted.
    pub vars: Vec<usize>,
    /// Sorted; every constraint is unsatisfied under `σ`.
    pub constraints: Vec<usize>,
}

/// Components of `Φ^σ` whose vertex sets meet `seeds`. `seeds` must be unassigned in `σ`.
pub fn connected_components(
    formula: &CspFormula,
    sigma: &PartialAssignment,
    seeds: &[usize],
) -> Vec<Component> {
    let mut var_seen = vec![false; formula.num_vars()];
    // 0 = unvisited, 1 = satisfied (skip), 2 = taken
    let mut con_state = vec![0u8; formula.num_constraints()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for &s in seeds {
        debug_assert!(!sigma.get(s).is_assigned());
        if var_seen[s] {
            continue;
        }
        var_seen[s] = true;
        stack.push(s);
        let mut comp = Component {
            vars: Vec::new(),
            constraints: Vec::new(),
        };
        while let Some(w) = stack.pop() {
            comp.vars.push(w);
            for &c in formula.constraints_of(w) {
                if con_state[c] != 0 {
                    continue;
                }
                let con = formula.constraint(c);
                if con.evaluate_satisfied(sigma) {
                    con_state[c] = 1;
                    continue;
                }
                con_state[c] = 2;
                comp.constraints.push(c);
                for &u in &con.scope {
                    if !var_seen[u] && !sigma.get(u).is_assigned() {
                        var_seen[u] = true;
                        stack.push(u);
                    }
                }
            }
        }
        comp.vars.sort_unstable();
        comp.constraints.sort_unstable();
        out.push(comp);
    }
    out
}

/// The component of `Φ^σ` containing the unassigned variable `v`.
///
/// Uses hash sets so the cost is proportional to the component, not to `n`.
pub fn component_containing(formula: &CspFormula, sigma: &PartialAssignment, v: usize) -> Component {
    debug_assert!(!sigma.get(v).is_assigned());
    let mut vars = HashSet::from([v]);
    let mut seen_cons = HashSet::new();
    let mut constraints = Vec::new();
    let mut stack = vec![v];
    while let Some(w) = stack.pop() {
        for &c in formula.constraints_of(w) {
            if !seen_cons.insert(c) {
                continue;
            }
            let con = formula.constraint(c);
            if con.evaluate_satisfied(sigma) {
                continue;
            }
            constraints.push(c);
            for &u in &con.scope {
                if !sigma.get(u).is_assigned() && vars.insert(u) {
                    stack.push(u);
                }
            }
        }
    }
    let mut vars: Vec<usize> = vars.into_iter().collect();
    vars.sort_unstable();
    constraints.sort_unstable();
    Component { vars, constraints }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::Slot;
    use crate::constraint::{ConstraintKind, RobustSat};
    use crate::formula::Variable;

    fn clause(scope: &[usize], negated: &[bool]) -> Constraint {
        Constraint {
            scope: scope.to_vec(),
            kind: ConstraintKind::RobustSat(RobustSat::plain(negated.to_vec()).unwrap()),
        }
    }

    fn bools(n: usize) -> Vec<Variable> {
        (0..n).map(|i| Variable::boolean(format!("x{i}"))).collect()
    }

    fn x_or_y() -> CspFormula {
        CspFormula::new(bools(2), vec![clause(&[0, 1], &[false, false])]).unwrap()
    }

    fn chain() -> CspFormula {
        CspFormula::new(
            bools(3),
            vec![clause(&[0, 1], &[false, false]), clause(&[1, 2], &[false, false])],
        )
        .unwrap()
    }

    #[test]
    fn empty_sigma_is_identity() {
        let f = chain();
        let s = simplify(&f, &PartialAssignment::new(3));
        assert_eq!(s.var_map, vec![0, 1, 2]);
        assert_eq!(s.constraint_map, vec![0, 1]);
        assert_eq!(s.formula.constraints(), f.constraints());
    }

    #[test]
    fn satisfied_clause_removed() {
        let f = x_or_y();
        let mut sigma = PartialAssignment::new(2);
        sigma.set(0, Slot::Value(1));
        let s = simplify(&f, &sigma);
        assert_eq!(s.formula.num_constraints(), 0);
        assert_eq!(s.var_map, vec![1]);
    }

    #[test]
    fn falsified_literal_leaves_unit_clause() {
        let f = x_or_y();
        let mut sigma = PartialAssignment::new(2);
        sigma.set(0, Slot::Value(0));
        let s = simplify(&f, &sigma);
        assert_eq!(s.var_map, vec![1]);
        assert_eq!(s.formula.num_constraints(), 1);
        let c = s.formula.constraint(0);
        assert_eq!(c.scope, vec![0]);
        assert!(c.kind.is_violated_by(&[0]));
        assert!(!c.kind.is_violated_by(&[1]));
    }

    #[test]
    fn no_constraints_gives_singletons() {
        let f = CspFormula::new(bools(3), vec![]).unwrap();
        let comps = connected_components(&f, &PartialAssignment::new(3), &[0, 2]);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].vars, vec![0]);
        assert_eq!(comps[1].vars, vec![2]);
    }

    #[test]
    fn chain_is_one_component() {
        let f = chain();
        let comps = connected_components(&f, &PartialAssignment::new(3), &[0]);
        assert_eq!(
            comps,
            vec![Component {
                vars: vec![0, 1, 2],
                constraints: vec![0, 1]
            }]
        );
        assert_eq!(component_containing(&f, &PartialAssignment::new(3), 0), comps[0]);
    }

    #[test]
    fn satisfied_link_is_pruned() {
        let f = chain();
        let mut sigma = PartialAssignment::new(3);
        sigma.set(2, Slot::Value(1));
        let comps = connected_components(&f, &sigma, &[0]);
        assert_eq!(
            comps,
            vec![Component {
                vars: vec![0, 1],
                constraints: vec![0]
            }]
        );
        assert_eq!(component_containing(&f, &sigma, 0), comps[0]);
    }

    #[test]
    fn star_counts_as_unassigned() {
        let f = chain();
        let mut sigma = PartialAssignment::new(3);
        sigma.set(1, Slot::Star);
        let comps = connected_components(&f, &sigma, &[0]);
        assert_eq!(comps[0].vars, vec![0, 1, 2]);
    }
}
