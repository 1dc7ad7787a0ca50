//! Rejection sampling over connected components of `Φ^σ`.

use rand::Rng;

use crate::assignment::PartialAssignment;
use crate::constraint::{ConstraintKind, ScopeBuf};
use crate::error::{Error, Result};
use crate::formula::CspFormula;
use crate::simplify::{connected_components, Component};

pub const DEFAULT_TRIAL_CAP: u64 = 10_000_000;

/// Components up to this many assignments are enumerated to tell an empty
/// component apart from an unlucky one when the trial cap is hit.
const FEASIBILITY_ENUM_CAP: u128 = 1 << 22;

/// A component of `Φ^σ` prepared for repeated uniform draws.
#[derive(Debug, Clone)]
pub struct ComponentSampler {
    vars: Vec<usize>,
    dims: Vec<u32>,
    /// Reduced payload and its scope in local indices.
    constraints: Vec<(ConstraintKind, Vec<usize>)>,
    trial_cap: u64,
}

impl ComponentSampler {
    pub fn build(
        formula: &CspFormula,
        sigma: &PartialAssignment,
        comp: &Component,
        trial_cap: u64,
    ) -> Self {
        let local = |v: usize| comp.vars.binary_search(&v).expect("scope variable in component");
        let constraints = comp
            .constraints
            .iter()
            .map(|&c| {
                let con = formula.constraint(c);
                let (kind, kept) = con.kind.restrict(&con.view(sigma));
                let scope = kept.iter().map(|&i| local(con.scope[i])).collect();
                (kind, scope)
            })
            .collect();
        ComponentSampler {
            dims: comp.vars.iter().map(|&v| formula.domain_size(v)).collect(),
            vars: comp.vars.clone(),
            constraints,
            trial_cap,
        }
    }

    /// Original variable ids, sorted.
    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn local_index(&self, v: usize) -> Option<usize> {
        self.vars.binary_search(&v).ok()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    fn violated(&self, values: &[u32]) -> bool {
        let mut buf = ScopeBuf::<u32>::new();
        self.constraints.iter().any(|(kind, scope)| {
            buf.clear();
            buf.extend(scope.iter().map(|&i| values[i]));
            kind.is_violated_by(&buf)
        })
    }

    fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [u32]) {
        let mut bits = 0u64;
        let mut nbits = 0u32;
        for (slot, &d) in out.iter_mut().zip(&self.dims) {
            *slot = if d == 2 {
                if nbits == 0 {
                    bits = rng.next_u64();
                    nbits = 64;
                }
                let b = (bits & 1) as u32;
                bits >>= 1;
                nbits -= 1;
                b
            } else {
                rng.random_range(0..d)
            };
        }
    }

    /// Draw uniformly from the satisfying assignments of the component into `out`
    /// (indexed like [`vars`](Self::vars)); returns the number of trials used.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [u32]) -> Result<u64> {
        debug_assert_eq!(out.len(), self.vars.len());
        for trial in 1..=self.trial_cap {
            self.fill(rng, out);
            if !self.violated(out) {
                return Ok(trial);
            }
        }
        if !self.feasible_by_enumeration().unwrap_or(true) {
            return Err(Error::InfeasibleComponent { var: self.vars[0] });
        }
        Err(Error::BudgetExceeded {
            what: "rejection sampling trials",
            limit: self.trial_cap,
        })
    }

    /// `Some(feasible)` when the component is small enough to enumerate.
    pub fn feasible_by_enumeration(&self) -> Option<bool> {
        let size = self
            .dims
            .iter()
            .try_fold(1u128, |acc, &d| acc.checked_mul(d as u128))?;
        if size > FEASIBILITY_ENUM_CAP {
            return None;
        }
        let mut values = vec![0u32; self.dims.len()];
        for mut code in 0..size {
            for (x, &d) in values.iter_mut().zip(&self.dims) {
                *x = (code % d as u128) as u32;
                code /= d as u128;
            }
            if !self.violated(&values) {
                return Some(true);
            }
        }
        Some(false)
    }
}

/// Outcome of [`rejection_sampling`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RejectionOutcome {
    /// `(variable, value)` for every variable of `S`, sorted by variable.
    pub values: Vec<(usize, u32)>,
    /// Trials per component, in component order.
    pub trials: Vec<u64>,
    /// Constraint count per component.
    pub component_sizes: Vec<usize>,
}

/// Draw `X_S ~ μ_S^σ` by independent rejection sampling of each component
/// of `Φ^σ` meeting `S`. Every variable of `S` must be unassigned in `σ`.
pub fn rejection_sampling<R: Rng + ?Sized>(
    formula: &CspFormula,
    sigma: &PartialAssignment,
    s: &[usize],
    rng: &mut R,
    trial_cap: u64,
) -> Result<RejectionOutcome> {
    let mut in_s = vec![false; formula.num_vars()];
    for &v in s {
        in_s[v] = true;
    }
    let mut out = RejectionOutcome::default();
    let mut buf = Vec::new();
    for comp in connected_components(formula, sigma, s) {
        let sampler = ComponentSampler::build(formula, sigma, &comp, trial_cap);
        buf.clear();
        buf.resize(comp.vars.len(), 0);
        out.trials.push(sampler.draw(rng, &mut buf)?);
        out.component_sizes.push(comp.constraints.len());
        out.values.extend(
            comp.vars
                .iter()
                .zip(&buf)
                .filter(|(v, _)| in_s[**v])
                .map(|(&v, &x)| (v, x)),
        );
    }
    out.values.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::Slot;
    use crate::constraint::{Constraint, RobustSat, Table};
    use crate::formula::Variable;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn x_or_y_plus(extra: usize) -> CspFormula {
        let vars = (0..2 + extra).map(|i| Variable::boolean(format!("x{i}"))).collect();
        let c = Constraint {
            scope: vec![0, 1],
            kind: ConstraintKind::RobustSat(RobustSat::plain(vec![false, false]).unwrap()),
        };
        CspFormula::new(vars, vec![c]).unwrap()
    }

    #[test]
    fn unconstrained_component_takes_one_trial() {
        let f = x_or_y_plus(1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = rejection_sampling(&f, &PartialAssignment::new(3), &[2], &mut rng, 10).unwrap();
        assert_eq!(out.trials, vec![1]);
        assert_eq!(out.values.len(), 1);
    }

    #[test]
    fn clause_law_and_mean_trials() {
        let f = x_or_y_plus(0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 60_000;
        let mut counts = [0u64; 4];
        let mut trials = 0;
        for _ in 0..n {
            let out = rejection_sampling(&f, &PartialAssignment::new(2), &[0, 1], &mut rng, 1000).unwrap();
            let code = out.values[0].1 + 2 * out.values[1].1;
            counts[code as usize] += 1;
            trials += out.trials[0];
        }
        assert_eq!(counts[0], 0);
        for &c in &counts[1..] {
            let p = c as f64 / n as f64;
            let sd = (1.0f64 / 3.0 * 2.0 / 3.0 / n as f64).sqrt();
            assert!((p - 1.0 / 3.0).abs() < 4.0 * sd, "{counts:?}");
        }
        // trials ~ Geometric(3/4): mean 4/3, sd sqrt(1/4)/(3/4)
        let mean = trials as f64 / n as f64;
        let sd = (0.25f64).sqrt() / 0.75 / (n as f64).sqrt();
        assert!((mean - 4.0 / 3.0).abs() < 4.0 * sd, "{mean}");
    }

    #[test]
    fn infeasible_component_detected() {
        let vars = vec![Variable::with_domain("a", 2)];
        let t = Table::new(vec![2], vec![vec![0], vec![1]]).unwrap();
        let f = CspFormula::new(
            vars,
            vec![Constraint {
                scope: vec![0],
                kind: ConstraintKind::Table(t),
            }],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let err = rejection_sampling(&f, &PartialAssignment::new(1), &[0], &mut rng, 50).unwrap_err();
        assert_eq!(err, Error::InfeasibleComponent { var: 0 });
    }

    #[test]
    fn assigned_values_are_respected() {
        let f = x_or_y_plus(0);
        let mut sigma = PartialAssignment::new(2);
        sigma.set(0, Slot::Value(0));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let out = rejection_sampling(&f, &sigma, &[1], &mut rng, 1000).unwrap();
            assert_eq!(out.values, vec![(1, 1)]);
        }
    }
}
