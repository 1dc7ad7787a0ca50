use rand::Rng;

use crate::assignment::PartialAssignment;
use crate::error::Result;
use crate::formula::CspFormula;
use crate::frozen::FrozenOracle;

/// Epoch-stamped per-call caches. Bumping the epoch invalidates all of them at once.
pub(super) struct Scratch {
    epoch: u32,
    in_star: Vec<u32>,
    con_seen: Vec<u32>,
    sat_stamp: Vec<u32>,
    sat: Vec<bool>,
    frozen_stamp: Vec<u32>,
    frozen: Vec<bool>,
    fixed_stamp: Vec<u32>,
    fixed: Vec<bool>,
    stack: Vec<usize>,
    boundary: Vec<usize>,
}

impl Scratch {
    pub(super) fn new(formula: &CspFormula) -> Self {
        let (n, m) = (formula.num_vars(), formula.num_constraints());
        Scratch {
            epoch: 0,
            in_star: vec![0; n],
            con_seen: vec![0; m],
            sat_stamp: vec![0; m],
            sat: vec![false; m],
            frozen_stamp: vec![0; m],
            frozen: vec![false; m],
            fixed_stamp: vec![0; n],
            fixed: vec![false; n],
            stack: Vec::new(),
            boundary: Vec::new(),
        }
    }

    fn bump(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            for a in [
                &mut self.in_star,
                &mut self.con_seen,
                &mut self.sat_stamp,
                &mut self.frozen_stamp,
                &mut self.fixed_stamp,
            ] {
                a.fill(0);
            }
            self.epoch = 1;
        }
    }
}

struct Ctx<'s, 'f, R: ?Sized> {
    formula: &'f CspFormula,
    sigma: &'f PartialAssignment,
    oracle: &'s mut FrozenOracle,
    rng: &'s mut R,
    eval_queries: &'s mut u64,
}

impl<R: Rng + ?Sized> Ctx<'_, '_, R> {
    fn satisfied(&mut self, s: &mut Scratch, c: usize) -> bool {
        if s.sat_stamp[c] != s.epoch {
            s.sat_stamp[c] = s.epoch;
            *self.eval_queries += 1;
            s.sat[c] = self.formula.constraint(c).evaluate_satisfied(self.sigma);
        }
        s.sat[c]
    }

    fn frozen(&mut self, s: &mut Scratch, c: usize) -> Result<bool> {
        if s.frozen_stamp[c] != s.epoch {
            // a satisfied constraint has violation probability 0
            let f = !self.satisfied(s, c)
                && self.oracle.is_frozen(self.formula, c, self.sigma, self.rng)?;
            s.frozen_stamp[c] = s.epoch;
            s.frozen[c] = f;
        }
        Ok(s.frozen[c])
    }

    fn fixed(&mut self, s: &mut Scratch, v: usize) -> Result<bool> {
        if s.fixed_stamp[v] != s.epoch {
            let mut f = self.sigma.get(v).is_accessed();
            if !f {
                for &c in self.formula.constraints_of(v) {
                    if self.frozen(s, c)? {
                        f = true;
                        break;
                    }
                }
            }
            s.fixed_stamp[v] = s.epoch;
            s.fixed[v] = f;
        }
        Ok(s.fixed[v])
    }
}

/// The smallest-index non-fixed variable on the vertex boundary of the
/// star-connected region of the fixed sub-hypergraph of `Φ^σ`, or `None`.
pub(super) fn next_var<R: Rng + ?Sized>(
    formula: &CspFormula,
    sigma: &PartialAssignment,
    oracle: &mut FrozenOracle,
    rng: &mut R,
    s: &mut Scratch,
    eval_queries: &mut u64,
) -> Result<Option<usize>> {
    s.bump();
    let mut ctx = Ctx {
        formula,
        sigma,
        oracle,
        rng,
        eval_queries,
    };
    let mut stack = std::mem::take(&mut s.stack);
    let mut boundary = std::mem::take(&mut s.boundary);
    stack.clear();
    boundary.clear();
    for &v in sigma.stars() {
        if s.in_star[v] != s.epoch {
            s.in_star[v] = s.epoch;
            stack.push(v);
        }
    }
    let result = (|| {
        while let Some(w) = stack.pop() {
            for &c in formula.constraints_of(w) {
                if s.con_seen[c] == s.epoch {
                    continue;
                }
                s.con_seen[c] = s.epoch;
                if ctx.satisfied(s, c) {
                    continue;
                }
                let scope = &formula.constraint(c).scope;
                let mut all_fixed = true;
                for &u in scope {
                    if !sigma.get(u).is_assigned() && !ctx.fixed(s, u)? {
                        all_fixed = false;
                        break;
                    }
                }
                for &u in scope {
                    if sigma.get(u).is_assigned() || s.in_star[u] == s.epoch {
                        continue;
                    }
                    if all_fixed {
                        s.in_star[u] = s.epoch;
                        stack.push(u);
                    } else {
                        boundary.push(u);
                    }
                }
            }
        }
        let mut best: Option<usize> = None;
        for &u in &boundary {
            if s.in_star[u] == s.epoch || best.is_some_and(|b| b <= u) {
                continue;
            }
            if !ctx.fixed(s, u)? {
                best = Some(u);
            }
        }
        Ok(best)
    })();
    s.stack = stack;
    s.boundary = boundary;
    result
}
