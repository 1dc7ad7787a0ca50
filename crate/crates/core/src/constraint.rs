//! Constraint families with evaluation oracles and closed-form violation probabilities.
//!
//! Every payload works on a scope-aligned view: position `i` of the slice
//! handed to a method is the state of the `i`-th scope variable. `Star` and
//! `Unset` are both treated as "unassigned" here.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::assignment::{PartialAssignment, Slot};
use crate::error::{Error, Result};

/// Scope-aligned view buffer; scopes are small in the regime we target.
pub type ScopeBuf<T> = SmallVec<[T; 32]>;

const THRESHOLD_EPS: f64 = 1e-9;

fn ceil_count(x: f64) -> usize {
    (x - THRESHOLD_EPS).ceil().max(0.0) as usize
}

/// Boolean clause requiring at least `min_true` true literals.
///
/// Literal `i` is true when scope variable `i` takes value index 1, or
/// value index 0 if it is negated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustSat {
    negated: Vec<bool>,
    min_true: usize,
    delta: f64,
}

impl RobustSat {
    /// Clause satisfied by at least `⌈delta·k⌉` true literals.
    pub fn new(negated: Vec<bool>, delta: f64) -> Result<Self> {
        if negated.is_empty() {
            return Err(Error::InvalidFormula("robust_sat clause with no literals".into()));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidFormula(format!(
                "robust_sat delta {delta} outside (0, 1]"
            )));
        }
        let min_true = ceil_count(delta * negated.len() as f64).max(1);
        Ok(RobustSat {
            negated,
            min_true,
            delta,
        })
    }

    /// Ordinary clause: one true literal suffices.
    pub fn plain(negated: Vec<bool>) -> Result<Self> {
        let k = negated.len();
        let mut c = RobustSat::new(negated, 1.0 / k.max(1) as f64)?;
        c.min_true = 1;
        Ok(c)
    }

    pub fn negated(&self) -> &[bool] {
        &self.negated
    }

    pub fn min_true(&self) -> usize {
        self.min_true
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    #[inline]
    fn literal_true(&self, pos: usize, value: u32) -> bool {
        (value == 1) != self.negated[pos]
    }

    fn counts(&self, view: &[Slot]) -> (usize, usize) {
        let mut true_assigned = 0;
        let mut free = 0;
        for (i, s) in view.iter().enumerate() {
            match s {
                Slot::Value(x) => true_assigned += self.literal_true(i, *x) as usize,
                _ => free += 1,
            }
        }
        (true_assigned, free)
    }
}

/// Hyperedge in a `colors`-coloring forbidding `max_same` or more vertices of one color.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustColoring {
    arity: usize,
    colors: u32,
    max_same: usize,
    /// Per-color counts already fixed by a substitution.
    base: Vec<u32>,
    delta: f64,
    closed_form: bool,
}

impl RobustColoring {
    /// Edge on `arity` vertices forbidding `⌈(1-delta)·arity⌉` same-colored vertices.
    pub fn new(arity: usize, colors: u32, delta: f64) -> Result<Self> {
        if arity == 0 {
            return Err(Error::InvalidFormula("robust_coloring edge with no vertices".into()));
        }
        if colors < 2 {
            return Err(Error::InvalidFormula("robust_coloring needs at least 2 colors".into()));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidFormula(format!(
                "robust_coloring delta {delta} outside (0, 1)"
            )));
        }
        let max_same = ceil_count((1.0 - delta) * arity as f64).max(1);
        Ok(RobustColoring {
            arity,
            colors,
            max_same,
            base: vec![0; colors as usize],
            delta,
            closed_form: 2 * max_same > arity,
        })
    }

    pub fn colors(&self) -> u32 {
        self.colors
    }

    pub fn max_same(&self) -> usize {
        self.max_same
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Whether the per-color violation events are disjoint, which makes the
    /// violation probability a plain sum of binomial tails.
    pub fn has_closed_form(&self) -> bool {
        self.closed_form
    }

    fn counts(&self, view: &[Slot]) -> (ScopeBuf<u32>, usize) {
        let mut per_color: ScopeBuf<u32> = self.base.iter().copied().collect();
        let mut free = 0;
        for s in view {
            match s {
                Slot::Value(x) => per_color[*x as usize] += 1,
                _ => free += 1,
            }
        }
        (per_color, free)
    }
}

/// Explicit list of forbidden scope assignments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    dims: Vec<u32>,
    /// Sorted, distinct.
    forbidden: Vec<Vec<u32>>,
}

impl Table {
    pub fn new(dims: Vec<u32>, mut forbidden: Vec<Vec<u32>>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidFormula("table constraint with empty scope".into()));
        }
        for row in &forbidden {
            if row.len() != dims.len() {
                return Err(Error::InvalidFormula(format!(
                    "table row of length {} for scope of size {}",
                    row.len(),
                    dims.len()
                )));
            }
            if row.iter().zip(&dims).any(|(x, d)| x >= d) {
                return Err(Error::InvalidFormula(format!(
                    "table row {row:?} outside domain bounds {dims:?}"
                )));
            }
        }
        forbidden.sort();
        let before = forbidden.len();
        forbidden.dedup();
        if forbidden.len() != before {
            return Err(Error::InvalidFormula("duplicate forbidden table rows".into()));
        }
        Ok(Table { dims, forbidden })
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn forbidden(&self) -> &[Vec<u32>] {
        &self.forbidden
    }

    fn consistent(row: &[u32], view: &[Slot]) -> bool {
        row.iter().zip(view).all(|(x, s)| match s {
            Slot::Value(y) => x == y,
            _ => true,
        })
    }
}

/// Family payload of a constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConstraintKind {
    RobustSat(RobustSat),
    RobustColoring(RobustColoring),
    Table(Table),
}

impl ConstraintKind {
    pub fn arity(&self) -> usize {
        match self {
            ConstraintKind::RobustSat(c) => c.negated.len(),
            ConstraintKind::RobustColoring(c) => c.arity,
            ConstraintKind::Table(c) => c.dims.len(),
        }
    }

    /// True iff every completion of the unassigned positions satisfies the constraint.
    pub fn is_satisfied(&self, view: &[Slot]) -> bool {
        match self {
            ConstraintKind::RobustSat(c) => c.counts(view).0 >= c.min_true,
            ConstraintKind::RobustColoring(c) => {
                let (per_color, free) = c.counts(view);
                per_color
                    .iter()
                    .all(|&n| (n as usize) + free < c.max_same)
            }
            // Satisfied iff no forbidden row is reachable from the assigned positions.
            ConstraintKind::Table(c) => !c.forbidden.iter().any(|row| Table::consistent(row, view)),
        }
    }

    /// True iff the fully assigned scope values violate the constraint.
    pub fn is_violated_by(&self, values: &[u32]) -> bool {
        match self {
            ConstraintKind::RobustSat(c) => {
                let t = values
                    .iter()
                    .enumerate()
                    .filter(|(i, &x)| c.literal_true(*i, x))
                    .count();
                t < c.min_true
            }
            ConstraintKind::RobustColoring(c) => {
                let mut per_color: ScopeBuf<u32> = c.base.iter().copied().collect();
                for &x in values {
                    per_color[x as usize] += 1;
                }
                per_color.iter().any(|&n| n as usize >= c.max_same)
            }
            ConstraintKind::Table(c) => c
                .forbidden
                .binary_search_by(|row| row.as_slice().cmp(values))
                .is_ok(),
        }
    }

    /// Probability that a uniform completion of the view violates the constraint,
    /// or `None` when no closed form is available.
    pub fn violation_probability(&self, view: &[Slot]) -> Option<f64> {
        match self {
            ConstraintKind::RobustSat(c) => {
                let (a, m) = c.counts(view);
                let t = c.min_true as i64 - 1 - a as i64;
                Some(binomial_tail(m as u64, t, 0.5))
            }
            ConstraintKind::RobustColoring(c) => {
                if !c.closed_form {
                    return None;
                }
                let (per_color, m) = c.counts(view);
                let p = 1.0 / c.colors as f64;
                let total = per_color
                    .iter()
                    .map(|&n| binomial_upper_tail(m as u64, c.max_same as i64 - n as i64, p))
                    .sum::<f64>();
                Some(total.min(1.0))
            }
            ConstraintKind::Table(c) => {
                let hits = c
                    .forbidden
                    .iter()
                    .filter(|row| Table::consistent(row, view))
                    .count();
                if hits == 0 {
                    return Some(0.0);
                }
                let completions: f64 = c
                    .dims
                    .iter()
                    .zip(view)
                    .filter(|(_, s)| !s.is_assigned())
                    .map(|(d, _)| *d as f64)
                    .product();
                Some(hits as f64 / completions)
            }
        }
    }

    /// Substitute the assigned positions of `view`; returns the reduced payload
    /// and the positions (into the original scope) that it still ranges over.
    pub fn restrict(&self, view: &[Slot]) -> (ConstraintKind, Vec<usize>) {
        let kept: Vec<usize> = view
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.is_assigned())
            .map(|(i, _)| i)
            .collect();
        let kind = match self {
            ConstraintKind::RobustSat(c) => {
                let (a, _) = c.counts(view);
                ConstraintKind::RobustSat(RobustSat {
                    negated: kept.iter().map(|&i| c.negated[i]).collect(),
                    min_true: c.min_true.saturating_sub(a),
                    delta: c.delta,
                })
            }
            ConstraintKind::RobustColoring(c) => {
                let (per_color, _) = c.counts(view);
                ConstraintKind::RobustColoring(RobustColoring {
                    arity: kept.len(),
                    colors: c.colors,
                    max_same: c.max_same,
                    base: per_color.to_vec(),
                    delta: c.delta,
                    closed_form: c.closed_form,
                })
            }
            ConstraintKind::Table(c) => ConstraintKind::Table(Table {
                dims: kept.iter().map(|&i| c.dims[i]).collect(),
                forbidden: c
                    .forbidden
                    .iter()
                    .filter(|row| Table::consistent(row, view))
                    .map(|row| kept.iter().map(|&i| row[i]).collect())
                    .collect(),
            }),
        };
        (kind, kept)
    }
}

/// A constraint: its scope `vbl(c)` and family payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub scope: Vec<usize>,
    pub kind: ConstraintKind,
}

impl Constraint {
    #[inline]
    pub fn view(&self, sigma: &PartialAssignment) -> ScopeBuf<Slot> {
        self.scope.iter().map(|&v| sigma.get(v)).collect()
    }

    /// Evaluation oracle: is `c` satisfied by every extension of `σ`?
    pub fn evaluate_satisfied(&self, sigma: &PartialAssignment) -> bool {
        self.kind.is_satisfied(&self.view(sigma))
    }

    /// `P[¬c | σ]` in closed form, or `None`.
    pub fn exact_violation_probability(&self, sigma: &PartialAssignment) -> Option<f64> {
        self.kind.violation_probability(&self.view(sigma))
    }
}

/// `P[Bin(m, p) ≤ t]`.
pub fn binomial_tail(m: u64, t: i64, p: f64) -> f64 {
    if t < 0 {
        return 0.0;
    }
    if t as u64 >= m {
        return 1.0;
    }
    binomial_range(m, 0, t as u64, p).min(1.0)
}

/// `P[Bin(m, p) ≥ s]`.
pub fn binomial_upper_tail(m: u64, s: i64, p: f64) -> f64 {
    if s <= 0 {
        return 1.0;
    }
    if s as u64 > m {
        return 0.0;
    }
    binomial_range(m, s as u64, m, p).min(1.0)
}

/// `Σ_{j=lo}^{hi} P[Bin(m, p) = j]`.
fn binomial_range(m: u64, lo: u64, hi: u64, p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    if p <= 0.0 {
        return if lo == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if hi >= m { 1.0 } else { 0.0 };
    }
    if m > 1000 {
        let (lp, lq) = (p.ln(), (1.0 - p).ln());
        let lm = statrs::function::gamma::ln_gamma(m as f64 + 1.0);
        return (lo..=hi)
            .map(|j| {
                let lc = lm
                    - statrs::function::gamma::ln_gamma(j as f64 + 1.0)
                    - statrs::function::gamma::ln_gamma((m - j) as f64 + 1.0);
                (lc + j as f64 * lp + (m - j) as f64 * lq).exp()
            })
            .sum();
    }
    let ratio = p / (1.0 - p);
    let mut term = (1.0 - p).powi(m as i32);
    let mut sum = 0.0;
    for j in 0..=hi {
        if j >= lo {
            sum += term;
        }
        term *= (m - j) as f64 / (j + 1) as f64 * ratio;
    }
    sum
}
