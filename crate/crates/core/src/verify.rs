//! Ground truth by enumeration, goodness-of-fit testing, the path-length tail
//! diagnostic, and a brute-force invariant checker for the sampler.

use std::collections::HashMap;
use std::f64::consts::E;
use std::rc::Rc;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::assignment::{PartialAssignment, Slot};
use crate::error::{Error, Result};
use crate::formula::CspFormula;
use crate::params::LllParameters;
use crate::rng::stream;
use crate::sampler::{Observer, Sampler, SamplerConfig};

pub const DEFAULT_ENUM_CAP: u128 = 1 << 22;

/// Uniform distribution over the solutions of `Φ` consistent with a partial assignment.
///
/// Everything is kept as integer counts; probabilities are `count / num_solutions`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    dims: Vec<u32>,
    /// Mixed-radix codes of every solution, ascending.
    solutions: Vec<u64>,
    /// `marginal_counts[v][x]` = number of solutions with `v = x`.
    marginal_counts: Vec<Vec<u64>>,
}

impl ExactDistribution {
    pub fn num_solutions(&self) -> u64 {
        self.solutions.len() as u64
    }

    pub fn solutions(&self) -> &[u64] {
        &self.solutions
    }

    pub fn marginal_counts(&self, v: usize) -> &[u64] {
        &self.marginal_counts[v]
    }

    /// `μ_v(x)` for every `x`; empty-support distributions give NaN.
    pub fn marginal(&self, v: usize) -> Vec<f64> {
        let total = self.num_solutions() as f64;
        self.marginal_counts[v].iter().map(|&c| c as f64 / total).collect()
    }

    /// Mixed-radix code of a full assignment, variable 0 least significant.
    pub fn encode(&self, values: &[u32]) -> u64 {
        values
            .iter()
            .zip(&self.dims)
            .rev()
            .fold(0u64, |acc, (&x, &d)| acc * d as u64 + x as u64)
    }

    pub fn decode(&self, mut code: u64) -> Vec<u32> {
        self.dims
            .iter()
            .map(|&d| {
                let x = (code % d as u64) as u32;
                code /= d as u64;
                x
            })
            .collect()
    }
}

/// Solution count and per-variable value counts of `Φ` given `σ`, without
/// the solution list.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalCounts {
    pub solutions: u64,
    pub marginal_counts: Vec<Vec<u64>>,
}

impl ConditionalCounts {
    pub fn marginal(&self, v: usize) -> Vec<f64> {
        let total = self.solutions as f64;
        self.marginal_counts[v].iter().map(|&c| c as f64 / total).collect()
    }
}

/// Visit every solution extending `σ`'s assigned values. `Star` counts as unassigned.
fn enumerate(
    formula: &CspFormula,
    sigma: &PartialAssignment,
    cap: u128,
    mut visit: impl FnMut(&[u32]),
) -> Result<()> {
    let n = formula.num_vars();
    let dims = formula.domain_sizes();
    let free: Vec<usize> = (0..n).filter(|&v| !sigma.get(v).is_assigned()).collect();
    let size = free
        .iter()
        .try_fold(1u128, |acc, &v| acc.checked_mul(dims[v] as u128))
        .unwrap_or(u128::MAX);
    if size > cap {
        return Err(Error::TooLarge { size, cap });
    }
    let mut values: Vec<u32> = sigma.slots().iter().map(|s| s.value().unwrap_or(0)).collect();
    // odometer over the free variables
    loop {
        if formula.first_violated(&values).is_none() {
            visit(&values);
        }
        let mut i = 0;
        loop {
            if i == free.len() {
                return Ok(());
            }
            let v = free[i];
            values[v] += 1;
            if values[v] < dims[v] {
                break;
            }
            values[v] = 0;
            i += 1;
        }
    }
}

/// The uniform distribution over solutions extending `σ`, with its solution list.
pub fn brute_force(formula: &CspFormula, sigma: &PartialAssignment, cap: u128) -> Result<ExactDistribution> {
    let dims = formula.domain_sizes().to_vec();
    let full = dims.iter().try_fold(1u128, |acc, &d| acc.checked_mul(d as u128));
    if full.is_none_or(|f| f > u64::MAX as u128) {
        return Err(Error::TooLarge {
            size: full.unwrap_or(u128::MAX),
            cap: u64::MAX as u128,
        });
    }
    let mut out = ExactDistribution {
        marginal_counts: dims.iter().map(|&d| vec![0; d as usize]).collect(),
        dims,
        solutions: Vec::new(),
    };
    enumerate(formula, sigma, cap, |values| {
        out.solutions.push(out.encode(values));
        for (v, &x) in values.iter().enumerate() {
            out.marginal_counts[v][x as usize] += 1;
        }
    })?;
    out.solutions.sort_unstable();
    Ok(out)
}

/// Counts only; memory does not grow with the number of solutions.
pub fn conditional_counts(
    formula: &CspFormula,
    sigma: &PartialAssignment,
    cap: u128,
) -> Result<ConditionalCounts> {
    let mut out = ConditionalCounts {
        solutions: 0,
        marginal_counts: formula.domain_sizes().iter().map(|&d| vec![0; d as usize]).collect(),
    };
    enumerate(formula, sigma, cap, |values| {
        out.solutions += 1;
        for (v, &x) in values.iter().enumerate() {
            out.marginal_counts[v][x as usize] += 1;
        }
    })?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GofResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub pass: bool,
    /// Cells after pooling.
    pub cells: usize,
}

/// Pearson chi-squared test of `observed` counts against `probs`.
///
/// Cells with expected count below 5 are pooled, smallest expectation first.
/// Any observation in a zero-probability cell fails outright.
pub fn gof_test(observed: &[u64], probs: &[f64], significance: f64) -> GofResult {
    assert_eq!(observed.len(), probs.len());
    let n: u64 = observed.iter().sum();
    if observed.iter().zip(probs).any(|(&o, &p)| p <= 0.0 && o > 0) {
        return GofResult {
            statistic: f64::INFINITY,
            dof: 0,
            p_value: 0.0,
            pass: false,
            cells: 0,
        };
    }
    let mut order: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] > 0.0).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));
    let mut cells: Vec<(f64, u64)> = Vec::new();
    let mut acc = (0.0, 0u64);
    for &i in &order {
        acc.0 += probs[i] * n as f64;
        acc.1 += observed[i];
        if acc.0 >= 5.0 {
            cells.push(acc);
            acc = (0.0, 0);
        }
    }
    if acc.0 > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => cells.push(acc),
        }
    }
    let statistic: f64 = cells
        .iter()
        .map(|&(e, o)| (o as f64 - e).powi(2) / e)
        .sum();
    if cells.len() < 2 {
        return GofResult {
            statistic,
            dof: 0,
            p_value: 1.0,
            pass: true,
            cells: cells.len(),
        };
    }
    let dof = cells.len() - 1;
    let p_value = ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .sf(statistic);
    GofResult {
        statistic,
        dof,
        p_value,
        pass: p_value >= significance,
        cells: cells.len(),
    }
}

/// Chi-squared test of full-assignment samples against the uniform law on `exact`'s solutions.
pub fn gof_joint<'a>(
    exact: &ExactDistribution,
    samples: impl IntoIterator<Item = &'a [u32]>,
    significance: f64,
) -> GofResult {
    let index: HashMap<u64, usize> = exact
        .solutions()
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i))
        .collect();
    let k = exact.solutions().len();
    // one extra zero-probability cell for non-solutions
    let mut observed = vec![0u64; k + 1];
    for s in samples {
        let i = index.get(&exact.encode(s)).copied().unwrap_or(k);
        observed[i] += 1;
    }
    let mut probs = vec![1.0 / k as f64; k + 1];
    probs[k] = 0.0;
    gof_test(&observed, &probs, significance)
}

/// One row of the path-length tail table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRow {
    pub i: u32,
    pub threshold: u64,
    pub empirical: f64,
    pub bound: f64,
    /// Two-sided Hoeffding half-width at confidence `1 − 10⁻³`.
    pub band: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub calls: u64,
    pub precondition_lhs: f64,
    pub precondition_rhs: f64,
    pub rows: Vec<TailRow>,
    pub mean_path_length: f64,
    pub max_path_length: u64,
}

/// `8e·p·Δ³ ≤ 0.99·p'`.
pub fn tail_precondition(params: &LllParameters) -> (f64, f64, bool) {
    let lhs = 8.0 * E * params.p_max * (params.degree as f64).powi(3);
    let rhs = 0.99 * params.p_prime;
    (lhs, rhs, lhs <= rhs)
}

/// Run `calls` marginal samples (variable `i mod n` on stream `i`) and compare
/// `Pr[ℓ ≥ i·k·Δ²]` with `Δ·2⁻ⁱ` for `i = 0..=max_i`.
pub fn tail_diagnostic(
    formula: &CspFormula,
    config: &SamplerConfig,
    calls: u64,
    seed: u64,
    max_i: u32,
) -> Result<TailReport> {
    let (lhs, rhs, ok) = tail_precondition(&config.params);
    if !ok {
        return Err(Error::ConditionViolated {
            inequality: "8e*p*Delta^3 <= 0.99p'",
            lhs,
            rhs,
        });
    }
    let n = formula.num_vars() as u64;
    let mut lengths = Vec::with_capacity(calls as usize);
    let mut sampler = Sampler::new(formula, config, stream(seed, 0));
    for i in 0..calls {
        sampler.reset(stream(seed, i));
        sampler.marginal((i % n) as usize)?;
        lengths.push(sampler.stats().path_lengths.last().copied().unwrap_or(0));
    }
    let k = formula.width() as u64;
    let d = formula.degree() as u64;
    let band = ((2.0f64 / 1e-3).ln() / (2.0 * calls as f64)).sqrt();
    let rows = (0..=max_i)
        .map(|i| {
            let threshold = i as u64 * k * d * d;
            let hits = lengths.iter().filter(|&&l| l >= threshold).count();
            let empirical = hits as f64 / calls as f64;
            let bound = d as f64 * 2f64.powi(-(i as i32));
            TailRow {
                i,
                threshold,
                empirical,
                bound,
                band,
                within: empirical <= bound + band,
            }
        })
        .collect();
    Ok(TailReport {
        calls,
        precondition_lhs: lhs,
        precondition_rhs: rhs,
        rows,
        mean_path_length: lengths.iter().sum::<u64>() as f64 / calls.max(1) as f64,
        max_path_length: lengths.iter().copied().max().unwrap_or(0),
    })
}

/// A recorded invariant failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub site: &'static str,
    pub detail: String,
}

/// Observer that re-checks the sampler's invariants by brute force.
///
/// Conditional marginals are enumerated once per distinct set of assigned
/// values and cached. Meant for instances small enough to enumerate.
pub struct InvariantChecker {
    params: LllParameters,
    cache: HashMap<Vec<u32>, Option<Rc<ConditionalCounts>>>,
    violations: Vec<Violation>,
    violation_count: u64,
    checks: u64,
    cap: u128,
}

const MAX_STORED_VIOLATIONS: usize = 64;
const SLACK: f64 = 1e-12;

impl InvariantChecker {
    pub fn new(params: LllParameters) -> Self {
        InvariantChecker {
            params,
            cache: HashMap::new(),
            violations: Vec::new(),
            violation_count: 0,
            checks: 0,
            cap: DEFAULT_ENUM_CAP,
        }
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn violation_count(&self) -> u64 {
        self.violation_count
    }

    /// Individual inequalities checked.
    pub fn checks(&self) -> u64 {
        self.checks
    }

    pub fn cached_assignments(&self) -> usize {
        self.cache.len()
    }

    /// Merge the tallies of another checker (e.g. one per worker).
    pub fn absorb(&mut self, other: InvariantChecker) {
        self.checks += other.checks;
        self.violation_count += other.violation_count;
        for v in other.violations {
            if self.violations.len() < MAX_STORED_VIOLATIONS {
                self.violations.push(v);
            }
        }
    }

    fn record(&mut self, ok: bool, site: &'static str, detail: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.violation_count += 1;
            if self.violations.len() < MAX_STORED_VIOLATIONS {
                self.violations.push(Violation {
                    site,
                    detail: detail(),
                });
            }
        }
    }

    fn exact(&mut self, formula: &CspFormula, sigma: &PartialAssignment) -> Option<Rc<ConditionalCounts>> {
        let key: Vec<u32> = sigma
            .slots()
            .iter()
            .map(|s| s.value().unwrap_or(u32::MAX))
            .collect();
        if let Some(d) = self.cache.get(&key) {
            return d.clone();
        }
        let d = conditional_counts(formula, sigma, self.cap).ok().map(Rc::new);
        self.cache.insert(key, d.clone());
        d
    }

    fn check_pq_bound(&mut self, formula: &CspFormula, sigma: &PartialAssignment, site: &'static str) {
        let bound = self.params.p_prime * self.params.q as f64;
        for c in 0..formula.num_constraints() {
            let p = formula.constraint(c).exact_violation_probability(sigma);
            match p {
                Some(p) => self.record(p <= bound + SLACK, site, || {
                    format!("P[not c{c} | sigma] = {p:.6e} exceeds p'q = {bound:.6e}")
                }),
                None => self.record(false, site, || format!("c{c} has no closed form")),
            }
        }
    }

    fn is_fixed_exact(&self, formula: &CspFormula, sigma: &PartialAssignment, v: usize) -> bool {
        sigma.get(v).is_accessed()
            || formula.constraints_of(v).iter().any(|&c| {
                formula
                    .constraint(c)
                    .exact_violation_probability(sigma)
                    .is_some_and(|p| p > self.params.p_prime)
            })
    }

    fn check_local_uniformity(
        &mut self,
        formula: &CspFormula,
        sigma: &PartialAssignment,
        v: usize,
        site: &'static str,
    ) {
        let Some(exact) = self.exact(formula, sigma) else {
            self.record(false, site, || "enumeration over cap".into());
            return;
        };
        if exact.solutions == 0 {
            self.record(false, site, || "sigma is infeasible".into());
            return;
        }
        let theta = self.params.theta(formula.domain_size(v));
        let (lo, hi) = (theta + self.params.zeta, theta + 2.0 * self.params.eta + self.params.zeta);
        for (x, mu) in exact.marginal(v).into_iter().enumerate() {
            self.record(mu >= lo - SLACK && mu <= hi + SLACK, site, || {
                format!("mu_{v}({x}) = {mu:.6} outside [{lo:.6}, {hi:.6}]")
            });
        }
    }
}

impl Observer for InvariantChecker {
    fn main_step(&mut self, formula: &CspFormula, sigma: &PartialAssignment) {
        self.check_pq_bound(formula, sigma, "main loop p'q bound");
    }

    fn margin_sample_entry(&mut self, formula: &CspFormula, sigma: &PartialAssignment, v: usize) {
        const SITE: &str = "margin_sample entry";
        let no_stars = sigma.stars().is_empty();
        self.record(no_stars && sigma.get(v) == Slot::Unset, SITE, || {
            format!("v{v} is {:?}, {} starred variables", sigma.get(v), sigma.stars().len())
        });
        let fixed = self.is_fixed_exact(formula, sigma, v);
        self.record(!fixed, SITE, || format!("v{v} is sigma-fixed"));
        self.check_pq_bound(formula, sigma, SITE);
        self.check_local_uniformity(formula, sigma, v, SITE);
    }

    fn overflow_entry(&mut self, formula: &CspFormula, sigma: &PartialAssignment, v: usize) {
        const SITE: &str = "margin_overflow entry";
        self.record(sigma.get(v) == Slot::Star, SITE, || {
            format!("v{v} is {:?}, expected Star", sigma.get(v))
        });
        self.check_pq_bound(formula, sigma, SITE);
        self.check_local_uniformity(formula, sigma, v, SITE);
    }

    fn next_var(&mut self, formula: &CspFormula, sigma: &PartialAssignment, u: Option<usize>) {
        const SITE: &str = "next_var result";
        if let Some(u) = u {
            let fixed = self.is_fixed_exact(formula, sigma, u);
            self.record(!fixed, SITE, || format!("returned sigma-fixed v{u}"));
            self.check_local_uniformity(formula, sigma, u, SITE);
        }
    }
}
