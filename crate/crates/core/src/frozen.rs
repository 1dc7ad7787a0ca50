//! Frozen-constraint oracle: exact threshold test or memoized Monte-Carlo estimate.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::{PartialAssignment, Slot};
use crate::constraint::ScopeBuf;
use crate::error::Result;
use crate::formula::CspFormula;

/// Relative half-width of the Monte-Carlo decision band.
pub const MC_DELTA: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FrozenMode {
    /// Frozen iff `P[¬c | σ] > p'`, computed in closed form.
    Exact,
    /// Frozen iff `Z/N > 0.995·p'` over `trials` uniform completions.
    MonteCarlo { epsilon: f64, trials: u64 },
}

impl FrozenMode {
    /// Monte-Carlo mode with the trial count derived from the target bias `epsilon`.
    pub fn monte_carlo(formula: &CspFormula, p_prime: f64, epsilon: f64) -> Self {
        FrozenMode::MonteCarlo {
            epsilon,
            trials: monte_carlo_trials(
                formula.width(),
                formula.degree(),
                formula.num_vars(),
                p_prime,
                epsilon,
            ),
        }
    }
}

/// `N = ⌈ln(4·10³·k·Δ⁷·n·ε⁻²) / (0.33·p'·δ²)⌉`.
pub fn monte_carlo_trials(k: usize, degree: usize, n: usize, p_prime: f64, epsilon: f64) -> u64 {
    let arg = 4e3 * k as f64 * (degree as f64).powi(7) * n.max(1) as f64 / (epsilon * epsilon);
    let n_trials = arg.ln() / (0.33 * p_prime * MC_DELTA * MC_DELTA);
    (n_trials.ceil() as u64).max(1)
}

/// Chernoff bound on the probability that one Monte-Carlo query lands on the wrong
/// side: `2·exp(−(δ²/3)·0.99·p'·N)`.
pub fn misclassification_bound(p_prime: f64, trials: u64) -> f64 {
    2.0 * (-(MC_DELTA * MC_DELTA / 3.0) * 0.99 * p_prime * trials as f64).exp()
}

/// Scope key: value index, `q_v` for `Star`, `q_v + 1` for `Unset`.
pub type MemoKey = ScopeBuf<u32>;

/// Per-run frozen oracle. Monte-Carlo answers are memoized per constraint.
#[derive(Debug, Clone)]
pub struct FrozenOracle {
    mode: FrozenMode,
    p_prime: f64,
    memo: Vec<HashMap<MemoKey, bool>>,
    queries: u64,
    mc_misses: u64,
}

impl FrozenOracle {
    pub fn new(formula: &CspFormula, p_prime: f64, mode: FrozenMode) -> Self {
        let memo = match mode {
            FrozenMode::Exact => Vec::new(),
            FrozenMode::MonteCarlo { .. } => vec![HashMap::new(); formula.num_constraints()],
        };
        FrozenOracle {
            mode,
            p_prime,
            memo,
            queries: 0,
            mc_misses: 0,
        }
    }

    pub fn mode(&self) -> FrozenMode {
        self.mode
    }

    pub fn p_prime(&self) -> f64 {
        self.p_prime
    }

    /// Total frozen queries answered.
    pub fn queries(&self) -> u64 {
        self.queries
    }

    /// Monte-Carlo queries that missed the memo and ran trials.
    pub fn memo_misses(&self) -> u64 {
        self.mc_misses
    }

    /// Clear the memo; call between independent runs.
    pub fn reset(&mut self) {
        for m in &mut self.memo {
            m.clear();
        }
    }

    pub fn memo_key(formula: &CspFormula, c: usize, sigma: &PartialAssignment) -> MemoKey {
        formula
            .constraint(c)
            .scope
            .iter()
            .map(|&v| match sigma.get(v) {
                Slot::Value(x) => x,
                Slot::Star => formula.domain_size(v),
                Slot::Unset => formula.domain_size(v) + 1,
            })
            .collect()
    }

    /// Is `c` σ-frozen?
    pub fn is_frozen<R: Rng + ?Sized>(
        &mut self,
        formula: &CspFormula,
        c: usize,
        sigma: &PartialAssignment,
        rng: &mut R,
    ) -> Result<bool> {
        self.queries += 1;
        match self.mode {
            FrozenMode::Exact => Ok(formula.violation_probability(c, sigma)? > self.p_prime),
            FrozenMode::MonteCarlo { trials, .. } => {
                let key = Self::memo_key(formula, c, sigma);
                if let Some(&ans) = self.memo[c].get(&key) {
                    return Ok(ans);
                }
                self.mc_misses += 1;
                let con = formula.constraint(c);
                let view = con.view(sigma);
                let dims: ScopeBuf<u32> = con.scope.iter().map(|&v| formula.domain_size(v)).collect();
                let mut values: ScopeBuf<u32> = view.iter().map(|s| s.value().unwrap_or(0)).collect();
                let free: ScopeBuf<usize> =
                    (0..view.len()).filter(|&i| !view[i].is_assigned()).collect();
                let mut violations = 0u64;
                for _ in 0..trials {
                    for &i in &free {
                        values[i] = rng.random_range(0..dims[i]);
                    }
                    violations += con.kind.is_violated_by(&values) as u64;
                }
                let ans = violations as f64 / trials as f64 > (1.0 - MC_DELTA) * self.p_prime;
                self.memo[c].insert(key, ans);
                Ok(ans)
            }
        }
    }

    /// Is `v` σ-fixed: accessed, or in the scope of a σ-frozen constraint?
    pub fn is_fixed<R: Rng + ?Sized>(
        &mut self,
        formula: &CspFormula,
        v: usize,
        sigma: &PartialAssignment,
        rng: &mut R,
    ) -> Result<bool> {
        if sigma.get(v).is_accessed() {
            return Ok(true);
        }
        for &c in formula.constraints_of(v) {
            if self.is_frozen(formula, c, sigma, rng)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}
