//! The recursive marginal sampler and the full-assignment sampler built on it.

mod next_var;
mod observer;

pub use observer::{NoObserver, Observer};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::{Mark, PartialAssignment, Slot};
use crate::bernoulli::{margin_overflow_draw, DrawBudget, DEFAULT_DRAW_BUDGET};
use crate::error::{Error, Result};
use crate::formula::CspFormula;
use crate::frozen::{FrozenMode, FrozenOracle};
use crate::params::LllParameters;
use crate::rejection::{rejection_sampling, DEFAULT_TRIAL_CAP};
use crate::rng::uniform53;

pub const DEFAULT_RECURSION_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub params: LllParameters,
    pub frozen: FrozenMode,
    /// Per-component trial cap for rejection sampling.
    pub trial_cap: u64,
    /// Coin-toss cap per margin-overflow draw.
    pub draw_budget: u64,
    /// Cap on the path length of one margin-sample call.
    pub recursion_limit: u64,
}

impl SamplerConfig {
    pub fn new(params: LllParameters, frozen: FrozenMode) -> Self {
        SamplerConfig {
            params,
            frozen,
            trial_cap: DEFAULT_TRIAL_CAP,
            draw_budget: DEFAULT_DRAW_BUDGET,
            recursion_limit: DEFAULT_RECURSION_LIMIT,
        }
    }
}

/// Counters for one sampling run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunStats {
    /// Path length `ℓ` of each margin-sample call that entered the overflow branch
    /// or the zone of local uniformity (the latter record 0).
    pub path_lengths: Vec<u64>,
    /// Evaluation-oracle queries made by `next_var`.
    pub eval_queries: u64,
    /// Frozen-oracle queries, all call sites.
    pub frozen_queries: u64,
    pub rejection_trials: u64,
    /// Constraint count of each component handed to the Bernoulli factory or
    /// to the final rejection step.
    pub component_sizes: Vec<usize>,
    pub overflow_draws: u64,
    /// Leaf coin tosses inside the Bernoulli factories.
    pub coin_draws: u64,
}

/// One sampling run's mutable state: `σ`, its journal, the frozen-oracle memo,
/// the RNG stream and scratch space for `next_var`.
pub struct Sampler<'a, R, O = NoObserver> {
    formula: &'a CspFormula,
    config: &'a SamplerConfig,
    oracle: FrozenOracle,
    sigma: PartialAssignment,
    rng: R,
    stats: RunStats,
    observer: O,
    scratch: next_var::Scratch,
}

impl<'a, R: Rng> Sampler<'a, R, NoObserver> {
    pub fn new(formula: &'a CspFormula, config: &'a SamplerConfig, rng: R) -> Self {
        Sampler::with_observer(formula, config, rng, NoObserver)
    }
}

impl<'a, R: Rng, O: Observer> Sampler<'a, R, O> {
    pub fn with_observer(
        formula: &'a CspFormula,
        config: &'a SamplerConfig,
        rng: R,
        observer: O,
    ) -> Self {
        Sampler {
            formula,
            config,
            oracle: FrozenOracle::new(formula, config.params.p_prime, config.frozen),
            sigma: PartialAssignment::new(formula.num_vars()),
            rng,
            stats: RunStats::default(),
            observer,
            scratch: next_var::Scratch::new(formula),
        }
    }

    /// Start a fresh run on a new stream, keeping allocations.
    pub fn reset(&mut self, rng: R) {
        self.rng = rng;
        self.sigma = PartialAssignment::new(self.formula.num_vars());
        self.oracle.reset();
        self.stats = RunStats::default();
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    pub fn take_stats(&mut self) -> RunStats {
        std::mem::take(&mut self.stats)
    }

    pub fn observer(&self) -> &O {
        &self.observer
    }

    pub fn observer_mut(&mut self) -> &mut O {
        &mut self.observer
    }

    pub fn into_observer(self) -> O {
        self.observer
    }

    pub fn sigma(&self) -> &PartialAssignment {
        &self.sigma
    }

    /// Replace `σ`; the journal starts empty.
    pub fn set_sigma(&mut self, sigma: PartialAssignment) {
        assert_eq!(sigma.len(), self.formula.num_vars());
        self.sigma = sigma;
    }

    fn sync_query_counts(&mut self) {
        self.stats.frozen_queries = self.oracle.queries();
    }

    pub fn is_fixed(&mut self, v: usize) -> Result<bool> {
        let r = self
            .oracle
            .is_fixed(self.formula, v, &self.sigma, &mut self.rng);
        self.sync_query_counts();
        r
    }

    /// Draw a uniform satisfying assignment (value index per variable).
    pub fn sample(&mut self) -> Result<Vec<u32>> {
        let n = self.formula.num_vars();
        self.sigma = PartialAssignment::new(n);
        for v in 0..n {
            self.observer.main_step(self.formula, &self.sigma);
            if !self.is_fixed(v)? {
                let x = self.margin_sample(v)?;
                self.sigma.set(v, Slot::Value(x));
            }
        }
        self.observer.main_step(self.formula, &self.sigma);
        self.sigma.commit();
        let rest: Vec<usize> = (0..n).filter(|&v| !self.sigma.get(v).is_assigned()).collect();
        if !rest.is_empty() {
            let out = rejection_sampling(
                self.formula,
                &self.sigma,
                &rest,
                &mut self.rng,
                self.config.trial_cap,
            )?;
            self.stats.rejection_trials += out.trials.iter().sum::<u64>();
            self.stats.component_sizes.extend(out.component_sizes);
            for (v, x) in out.values {
                self.sigma.set(v, Slot::Value(x));
            }
            self.sigma.commit();
        }
        let values: Vec<u32> = self
            .sigma
            .slots()
            .iter()
            .map(|s| s.value().expect("every variable assigned"))
            .collect();
        if let Some(c) = self.formula.first_violated(&values) {
            return Err(Error::Unsatisfiable { constraint: c });
        }
        Ok(values)
    }

    /// Draw `x ~ μ_v` from the empty assignment.
    ///
    /// A variable that is already fixed at the empty assignment sits in a
    /// constraint that is frozen from the start; as in the full sampler, such
    /// variables are drawn by rejection sampling instead.
    pub fn marginal(&mut self, v: usize) -> Result<u32> {
        self.sigma = PartialAssignment::new(self.formula.num_vars());
        if self.is_fixed(v)? {
            let out = rejection_sampling(
                self.formula,
                &self.sigma,
                &[v],
                &mut self.rng,
                self.config.trial_cap,
            )?;
            self.stats.rejection_trials += out.trials.iter().sum::<u64>();
            self.stats.component_sizes.extend(out.component_sizes);
            return Ok(out.values[0].1);
        }
        self.margin_sample(v)
    }

    /// Draw `x ~ μ_v^σ` for the current `σ`; `σ` is unchanged on return.
    pub fn margin_sample(&mut self, v: usize) -> Result<u32> {
        self.observer.margin_sample_entry(self.formula, &self.sigma, v);
        let q_v = self.formula.domain_size(v);
        let theta = self.config.params.theta(q_v);
        let r = uniform53(&mut self.rng);
        if r < q_v as f64 * theta {
            self.stats.path_lengths.push(0);
            return Ok(zone_index(r, theta, q_v));
        }
        let mark = self.sigma.mark();
        self.sigma.set(v, Slot::Star);
        let mut path = 0u64;
        let out = self.margin_overflow(v, mark, &mut path);
        self.stats.path_lengths.push(path);
        self.sync_query_counts();
        if out.is_err() {
            self.sigma.undo_to(mark);
        }
        out
    }

    /// The overflow recursion, run iteratively. Each frame holds a starred
    /// variable and the journal mark taken just before it was starred;
    /// popping a frame undoes everything done on its behalf.
    fn margin_overflow(&mut self, v: usize, mark: Mark, path: &mut u64) -> Result<u32> {
        let mut frames: Vec<(usize, Mark)> = vec![(v, mark)];
        loop {
            let &(top, _) = frames.last().expect("frame stack non-empty");
            self.observer.overflow_entry(self.formula, &self.sigma, top);
            let u = next_var::next_var(
                self.formula,
                &self.sigma,
                &mut self.oracle,
                &mut self.rng,
                &mut self.scratch,
                &mut self.stats.eval_queries,
            )?;
            self.observer.next_var(self.formula, &self.sigma, u);
            match u {
                Some(u) => {
                    *path += 1;
                    if *path > self.config.recursion_limit {
                        return Err(Error::RecursionGuard {
                            limit: self.config.recursion_limit,
                        });
                    }
                    let q_u = self.formula.domain_size(u);
                    let theta = self.config.params.theta(q_u);
                    let r = uniform53(&mut self.rng);
                    if r < q_u as f64 * theta {
                        self.sigma.set(u, Slot::Value(zone_index(r, theta, q_u)));
                    } else {
                        let m = self.sigma.mark();
                        self.sigma.set(u, Slot::Star);
                        frames.push((u, m));
                    }
                }
                None => {
                    let budget = DrawBudget::new(self.config.draw_budget);
                    let (x, bf) = margin_overflow_draw(
                        self.formula,
                        &self.sigma,
                        top,
                        &self.config.params,
                        &mut self.rng,
                        &budget,
                        self.config.trial_cap,
                    )?;
                    self.stats.overflow_draws += 1;
                    self.stats.coin_draws += bf.leaf_draws();
                    self.stats.rejection_trials += bf.rejection_trials;
                    self.stats.component_sizes.push(bf.component_constraints);
                    let (w, m) = frames.pop().expect("frame stack non-empty");
                    self.sigma.undo_to(m);
                    if frames.is_empty() {
                        return Ok(x);
                    }
                    self.sigma.set(w, Slot::Value(x));
                }
            }
        }
    }
}

/// Index of the zone-of-local-uniformity interval containing `r`.
#[inline]
fn zone_index(r: f64, theta: f64, q: u32) -> u32 {
    ((r / theta) as u32).min(q - 1)
}

#[cfg(test)]
mod tests;
