//! Bernoulli factories: race, Huber's linear factory, subtraction, and the
//! margin-overflow draw assembled from them.

use std::cell::Cell;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::Serialize;

use crate::assignment::PartialAssignment;
use crate::error::{Error, Result};
use crate::formula::CspFormula;
use crate::params::LllParameters;
use crate::rejection::ComponentSampler;
use crate::simplify::component_containing;

pub const DEFAULT_DRAW_BUDGET: u64 = 100_000_000;

/// Shared cap on coin tosses across a stack of factories.
///
/// Every factory charges one unit per toss of its input coin.
#[derive(Debug)]
pub struct DrawBudget {
    used: Cell<u64>,
    limit: u64,
}

impl DrawBudget {
    pub fn new(limit: u64) -> Self {
        DrawBudget {
            used: Cell::new(0),
            limit,
        }
    }

    pub fn used(&self) -> u64 {
        self.used.get()
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    #[inline]
    pub fn charge(&self) -> Result<()> {
        let u = self.used.get() + 1;
        if u > self.limit {
            return Err(Error::BudgetExceeded {
                what: "coin draws",
                limit: self.limit,
            });
        }
        self.used.set(u);
        Ok(())
    }
}

impl Default for DrawBudget {
    fn default() -> Self {
        DrawBudget::new(DEFAULT_DRAW_BUDGET)
    }
}

/// A 0/1 random source `O_ξ`.
pub trait Coin<R: Rng + ?Sized> {
    fn toss(&mut self, rng: &mut R) -> Result<bool>;
}

impl<R: Rng + ?Sized, C: Coin<R> + ?Sized> Coin<R> for &mut C {
    fn toss(&mut self, rng: &mut R) -> Result<bool> {
        (**self).toss(rng)
    }
}

impl<R: Rng + ?Sized, C: Coin<R> + ?Sized> Coin<R> for Box<C> {
    fn toss(&mut self, rng: &mut R) -> Result<bool> {
        (**self).toss(rng)
    }
}

/// Adapts a closure into a [`Coin`].
pub struct FnCoin<F>(pub F);

impl<R: Rng + ?Sized, F: FnMut(&mut R) -> Result<bool>> Coin<R> for FnCoin<F> {
    fn toss(&mut self, rng: &mut R) -> Result<bool> {
        (self.0)(rng)
    }
}

/// Coin with a known heads probability, one uniform draw per toss.
#[derive(Debug, Clone, Copy)]
pub struct BiasedCoin {
    pub p: f64,
    pub draws: u64,
}

impl BiasedCoin {
    pub fn new(p: f64) -> Self {
        BiasedCoin { p, draws: 0 }
    }
}

impl<R: Rng + ?Sized> Coin<R> for BiasedCoin {
    fn toss(&mut self, rng: &mut R) -> Result<bool> {
        self.draws += 1;
        Ok(rng.random::<f64>() < self.p)
    }
}

/// Returns `i` with probability `ξ_i / Σ_j ξ_j`.
pub fn bernoulli_race<R: Rng + ?Sized, C: Coin<R>>(
    coins: &mut [C],
    rng: &mut R,
    budget: &DrawBudget,
) -> Result<usize> {
    assert!(!coins.is_empty(), "bernoulli race over no coins");
    loop {
        let i = rng.random_range(0..coins.len());
        budget.charge()?;
        if coins[i].toss(rng)? {
            return Ok(i);
        }
    }
}

fn geometric(c: f64) -> Geometric {
    Geometric::new((c - 1.0) / c).expect("C > 1 gives a valid success probability")
}

/// Huber's linear factory: a draw of `O_{Cξ}` from `O_ξ`, given `Cξ ≤ 1 − ζ`.
pub fn linear_bf<R: Rng + ?Sized, C: Coin<R> + ?Sized>(
    coin: &mut C,
    c: f64,
    zeta: f64,
    rng: &mut R,
    budget: &DrawBudget,
) -> Result<bool> {
    assert!(c > 1.0 && zeta > 0.0, "linear_bf needs C > 1 and zeta > 0");
    let mut c = c;
    let mut k = 4.6 / zeta;
    let mut zeta = zeta.min(0.644);
    let mut geo = geometric(c);
    let mut i: u64 = 1;
    loop {
        // i ← i − 1 + (1 − B)·G with G on {1, 2, …}
        while i != 0 && (i as f64) < k {
            budget.charge()?;
            if coin.toss(rng)? {
                i -= 1;
            } else {
                i += geo.sample(rng);
            }
        }
        if i == 0 {
            return Ok(true);
        }
        let accept = rng.random::<f64>() < (1.0 + zeta / 2.0).powf(-(i as f64));
        c *= 1.0 + zeta / 2.0;
        zeta /= 2.0;
        k *= 2.0;
        geo = geometric(c);
        if !accept {
            return Ok(false);
        }
    }
}

/// A draw of `O_{ξ₁−ξ₂}` given `ξ₁ − ξ₂ ≥ ζ`.
pub fn subtract_bf<R: Rng + ?Sized, C1: Coin<R> + ?Sized, C2: Coin<R> + ?Sized>(
    coin1: &mut C1,
    coin2: &mut C2,
    zeta: f64,
    rng: &mut R,
    budget: &DrawBudget,
) -> Result<bool> {
    let mut mix = FnCoin(|rng: &mut R| {
        if rng.random::<bool>() {
            Ok(!coin1.toss(rng)?)
        } else {
            coin2.toss(rng)
        }
    });
    Ok(!linear_bf(&mut mix, 2.0, zeta, rng, budget)?)
}

/// Draw accounting for one [`margin_overflow_draw`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OverflowDrawStats {
    /// Tosses of each `O_{ν(x)}` coin; one rejection sample each.
    pub nu_draws: Vec<u64>,
    /// Tosses of the shared `O_θ` coin.
    pub theta_draws: u64,
    /// Tosses of the mixture coins inside the subtraction factories.
    pub mixture_tosses: u64,
    /// Subtraction-factory invocations made by the race.
    pub race_rounds: u64,
    pub rejection_trials: u64,
    /// Constraints in the component of `v`.
    pub component_constraints: usize,
    pub component_vars: usize,
}

impl OverflowDrawStats {
    /// Leaf oracle queries: every `O_ν` and `O_θ` toss.
    pub fn leaf_draws(&self) -> u64 {
        self.nu_draws.iter().sum::<u64>() + self.theta_draws
    }
}

/// Draw `x ~ D(x) = (μ_v^σ(x) − θ_v) / (1 − q_v·θ_v)` via a race over
/// subtraction factories fed by rejection samples of `v`'s component.
pub fn margin_overflow_draw<R: Rng + ?Sized>(
    formula: &CspFormula,
    sigma: &PartialAssignment,
    v: usize,
    params: &LllParameters,
    rng: &mut R,
    budget: &DrawBudget,
    trial_cap: u64,
) -> Result<(u32, OverflowDrawStats)> {
    let comp = component_containing(formula, sigma, v);
    let sampler = ComponentSampler::build(formula, sigma, &comp, trial_cap);
    let local_v = sampler.local_index(v).expect("v lies in its own component");
    let q_v = formula.domain_size(v);
    let theta = params.theta(q_v);
    let zeta = params.zeta;

    let mut stats = OverflowDrawStats {
        nu_draws: vec![0; q_v as usize],
        component_constraints: comp.constraints.len(),
        component_vars: comp.vars.len(),
        ..Default::default()
    };
    let mut buf = vec![0u32; sampler.vars().len()];
    let mut theta_coin = BiasedCoin::new(theta);
    let mut winner = None;
    // Race: uniform index, then one subtraction-factory draw for that index.
    while winner.is_none() {
        let x = rng.random_range(0..q_v);
        budget.charge()?;
        stats.race_rounds += 1;
        let mut nu_draws = 0u64;
        let mut trials = 0u64;
        let mut mixture = 0u64;
        let heads = {
            let mut nu = FnCoin(|rng: &mut R| {
                nu_draws += 1;
                trials += sampler.draw(rng, &mut buf)?;
                Ok(buf[local_v] == x)
            });
            let mut counted_theta = FnCoin(|rng: &mut R| theta_coin.toss(rng));
            let mut mix = FnCoin(|rng: &mut R| {
                mixture += 1;
                if rng.random::<bool>() {
                    Ok(!nu.toss(rng)?)
                } else {
                    counted_theta.toss(rng)
                }
            });
            !linear_bf(&mut mix, 2.0, zeta, rng, budget)?
        };
        stats.nu_draws[x as usize] += nu_draws;
        stats.rejection_trials += trials;
        stats.mixture_tosses += mixture;
        if heads {
            winner = Some(x);
        }
    }
    stats.theta_draws = theta_coin.draws;
    Ok((winner.expect("race finished"), stats))
}
