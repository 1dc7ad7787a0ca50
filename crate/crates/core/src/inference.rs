//! Marginal sampling from the empty assignment and median-of-batches estimation.

use serde::Serialize;

use crate::error::Result;
use crate::formula::CspFormula;
use crate::rng::stream;
use crate::sampler::{NoObserver, Observer, Sampler, SamplerConfig};

/// Samples per batch are `BATCH_CONSTANT · q / ε²`.
pub const BATCH_CONSTANT: f64 = 48.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalEstimate {
    pub var: usize,
    /// Coordinate-wise median of the per-batch frequencies.
    pub estimates: Vec<f64>,
    pub samples: u64,
    pub batch_size: u64,
    pub batches: u64,
    pub epsilon: f64,
    pub delta_fail: f64,
}

/// One draw of `x ~ μ_v` on stream `(seed, ordinal)`.
pub fn marginal_sample(
    formula: &CspFormula,
    v: usize,
    config: &SamplerConfig,
    seed: u64,
    ordinal: u64,
) -> Result<u32> {
    Sampler::new(formula, config, stream(seed, ordinal)).marginal(v)
}

pub fn batch_size(q_v: u32, epsilon: f64) -> u64 {
    (BATCH_CONSTANT * q_v as f64 / (epsilon * epsilon)).ceil() as u64
}

/// `2⌈log₂(2q/δ)⌉ + 1` batches, or a single one when `δ ≥ 1`.
pub fn batch_count(q_v: u32, delta_fail: f64) -> u64 {
    if delta_fail >= 1.0 {
        return 1;
    }
    2 * (2.0 * q_v as f64 / delta_fail).log2().ceil().max(0.0) as u64 + 1
}

/// Estimate `μ_v` to relative error `ε` with failure probability `δ_fail`.
///
/// Draw `i` (counting across all batches) uses stream `(seed, i)`.
pub fn infer_marginal(
    formula: &CspFormula,
    v: usize,
    epsilon: f64,
    delta_fail: f64,
    config: &SamplerConfig,
    seed: u64,
) -> Result<MarginalEstimate> {
    infer_marginal_observed(formula, v, epsilon, delta_fail, config, seed, NoObserver)
}

/// [`infer_marginal`] with an observer attached to the underlying sampler.
pub fn infer_marginal_observed<O: Observer>(
    formula: &CspFormula,
    v: usize,
    epsilon: f64,
    delta_fail: f64,
    config: &SamplerConfig,
    seed: u64,
    observer: O,
) -> Result<MarginalEstimate> {
    assert!(epsilon > 0.0 && delta_fail > 0.0, "epsilon and delta_fail must be positive");
    let q_v = formula.domain_size(v);
    let size = batch_size(q_v, epsilon);
    let batches = batch_count(q_v, delta_fail);
    let mut sampler = Sampler::with_observer(formula, config, stream(seed, 0), observer);
    let mut per_value: Vec<Vec<f64>> = vec![Vec::with_capacity(batches as usize); q_v as usize];
    let mut ordinal = 0u64;
    for _ in 0..batches {
        let mut counts = vec![0u64; q_v as usize];
        for _ in 0..size {
            sampler.reset(stream(seed, ordinal));
            ordinal += 1;
            counts[sampler.marginal(v)? as usize] += 1;
        }
        for (x, &c) in counts.iter().enumerate() {
            per_value[x].push(c as f64 / size as f64);
        }
    }
    let estimates = per_value
        .into_iter()
        .map(|mut f| {
            f.sort_by(f64::total_cmp);
            f[f.len() / 2]
        })
        .collect();
    Ok(MarginalEstimate {
        var: v,
        estimates,
        samples: ordinal,
        batch_size: size,
        batches,
        epsilon,
        delta_fail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{Constraint, ConstraintKind, RobustSat};
    use crate::formula::Variable;
    use crate::frozen::FrozenMode;
    use crate::params::{derive_from_shape, ParameterMode};

    fn config(f: &CspFormula, zeta: f64) -> SamplerConfig {
        let params = derive_from_shape(
            f.max_domain(),
            f.width(),
            f.degree(),
            0.0,
            ParameterMode::Explicit {
                p_prime: 0.01,
                zeta,
            },
        )
        .unwrap();
        SamplerConfig::new(params, FrozenMode::Exact)
    }

    #[test]
    fn batch_shape() {
        assert_eq!(batch_size(2, 0.05), 38_400);
        assert_eq!(batch_count(2, 0.05), 15);
        assert_eq!(batch_count(2, 1.0), 1);
        assert_eq!(batch_count(3, 2.0), 1);
    }

    #[test]
    fn unconstrained_boolean_estimates_half() {
        let f = CspFormula::new(vec![Variable::boolean("x")], vec![]).unwrap();
        let cfg = config(&f, 0.1);
        let mut good = 0;
        for rep in 0..20 {
            let est = infer_marginal(&f, 0, 0.05, 1.0, &cfg, rep).unwrap();
            assert_eq!(est.batches, 1);
            assert_eq!(est.samples, est.batch_size);
            good += est.estimates.iter().all(|&p| (0.475..=0.525).contains(&p)) as u32;
        }
        assert!(good >= 19, "{good}/20");
    }

    #[test]
    fn clause_estimate_near_two_thirds() {
        let f = CspFormula::new(
            vec![Variable::boolean("x"), Variable::boolean("y")],
            vec![Constraint {
                scope: vec![0, 1],
                kind: ConstraintKind::RobustSat(RobustSat::plain(vec![false, false]).unwrap()),
            }],
        )
        .unwrap();
        let cfg = config(&f, 0.02);
        let est = infer_marginal(&f, 0, 0.05, 0.5, &cfg, 7).unwrap();
        assert!((est.estimates[1] / (2.0 / 3.0) - 1.0).abs() <= 0.05);
        assert!((est.estimates[0] / (1.0 / 3.0) - 1.0).abs() <= 0.05);
        let sum: f64 = est.estimates.iter().sum();
        assert!((sum - 1.0).abs() <= 0.1);
    }

    #[test]
    fn marginal_sample_is_deterministic() {
        let f = CspFormula::new(vec![Variable::with_domain("a", 4)], vec![]).unwrap();
        let cfg = config(&f, 0.02);
        for i in 0..50 {
            assert_eq!(
                marginal_sample(&f, 0, &cfg, 3, i).unwrap(),
                marginal_sample(&f, 0, &cfg, 3, i).unwrap()
            );
        }
    }
}
