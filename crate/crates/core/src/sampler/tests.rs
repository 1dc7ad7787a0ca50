use super::*;
use crate::constraint::{Constraint, ConstraintKind, RobustSat, Table};
use crate::formula::Variable;
use crate::params::{derive_from_shape, ParameterMode};
use crate::rng::stream;
use crate::verify::{brute_force, gof_test, DEFAULT_ENUM_CAP};
use proptest::prelude::*;

fn bools(n: usize) -> Vec<Variable> {
    (0..n).map(|i| Variable::boolean(format!("x{i}"))).collect()
}

fn clause(scope: &[usize], negated: &[bool]) -> Constraint {
    Constraint {
        scope: scope.to_vec(),
        kind: ConstraintKind::RobustSat(RobustSat::plain(negated.to_vec()).unwrap()),
    }
}

fn table(scope: &[usize], dims: &[u32], rows: &[&[u32]]) -> Constraint {
    Constraint {
        scope: scope.to_vec(),
        kind: ConstraintKind::Table(
            Table::new(dims.to_vec(), rows.iter().map(|r| r.to_vec()).collect()).unwrap(),
        ),
    }
}

fn x_or_y() -> CspFormula {
    CspFormula::new(bools(2), vec![clause(&[0, 1], &[false, false])]).unwrap()
}

fn explicit(f: &CspFormula, p_prime: f64, zeta: f64) -> SamplerConfig {
    let params = derive_from_shape(
        f.max_domain(),
        f.width(),
        f.degree(),
        0.0,
        ParameterMode::Explicit { p_prime, zeta },
    )
    .unwrap();
    SamplerConfig::new(params, FrozenMode::Exact)
}

fn within_3_sigma(hits: u64, n: u64, p: f64) -> bool {
    let est = hits as f64 / n as f64;
    (est - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn zone_index_clamps_to_last_value() {
    assert_eq!(zone_index(0.0, 0.3, 3), 0);
    assert_eq!(zone_index(0.3, 0.3, 3), 1);
    assert_eq!(zone_index(0.8999999999, 0.3, 3), 2);
    assert_eq!(zone_index(0.9, 0.3, 3), 2);
}

#[test]
fn unconstrained_margin_sample_is_uniform() {
    let f = CspFormula::new(vec![Variable::with_domain("a", 3)], vec![]).unwrap();
    let cfg = explicit(&f, 0.01, 0.05);
    let mut s = Sampler::new(&f, &cfg, stream(1, 0));
    let n = 60_000u64;
    let mut counts = [0u64; 3];
    for _ in 0..n {
        counts[s.margin_sample(0).unwrap() as usize] += 1;
    }
    assert!(gof_test(&counts, &[1.0 / 3.0; 3], 1e-3).pass, "{counts:?}");
    // overflow with nothing to recurse on always ends in the factory at path length 0
    assert!(s.stats().path_lengths.iter().all(|&l| l == 0));
    assert!(s.stats().overflow_draws > 0);
}

#[test]
fn clause_margin_sample_matches_enumeration() {
    // p' = 0.05 keeps μ_x(false) = 1/3 above θ + ζ = 1/2 − η, so the factory is well posed
    let f = x_or_y();
    let cfg = explicit(&f, 0.05, 0.05);
    let mut s = Sampler::new(&f, &cfg, stream(2, 0));
    let n = 100_000u64;
    let mut ones = 0;
    for _ in 0..n {
        ones += s.margin_sample(0).unwrap() as u64;
    }
    assert!(within_3_sigma(ones, n, 2.0 / 3.0), "{ones}");
}

#[test]
fn clause_overflow_law_is_d() {
    let f = x_or_y();
    let cfg = explicit(&f, 0.05, 0.05);
    let theta = cfg.params.theta(2);
    let exact = brute_force(&f, &PartialAssignment::new(2), DEFAULT_ENUM_CAP).unwrap();
    let mu_true = exact.marginal(0)[1];
    let d_true = (mu_true - theta) / (1.0 - 2.0 * theta);
    let mut s = Sampler::new(&f, &cfg, stream(3, 0));
    let n = 100_000u64;
    let mut ones = 0;
    for _ in 0..n {
        let mark = s.sigma.mark();
        s.sigma.set(0, Slot::Star);
        let mut path = 0;
        ones += s.margin_overflow(0, mark, &mut path).unwrap() as u64;
        assert_eq!(s.sigma, PartialAssignment::new(2));
    }
    assert!(within_3_sigma(ones, n, d_true), "{ones} vs {d_true}");
}

#[test]
fn table_forbidding_zero_gives_uniform_rest() {
    let f = CspFormula::new(
        vec![Variable::with_domain("a", 3)],
        vec![table(&[0], &[3], &[&[0]])],
    )
    .unwrap();
    let cfg = explicit(&f, 0.01, 0.05);
    let mut s = Sampler::new(&f, &cfg, stream(4, 0));
    let n = 60_000u64;
    let mut counts = [0u64; 3];
    for i in 0..n {
        s.reset(stream(4, i));
        counts[s.marginal(0).unwrap() as usize] += 1;
    }
    assert_eq!(counts[0], 0);
    assert!(gof_test(&counts, &[0.0, 0.5, 0.5], 1e-3).pass, "{counts:?}");
}

#[derive(Default)]
struct Trace {
    next_some: u64,
    entries: u64,
}

impl Observer for Trace {
    fn next_var(&mut self, _: &CspFormula, _: &PartialAssignment, u: Option<usize>) {
        self.next_some += u.is_some() as u64;
    }
    fn margin_sample_entry(&mut self, _: &CspFormula, _: &PartialAssignment, _: usize) {
        self.entries += 1;
    }
}

/// Two overlapping clauses on six variables plus one on six others; weak parameters.
fn k6_instance() -> CspFormula {
    let neg_a = [false; 6];
    let neg_b = [true, false, true, false, true, false];
    CspFormula::new(
        bools(12),
        vec![
            clause(&[0, 1, 2, 3, 4, 5], &neg_a),
            clause(&[0, 1, 2, 3, 4, 5], &neg_b),
            clause(&[6, 7, 8, 9, 10, 11], &neg_a),
        ],
    )
    .unwrap()
}

#[test]
fn path_length_counts_next_var_hits() {
    let f = k6_instance();
    let params = crate::params::derive_parameters(&f, None, ParameterMode::Weak).unwrap();
    let cfg = SamplerConfig::new(params, FrozenMode::Exact);
    let mut s = Sampler::with_observer(&f, &cfg, stream(5, 0), Trace::default());
    for i in 0..300 {
        s.reset(stream(5, i));
        s.sample().unwrap();
        let total: u64 = s.stats().path_lengths.iter().sum();
        assert_eq!(total, s.observer().next_some);
        assert_eq!(s.stats().path_lengths.len() as u64, s.observer().entries);
        s.observer_mut().next_some = 0;
        s.observer_mut().entries = 0;
    }
}

#[test]
fn margin_sample_restores_sigma() {
    let f = k6_instance();
    let params = crate::params::derive_parameters(&f, None, ParameterMode::Weak).unwrap();
    let cfg = SamplerConfig::new(params, FrozenMode::Exact);
    let mut s = Sampler::new(&f, &cfg, stream(6, 0));
    let mut sigma = PartialAssignment::new(12);
    sigma.set(6, Slot::Value(0));
    sigma.set(7, Slot::Value(1));
    for _ in 0..500 {
        s.set_sigma(sigma.clone());
        s.margin_sample(0).unwrap();
        assert_eq!(s.sigma().slots(), sigma.slots());
        assert!(s.sigma().stars().is_empty());
    }
}

fn call_next_var(f: &CspFormula, sigma: &PartialAssignment, p_prime: f64) -> Option<usize> {
    let mut oracle = FrozenOracle::new(f, p_prime, FrozenMode::Exact);
    let mut scratch = next_var::Scratch::new(f);
    let mut evals = 0;
    let mut rng = stream(0, 0);
    next_var::next_var(f, sigma, &mut oracle, &mut rng, &mut scratch, &mut evals).unwrap()
}

#[test]
fn next_var_without_stars_is_none() {
    let f = x_or_y();
    assert_eq!(call_next_var(&f, &PartialAssignment::new(2), 0.01), None);
}

#[test]
fn next_var_reaches_through_frozen_constraint() {
    // v=0 starred; c0 = {0,1} frozen (P = 1/2), c1 = {1,2} not (P = 1/16)
    let dom = |n: &str| Variable::with_domain(n, 4);
    let half: Vec<Vec<u32>> = (0..8).map(|i| vec![i / 4, i % 4]).collect();
    let half_refs: Vec<&[u32]> = half.iter().map(|r| r.as_slice()).collect();
    let f = CspFormula::new(
        vec![dom("v"), dom("w"), dom("u")],
        vec![table(&[0, 1], &[4, 4], &half_refs), table(&[1, 2], &[4, 4], &[&[3, 3]])],
    )
    .unwrap();
    let mut sigma = PartialAssignment::new(3);
    sigma.set(0, Slot::Star);
    assert_eq!(call_next_var(&f, &sigma, 0.1), Some(2));
    // with p' above both probabilities nothing is frozen: the boundary is w itself
    assert_eq!(call_next_var(&f, &sigma, 0.6), Some(1));
}

#[test]
fn next_var_stops_at_satisfied_constraints() {
    let f = CspFormula::new(bools(3), vec![clause(&[0, 1, 2], &[false; 3])]).unwrap();
    let mut sigma = PartialAssignment::new(3);
    sigma.set(0, Slot::Value(1));
    sigma.set(1, Slot::Star);
    assert_eq!(call_next_var(&f, &sigma, 0.01), None);
}

fn exact_fixed(f: &CspFormula, sigma: &PartialAssignment, v: usize, p_prime: f64) -> bool {
    sigma.get(v).is_accessed()
        || f.constraints_of(v)
            .iter()
            .any(|&c| f.violation_probability(c, sigma).unwrap() > p_prime)
}

proptest! {
    #[test]
    fn next_var_never_returns_fixed(codes in prop::collection::vec(0u8..4, 12), p_prime in 0.005f64..0.2) {
        let f = k6_instance();
        let slots: Vec<Slot> = codes
            .iter()
            .map(|c| match c { 0 | 1 => Slot::Unset, 2 => Slot::Star, _ => Slot::Value(1) })
            .collect();
        let sigma = PartialAssignment::from_slots(slots);
        if let Some(u) = call_next_var(&f, &sigma, p_prime) {
            prop_assert!(!exact_fixed(&f, &sigma, u, p_prime));
            prop_assert!(!sigma.get(u).is_assigned());
        }
    }
}
