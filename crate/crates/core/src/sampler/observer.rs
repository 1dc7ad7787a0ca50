use crate::assignment::PartialAssignment;
use crate::formula::CspFormula;

/// Hooks called at the points where the sampler's invariants are meant to hold.
///
/// All methods default to doing nothing.
pub trait Observer {
    /// Before each iteration of the main loop, and once after it.
    fn main_step(&mut self, _formula: &CspFormula, _sigma: &PartialAssignment) {}

    /// On entry to a margin-sample call for `v`.
    fn margin_sample_entry(&mut self, _formula: &CspFormula, _sigma: &PartialAssignment, _v: usize) {}

    /// On each (possibly tail-recursive) entry to the overflow recursion for `v`.
    fn overflow_entry(&mut self, _formula: &CspFormula, _sigma: &PartialAssignment, _v: usize) {}

    /// After `next_var` answered `u` for the current `σ`.
    fn next_var(&mut self, _formula: &CspFormula, _sigma: &PartialAssignment, _u: Option<usize>) {}
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoObserver;

impl Observer for NoObserver {}

impl<O: Observer + ?Sized> Observer for &mut O {
    fn main_step(&mut self, f: &CspFormula, s: &PartialAssignment) {
        (**self).main_step(f, s)
    }
    fn margin_sample_entry(&mut self, f: &CspFormula, s: &PartialAssignment, v: usize) {
        (**self).margin_sample_entry(f, s, v)
    }
    fn overflow_entry(&mut self, f: &CspFormula, s: &PartialAssignment, v: usize) {
        (**self).overflow_entry(f, s, v)
    }
    fn next_var(&mut self, f: &CspFormula, s: &PartialAssignment, u: Option<usize>) {
        (**self).next_var(f, s, u)
    }
}
