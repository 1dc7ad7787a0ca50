//! Uniform sampling of CSP solutions in the local lemma regime.
//!
//! The sampler draws each variable from its marginal conditioned on the
//! values drawn so far. A marginal draw either lands in the zone of local
//! uniformity or recurses on the next variable that could influence it,
//! finishing with Bernoulli factories fed by rejection samples.

pub mod assignment;
pub mod bernoulli;
pub mod constraint;
pub mod error;
pub mod formula;
pub mod frozen;
pub mod inference;
pub mod instance;
pub mod params;
pub mod rejection;
pub mod rng;
pub mod sampler;
pub mod simplify;
pub mod verify;

pub use assignment::{Mark, PartialAssignment, Slot};
pub use constraint::{Constraint, ConstraintKind, RobustColoring, RobustSat, Table};
pub use error::{Error, Result};
pub use formula::{CspFormula, Variable};
pub use frozen::{FrozenMode, FrozenOracle};
pub use inference::{infer_marginal, marginal_sample, MarginalEstimate};
pub use instance::{parse_dimacs, parse_instance, parse_json, to_dimacs, to_json};
pub use params::{derive_parameters, LllParameters, ParameterMode};
pub use sampler::{Observer, RunStats, Sampler, SamplerConfig};
pub use verify::{brute_force, ExactDistribution, InvariantChecker};
