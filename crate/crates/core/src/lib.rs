//! Fairness and differential-privacy certification over finite alphabets.
//!
//! The crate models a stochastic decision pipeline `P(U | X, A)` whose inputs
//! may be released through randomized mechanisms, computes utility-aware
//! fairness metrics for it, verifies `(ε, δ)` guarantees of the mechanisms and
//! evaluates the privacy-to-fairness bounds as checkable certificates. A small
//! grid navigation harness and pluggable decision engines reproduce a robot
//! task-assignment pipeline on top of the same primitives.
//!
//! Everything here is `no_std` with `alloc`; file formats, the CLI and the
//! remote engine live in the `privfair` companion crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod certificates;
pub mod engine;
mod error;
pub mod estimate;
pub mod math;
pub mod mechanism;
pub mod metrics;
pub mod model;
pub mod nav;
pub mod random;
pub mod utility;

pub use certificates::{
    bound_constants, certify, counterexample_world, diameter, lipschitz_constant,
    reproduce_counterexample, theorem_bound, x_privacy_check, AttributeMetric, BoundConstants,
    BoundForm, Certificate, Counterexample, HypothesisViolation, ReproCheck, XPrivacyReport,
};
pub use error::Error;
pub use estimate::{estimate_metrics, BootstrapConfig, EstimateMethod, EstimateWithCI, MetricEstimates};
pub use mechanism::{binary_rr_from_p, randomized_response, DpVerdict, MechanismMatrix, PrivacyBudget};
pub use metrics::{
    demographic_parity, equalized_odds, global_g_fairness, local_g_fairness, ratio_sup,
    total_variation, witness_utility_family, FairnessValue, Witness,
};
pub use model::{
    compose_mechanisms, conditional_utility, marginal_utility, sample_trace, Alphabet,
    DecisionPolicy, Prior, TabularWorld, Trace, TraceRecord,
};
pub use utility::UtilityTable;

/// Tolerance for "sums to one" checks on loaded distributions.
pub const LOAD_TOLERANCE: f64 = 1e-12;
/// Tolerance for "sums to one" checks after composing mechanisms.
pub const COMPOSE_TOLERANCE: f64 = 1e-10;
