//! Privacy-to-fairness bounds as checkable certificates.
//!
//! For a pipeline whose attribute release `M_A` is `(ε, δ)`-DP, with `X ⊥ A`,
//! `0 ≤ g ≤ γ`, `g` Lipschitz in `a` with constant `L_A` and composed
//! conditional utilities bounded below by `τ > 0`:
//!
//! ```text
//! L̄ ≤ L ≤ ε + ln(1 + (L_A·diam(𝒜) + δ·γ) / τ)
//! ```
//!
//! [`certify`] evaluates both sides on the composed world and reports whether
//! the chain holds.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math::{ln, ln_1p};
use crate::mechanism::{MechanismMatrix, PrivacyBudget};
use crate::metrics::{global_g_fairness, local_g_fairness, FairnessValue};
use crate::model::{compose_mechanisms, Alphabet, DecisionPolicy, Prior, TabularWorld};
use crate::utility::UtilityTable;
use crate::Error;

/// Distance on the attribute alphabet.
#[derive(Debug, Clone, PartialEq)]
pub enum AttributeMetric {
    /// `d(a, a') = 1{a ≠ a'}`.
    Discrete,
    /// Symmetric `k × k` matrix, flattened row-major.
    Explicit { k: usize, distances: Vec<f64> },
}

impl AttributeMetric {
    /// Validates symmetry, zero diagonal, positivity off the diagonal and the
    /// triangle inequality.
    pub fn explicit(rows: Vec<Vec<f64>>) -> Result<Self, Error> {
        let k = rows.len();
        let mut d = Vec::with_capacity(k * k);
        for r in &rows {
            if r.len() != k {
                return Err(Error::ShapeMismatch { what: "metric row", expected: k, found: r.len() });
            }
            d.extend_from_slice(r);
        }
        for i in 0..k {
            if d[i * k + i] != 0.0 {
                return Err(Error::InvalidMetric { reason: "diagonal must be zero" });
            }
            for j in 0..k {
                let v = d[i * k + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidMetric { reason: "distances must be finite and non-negative" });
                }
                if i != j && v == 0.0 {
                    return Err(Error::InvalidMetric { reason: "distinct attributes must be at positive distance" });
                }
                if v != d[j * k + i] {
                    return Err(Error::InvalidMetric { reason: "distances must be symmetric" });
                }
                for m in 0..k {
                    if v > d[i * k + m] + d[m * k + j] + 1e-12 * v {
                        return Err(Error::InvalidMetric { reason: "triangle inequality fails" });
                    }
                }
            }
        }
        Ok(Self::Explicit { k, distances: d })
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        match self {
            AttributeMetric::Discrete => f64::from(u8::from(a != b)),
            AttributeMetric::Explicit { k, distances } => distances[a * k + b],
        }
    }

    fn check_size(&self, k: usize) -> Result<(), Error> {
        match self {
            AttributeMetric::Explicit { k: m, .. } if *m != k => {
                Err(Error::ShapeMismatch { what: "metric vs attribute alphabet", expected: k, found: *m })
            }
            _ => Ok(()),
        }
    }
}

/// Constants entering the bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub lipschitz_la: f64,
    pub diameter: f64,
    pub gamma: f64,
    pub tau: f64,
}

/// Which specialization of the bound applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundForm {
    /// `ε + ln(1 + (L_A·diam + δγ)/τ)`.
    General,
    /// `g` does not depend on `a`: `ε + ln(1 + δγ/τ)`.
    AttributeFree,
    /// `g` does not depend on `a` and `δ = 0`: `ε`.
    PureDpAttributeFree,
}

impl BoundForm {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundForm::General => "general",
            BoundForm::AttributeFree => "attribute_free",
            BoundForm::PureDpAttributeFree => "pure_dp_attribute_free",
        }
    }
}

/// A hypothesis of the bound that the pipeline does not satisfy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HypothesisViolation {
    DependentAttributes,
    FloorViolation { x: String, a: String },
}

impl fmt::Display for HypothesisViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HypothesisViolation::DependentAttributes => write!(f, "X and A are not independent"),
            HypothesisViolation::FloorViolation { x, a } => {
                write!(f, "conditional expected utility is zero at (x = {x}, a = {a})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub l: FairnessValue,
    pub l_bar: FairnessValue,
    pub bound: f64,
    pub budget: PrivacyBudget,
    pub constants: BoundConstants,
    /// Smallest conditional utility of the policy before any release
    /// mechanism, for comparison with `constants.tau`.
    pub tau_inner: f64,
    pub form: BoundForm,
    pub holds: bool,
    pub violation: Option<HypothesisViolation>,
}

/// `max |g(u, x, a) − g(u, x, a')| / d(a, a')`.
pub fn lipschitz_constant(g: &UtilityTable, metric: &AttributeMetric) -> Result<f64, Error> {
    let (nu, nx, na) = g.shape();
    metric.check_size(na)?;
    let mut best: f64 = 0.0;
    for u in 0..nu {
        for x in 0..nx {
            for a in 0..na {
                for b in a + 1..na {
                    let diff = (g.get(u, x, a) - g.get(u, x, b)).abs();
                    best = best.max(diff / metric.distance(a, b));
                }
            }
        }
    }
    Ok(best)
}

pub fn diameter(metric: &AttributeMetric, alphabet: &Alphabet) -> Result<f64, Error> {
    let k = alphabet.len();
    if k < 2 {
        return Err(Error::DegenerateAlphabet { size: k });
    }
    metric.check_size(k)?;
    let mut best: f64 = 0.0;
    for a in 0..k {
        for b in a + 1..k {
            best = best.max(metric.distance(a, b));
        }
    }
    Ok(best)
}

fn min_cond_utility(world: &TabularWorld, g: &UtilityTable) -> (f64, Option<(usize, usize)>) {
    let mut tau = f64::INFINITY;
    let mut first_zero = None;
    for x in 0..world.x().len() {
        for a in 0..world.a().len() {
            let v = world.cond_utility(g, x, a);
            if v <= 0.0 && first_zero.is_none() {
                first_zero = Some((x, a));
            }
            tau = tau.min(v);
        }
    }
    (tau, first_zero)
}

/// Constants of the bound for `world`, which should be the composed pipeline.
/// Refuses dependent `(X, A)` and a vanishing utility floor.
pub fn bound_constants(
    world: &TabularWorld,
    g: &UtilityTable,
    metric: &AttributeMetric,
) -> Result<BoundConstants, Error> {
    g.check_shape(world)?;
    if !world.is_independent() {
        return Err(Error::Hypothesis { reason: "X and A must be independent" });
    }
    let (tau, zero) = min_cond_utility(world, g);
    if let Some((x, a)) = zero {
        return Err(Error::FloorViolation { x: world.x().label(x).into(), a: world.a().label(a).into() });
    }
    Ok(BoundConstants {
        lipschitz_la: lipschitz_constant(g, metric)?,
        diameter: diameter(metric, world.a())?,
        gamma: g.max(),
        tau,
    })
}

/// `ε + ln(1 + (L_A·diam + δγ)/τ)`, infinite when the numerator is positive
/// and `τ = 0`.
pub fn theorem_bound(budget: PrivacyBudget, constants: BoundConstants) -> f64 {
    let numerator = constants.lipschitz_la * constants.diameter + budget.delta * constants.gamma;
    if numerator == 0.0 {
        return budget.epsilon;
    }
    if !(constants.tau > 0.0) {
        return f64::INFINITY;
    }
    budget.epsilon + ln_1p(numerator / constants.tau)
}

/// Composes `mech_a` (and `mech_x`, if any) into `world`, computes `L` and
/// `L̄` on the result and checks them against the bound at the mechanism's
/// tightest budget `(ε*(δ), δ*(ε*(δ)))` for the caller's `delta`.
///
/// Unmet hypotheses yield `holds = false` with the violation named; only
/// shape and alphabet mismatches are errors.
pub fn certify(
    world: &TabularWorld,
    g: &UtilityTable,
    metric: &AttributeMetric,
    mech_a: &MechanismMatrix,
    mech_x: Option<&MechanismMatrix>,
    delta: f64,
) -> Result<Certificate, Error> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidParameter { name: "delta", value: delta });
    }
    g.check_shape(world)?;
    metric.check_size(world.a().len())?;
    let composed = compose_mechanisms(world, Some(mech_a), mech_x)?;
    let l = local_g_fairness(&composed, g)?;
    let l_bar = global_g_fairness(&composed, g)?;
    let budget = mech_a.tight_budget(delta);

    let (tau, zero) = min_cond_utility(&composed, g);
    let constants = BoundConstants {
        lipschitz_la: lipschitz_constant(g, metric)?,
        diameter: diameter(metric, world.a())?,
        gamma: g.max(),
        tau,
    };
    let violation = if !world.is_independent() {
        Some(HypothesisViolation::DependentAttributes)
    } else {
        zero.map(|(x, a)| HypothesisViolation::FloorViolation {
            x: world.x().label(x).into(),
            a: world.a().label(a).into(),
        })
    };
    let form = match (constants.lipschitz_la == 0.0, budget.delta == 0.0) {
        (false, _) => BoundForm::General,
        (true, false) => BoundForm::AttributeFree,
        (true, true) => BoundForm::PureDpAttributeFree,
    };
    let bound = theorem_bound(budget, constants);
    let holds = violation.is_none() && le_tol(l_bar.value, l.value) && le_tol(l.value, bound);
    Ok(Certificate {
        l,
        l_bar,
        bound,
        budget,
        constants,
        tau_inner: min_cond_utility(world, g).0,
        form,
        holds,
        violation,
    })
}

fn le_tol(a: f64, b: f64) -> bool {
    a <= b + 1e-9 || a == b
}

/// Local fairness with and without a release mechanism on `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct XPrivacyReport {
    pub l_with: FairnessValue,
    pub l_without: FairnessValue,
    pub non_worsening: bool,
}

/// Checks that releasing `X` through `mech_x` does not increase local
/// fairness when `g` depends on the decision alone.
pub fn x_privacy_check(
    world: &TabularWorld,
    g: &UtilityTable,
    mech_x: &MechanismMatrix,
) -> Result<XPrivacyReport, Error> {
    g.check_shape(world)?;
    if !g.is_function_of_u() {
        return Err(Error::Hypothesis { reason: "utility must depend on the decision only" });
    }
    let composed = compose_mechanisms(world, None, Some(mech_x))?;
    let l_with = local_g_fairness(&composed, g)?;
    let l_without = local_g_fairness(world, g)?;
    let non_worsening = le_tol(l_with.value, l_without.value);
    Ok(XPrivacyReport { l_with, l_without, non_worsening })
}

/// Reference values of [`counterexample_world`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleExpected {
    pub l_bar_without: f64,
    pub l_bar_with: f64,
    pub epsilon: f64,
    pub mean_a0: f64,
    pub mean_a1: f64,
}

/// A world where global fairness is perfect without privacy on `X` and
/// strictly worse with it.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub world: TabularWorld,
    pub mech_x: MechanismMatrix,
    pub utility: UtilityTable,
    pub expected: CounterexampleExpected,
}

/// Binary `U`, `X`, `A` with uniform independent priors, `U = 1` exactly when
/// `x̃ = a`, and `M_X` with rows `(0.9, 0.1)` and `(0.7, 0.3)`; `g(u) = u`.
pub fn counterexample_world() -> Counterexample {
    let bin = Alphabet::binary();
    let policy = DecisionPolicy::from_fn(bin.clone(), bin.clone(), bin.clone(), |x, a| {
        if x == a {
            vec![0.0, 1.0]
        } else {
            vec![1.0, 0.0]
        }
    })
    .expect("static policy is valid");
    let world = TabularWorld::new(policy, Prior::uniform(bin.clone()), Prior::uniform(bin.clone()))
        .expect("static world is valid");
    let mech_x = MechanismMatrix::new(bin.clone(), bin.clone(), vec![vec![0.9, 0.1], vec![0.7, 0.3]])
        .expect("static mechanism is valid");
    let utility = UtilityTable::u_value(&bin, 2, 2).expect("binary labels are numeric");
    Counterexample {
        world,
        mech_x,
        utility,
        expected: CounterexampleExpected {
            l_bar_without: 0.0,
            l_bar_with: ln(4.0),
            epsilon: ln(3.0),
            mean_a0: 0.8,
            mean_a1: 0.2,
        },
    }
}

/// One reproduced quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReproCheck {
    pub name: &'static str,
    pub expected: f64,
    pub actual: f64,
    pub passed: bool,
}

/// Tolerance for [`reproduce_counterexample`].
pub const REPRO_TOLERANCE: f64 = 1e-12;

/// Recomputes the counterexample quantities with `mech_x` in place of the
/// reference mechanism and compares each with the reference value.
pub fn reproduce_counterexample(mech_x: &MechanismMatrix) -> Result<Vec<ReproCheck>, Error> {
    let ce = counterexample_world();
    let g = &ce.utility;
    let private = compose_mechanisms(&ce.world, None, Some(mech_x))?;
    let e = ce.expected;
    let actual = [
        ("l_bar_without_mechanism", e.l_bar_without, global_g_fairness(&ce.world, g)?.value),
        ("l_bar_with_mechanism", e.l_bar_with, global_g_fairness(&private, g)?.value),
        ("mechanism_tightest_epsilon", e.epsilon, mech_x.tightest_epsilon()),
        ("mean_utility_a0", e.mean_a0, private.marg_utility(g, 0)?),
        ("mean_utility_a1", e.mean_a1, private.marg_utility(g, 1)?),
    ];
    Ok(actual
        .into_iter()
        .map(|(name, expected, actual)| ReproCheck {
            name,
            expected,
            actual,
            passed: (actual - expected).abs() <= REPRO_TOLERANCE,
        })
        .collect())
}
