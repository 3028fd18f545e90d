//! Finite-alphabet model of the decision pipeline.
//!
//! A [`TabularWorld`] holds priors over the non-sensitive features `X` and the
//! sensitive attribute `A` together with the decision table `P(U | X, A)`.
//! Mechanisms on `X` and `A` are folded into the table by
//! [`compose_mechanisms`], which yields the law the decision maker actually
//! induces when it only sees the released values.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::{check_row, pick, RowFault};
use crate::mechanism::MechanismMatrix;
use crate::utility::UtilityTable;
use crate::{Error, COMPOSE_TOLERANCE, LOAD_TOLERANCE};

/// Ordered set of distinct category names.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alphabet {
    labels: Vec<String>,
}

impl Alphabet {
    pub fn new<I, S>(labels: I) -> Result<Self, Error>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::DuplicateLabel { label: l.clone() });
            }
        }
        Ok(Self { labels })
    }

    /// `{"0", "1"}`, the alphabet used by the binary examples.
    pub fn binary() -> Self {
        Self { labels: vec!["0".into(), "1".into()] }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub(crate) fn lookup(&self, axis: &'static str, label: &str) -> Result<usize, Error> {
        self.index_of(label)
            .ok_or_else(|| Error::UnknownLabel { axis, label: label.into() })
    }
}

/// Probability vector over an alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    alphabet: Alphabet,
    probs: Vec<f64>,
}

impl Prior {
    pub fn new(alphabet: Alphabet, probs: Vec<f64>) -> Result<Self, Error> {
        if probs.len() != alphabet.len() {
            return Err(Error::ShapeMismatch {
                what: "prior",
                expected: alphabet.len(),
                found: probs.len(),
            });
        }
        check_row(&probs, LOAD_TOLERANCE).map_err(|fault| row_error("prior", String::new(), fault))?;
        Ok(Self { alphabet, probs })
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        let k = alphabet.len();
        Self { probs: vec![1.0 / k as f64; k], alphabet }
    }

    pub fn point_mass(alphabet: Alphabet, index: usize) -> Self {
        let mut probs = vec![0.0; alphabet.len()];
        probs[index] = 1.0;
        Self { alphabet, probs }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Conditional decision table `P(U | X, A)`, stored row-major as `[x][a][u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionPolicy {
    u: Alphabet,
    x: Alphabet,
    a: Alphabet,
    table: Vec<f64>,
}

impl DecisionPolicy {
    /// Builds a policy from a flat `[x][a][u]` table.
    pub fn new(u: Alphabet, x: Alphabet, a: Alphabet, table: Vec<f64>) -> Result<Self, Error> {
        Self::with_tolerance(u, x, a, table, LOAD_TOLERANCE)
    }

    pub fn from_nested(
        u: Alphabet,
        x: Alphabet,
        a: Alphabet,
        nested: &[Vec<Vec<f64>>],
    ) -> Result<Self, Error> {
        if nested.len() != x.len() {
            return Err(Error::ShapeMismatch { what: "policy (x axis)", expected: x.len(), found: nested.len() });
        }
        let mut table = Vec::with_capacity(x.len() * a.len() * u.len());
        for by_a in nested {
            if by_a.len() != a.len() {
                return Err(Error::ShapeMismatch { what: "policy (a axis)", expected: a.len(), found: by_a.len() });
            }
            for row in by_a {
                if row.len() != u.len() {
                    return Err(Error::ShapeMismatch { what: "policy (u axis)", expected: u.len(), found: row.len() });
                }
                table.extend_from_slice(row);
            }
        }
        Self::new(u, x, a, table)
    }

    /// Builds a policy whose row `(x, a)` is `f(x, a)`.
    pub fn from_fn<F>(u: Alphabet, x: Alphabet, a: Alphabet, mut f: F) -> Result<Self, Error>
    where
        F: FnMut(usize, usize) -> Vec<f64>,
    {
        let mut table = Vec::with_capacity(x.len() * a.len() * u.len());
        for xi in 0..x.len() {
            for ai in 0..a.len() {
                table.extend(f(xi, ai));
            }
        }
        Self::new(u, x, a, table)
    }

    fn with_tolerance(
        u: Alphabet,
        x: Alphabet,
        a: Alphabet,
        table: Vec<f64>,
        tol: f64,
    ) -> Result<Self, Error> {
        let expected = x.len() * a.len() * u.len();
        if table.len() != expected {
            return Err(Error::ShapeMismatch { what: "policy", expected, found: table.len() });
        }
        for (r, row) in table.chunks(u.len()).enumerate() {
            check_row(row, tol).map_err(|fault| {
                let (xi, ai) = (r / a.len(), r % a.len());
                match fault {
                    RowFault::Entry(ui, value) => Error::InvalidProbability {
                        what: "policy",
                        location: format!("[{xi}][{ai}][{ui}]"),
                        value,
                    },
                    RowFault::Sum(sum) => Error::RowSum { what: "policy", location: format!("[{xi}][{ai}]"), sum },
                }
            })?;
        }
        Ok(Self { u, x, a, table })
    }

    pub fn u_alphabet(&self) -> &Alphabet {
        &self.u
    }

    pub fn x_alphabet(&self) -> &Alphabet {
        &self.x
    }

    pub fn a_alphabet(&self) -> &Alphabet {
        &self.a
    }

    /// `P(U = · | X = x, A = a)` by index.
    pub fn row(&self, x: usize, a: usize) -> &[f64] {
        let k = self.u.len();
        let start = (x * self.a.len() + a) * k;
        &self.table[start..start + k]
    }

    pub fn prob(&self, x: usize, a: usize, u: usize) -> f64 {
        self.row(x, a)[u]
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }
}

/// Joint law of `(U, X, A)` given by priors and a decision policy.
///
/// Without `joint_xa` the features and the sensitive attribute are taken to
/// be independent with the product prior.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularWorld {
    policy: DecisionPolicy,
    prior_x: Prior,
    prior_a: Prior,
    joint_xa: Option<Vec<f64>>,
}

impl TabularWorld {
    pub fn new(policy: DecisionPolicy, prior_x: Prior, prior_a: Prior) -> Result<Self, Error> {
        if prior_x.alphabet() != policy.x_alphabet() {
            return Err(Error::AlphabetMismatch { what: "prior_x vs policy x alphabet" });
        }
        if prior_a.alphabet() != policy.a_alphabet() {
            return Err(Error::AlphabetMismatch { what: "prior_a vs policy a alphabet" });
        }
        Ok(Self { policy, prior_x, prior_a, joint_xa: None })
    }

    /// World with a dependent `(X, A)` joint, indexed `[x][a]`.
    pub fn with_joint(
        policy: DecisionPolicy,
        prior_x: Prior,
        prior_a: Prior,
        joint_xa: Vec<Vec<f64>>,
    ) -> Result<Self, Error> {
        let mut world = Self::new(policy, prior_x, prior_a)?;
        let (nx, na) = (world.x().len(), world.a().len());
        if joint_xa.len() != nx {
            return Err(Error::ShapeMismatch { what: "joint_xa (x axis)", expected: nx, found: joint_xa.len() });
        }
        let mut flat = Vec::with_capacity(nx * na);
        for row in &joint_xa {
            if row.len() != na {
                return Err(Error::ShapeMismatch { what: "joint_xa (a axis)", expected: na, found: row.len() });
            }
            flat.extend_from_slice(row);
        }
        check_row(&flat, LOAD_TOLERANCE).map_err(|fault| match fault {
            RowFault::Entry(i, value) => Error::InvalidProbability {
                what: "joint_xa",
                location: format!("[{}][{}]", i / na, i % na),
                value,
            },
            RowFault::Sum(sum) => Error::RowSum { what: "joint_xa", location: String::new(), sum },
        })?;
        for xi in 0..nx {
            let found: f64 = flat[xi * na..(xi + 1) * na].iter().sum();
            let expected = world.prior_x.probs()[xi];
            if (found - expected).abs() > LOAD_TOLERANCE {
                return Err(Error::MarginalMismatch { axis: "x", index: xi, expected, found });
            }
        }
        for ai in 0..na {
            let found: f64 = (0..nx).map(|xi| flat[xi * na + ai]).sum();
            let expected = world.prior_a.probs()[ai];
            if (found - expected).abs() > LOAD_TOLERANCE {
                return Err(Error::MarginalMismatch { axis: "a", index: ai, expected, found });
            }
        }
        world.joint_xa = Some(flat);
        Ok(world)
    }

    pub fn policy(&self) -> &DecisionPolicy {
        &self.policy
    }

    pub fn prior_x(&self) -> &Prior {
        &self.prior_x
    }

    pub fn prior_a(&self) -> &Prior {
        &self.prior_a
    }

    pub fn joint_xa(&self) -> Option<&[f64]> {
        self.joint_xa.as_deref()
    }

    pub fn u(&self) -> &Alphabet {
        self.policy.u_alphabet()
    }

    pub fn x(&self) -> &Alphabet {
        self.policy.x_alphabet()
    }

    pub fn a(&self) -> &Alphabet {
        self.policy.a_alphabet()
    }

    /// `P(X = x, A = a)`.
    pub fn joint_prob(&self, x: usize, a: usize) -> f64 {
        match &self.joint_xa {
            Some(joint) => joint[x * self.a().len() + a],
            None => self.prior_x.probs()[x] * self.prior_a.probs()[a],
        }
    }

    /// True when `X` and `A` are independent, either by construction or
    /// because the supplied joint factorizes within the load tolerance.
    pub fn is_independent(&self) -> bool {
        match &self.joint_xa {
            None => true,
            Some(joint) => {
                let na = self.a().len();
                joint.iter().enumerate().all(|(i, &p)| {
                    let product = self.prior_x.probs()[i / na] * self.prior_a.probs()[i % na];
                    (p - product).abs() <= LOAD_TOLERANCE
                })
            }
        }
    }

    /// `P(X = · | A = a)`.
    pub fn x_given_a(&self, a: usize) -> Result<Vec<f64>, Error> {
        match &self.joint_xa {
            None => Ok(self.prior_x.probs().to_vec()),
            Some(joint) => {
                let pa = self.prior_a.probs()[a];
                if pa <= 0.0 {
                    return Err(Error::UndefinedConditional { a: self.a().label(a).into() });
                }
                let na = self.a().len();
                Ok((0..self.x().len()).map(|xi| joint[xi * na + a] / pa).collect())
            }
        }
    }

    /// `P(U = · | A = a)`, marginalizing the features.
    pub fn u_given_a(&self, a: usize) -> Result<Vec<f64>, Error> {
        let weights = self.x_given_a(a)?;
        let mut out = vec![0.0; self.u().len()];
        for (xi, w) in weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(self.policy.row(xi, a)) {
                *o += w * p;
            }
        }
        Ok(out)
    }

    /// `E[g(U, x, a) | X = x, A = a]` by index. `g` must match the world's shape.
    pub(crate) fn cond_utility(&self, g: &UtilityTable, x: usize, a: usize) -> f64 {
        self.policy
            .row(x, a)
            .iter()
            .enumerate()
            .map(|(u, p)| g.get(u, x, a) * p)
            .sum()
    }

    pub(crate) fn marg_utility(&self, g: &UtilityTable, a: usize) -> Result<f64, Error> {
        let weights = self.x_given_a(a)?;
        Ok(weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(xi, w)| w * self.cond_utility(g, xi, a))
            .sum())
    }

    fn replace_policy(&self, policy: DecisionPolicy) -> Self {
        Self {
            policy,
            prior_x: self.prior_x.clone(),
            prior_a: self.prior_a.clone(),
            joint_xa: self.joint_xa.clone(),
        }
    }
}

/// `E[g(U, X, A) | X = x, A = a] = Σ_u g(u, x, a) P(u | x, a)`.
pub fn conditional_utility(
    world: &TabularWorld,
    g: &UtilityTable,
    x: &str,
    a: &str,
) -> Result<f64, Error> {
    g.check_shape(world)?;
    let xi = world.x().lookup("x", x)?;
    let ai = world.a().lookup("a", a)?;
    Ok(world.cond_utility(g, xi, ai))
}

/// `E[g(U, X, A) | A = a] = Σ_x P(x | a) E[g | x, a]`.
pub fn marginal_utility(world: &TabularWorld, g: &UtilityTable, a: &str) -> Result<f64, Error> {
    g.check_shape(world)?;
    let ai = world.a().lookup("a", a)?;
    world.marg_utility(g, ai)
}

/// Folds release mechanisms into the decision table:
/// `P'(u | x, a) = Σ_{x̃, ã} P(u | x̃, ã) M_X(x̃ | x) M_A(ã | a)`.
///
/// A missing mechanism is the identity. Priors are carried over unchanged.
pub fn compose_mechanisms(
    world: &TabularWorld,
    mech_a: Option<&MechanismMatrix>,
    mech_x: Option<&MechanismMatrix>,
) -> Result<TabularWorld, Error> {
    for (mech, alphabet, what) in [
        (mech_a, world.a(), "mechanism on A must map the A alphabet to itself"),
        (mech_x, world.x(), "mechanism on X must map the X alphabet to itself"),
    ] {
        if let Some(m) = mech {
            if m.input() != alphabet || m.output() != alphabet {
                return Err(Error::AlphabetMismatch { what });
            }
        }
    }
    let (nx, na, nu) = (world.x().len(), world.a().len(), world.u().len());
    let policy = world.policy();
    let mut table = vec![0.0; nx * na * nu];
    for x in 0..nx {
        for a in 0..na {
            let out = &mut table[(x * na + a) * nu..(x * na + a + 1) * nu];
            for xt in 0..nx {
                let wx = mech_x.map_or(if xt == x { 1.0 } else { 0.0 }, |m| m.prob(x, xt));
                if wx == 0.0 {
                    continue;
                }
                for at in 0..na {
                    let wa = mech_a.map_or(if at == a { 1.0 } else { 0.0 }, |m| m.prob(a, at));
                    if wa == 0.0 {
                        continue;
                    }
                    let w = wx * wa;
                    for (o, p) in out.iter_mut().zip(policy.row(xt, at)) {
                        *o += w * p;
                    }
                }
            }
        }
    }
    let composed = DecisionPolicy::with_tolerance(
        world.u().clone(),
        world.x().clone(),
        world.a().clone(),
        table,
        COMPOSE_TOLERANCE,
    )?;
    Ok(world.replace_policy(composed))
}

/// One simulated pass through the pipeline: true features and attribute,
/// their released values, and the decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub x: usize,
    pub a: usize,
    pub x_tilde: usize,
    pub a_tilde: usize,
    pub u: usize,
}

/// Sampled records together with the alphabets their indices refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    u: Alphabet,
    x: Alphabet,
    a: Alphabet,
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new(u: Alphabet, x: Alphabet, a: Alphabet, records: Vec<TraceRecord>) -> Result<Self, Error> {
        for r in &records {
            if r.x >= x.len() || r.x_tilde >= x.len() {
                return Err(Error::ShapeMismatch { what: "trace record x index", expected: x.len(), found: r.x.max(r.x_tilde) });
            }
            if r.a >= a.len() || r.a_tilde >= a.len() {
                return Err(Error::ShapeMismatch { what: "trace record a index", expected: a.len(), found: r.a.max(r.a_tilde) });
            }
            if r.u >= u.len() {
                return Err(Error::ShapeMismatch { what: "trace record u index", expected: u.len(), found: r.u });
            }
        }
        Ok(Self { u, x, a, records })
    }

    pub fn u(&self) -> &Alphabet {
        &self.u
    }

    pub fn x(&self) -> &Alphabet {
        &self.x
    }

    pub fn a(&self) -> &Alphabet {
        &self.a
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Draws `n` i.i.d. records from the pipeline. Deterministic in `seed`.
pub fn sample_trace(
    world: &TabularWorld,
    mech_a: Option<&MechanismMatrix>,
    mech_x: Option<&MechanismMatrix>,
    n: usize,
    seed: u64,
) -> Result<Trace, Error> {
    if n == 0 {
        return Err(Error::InvalidSampleCount);
    }
    // validates alphabets; the composed table itself is not needed for sampling
    compose_mechanisms(world, mech_a, mech_x)?;
    let (nx, na) = (world.x().len(), world.a().len());
    let joint: Vec<f64> = (0..nx * na).map(|i| world.joint_prob(i / na, i % na)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let cell = pick(&joint, rng.gen());
        let (x, a) = (cell / na, cell % na);
        let x_tilde = match mech_x {
            Some(m) => pick(m.row(x), rng.gen()),
            None => x,
        };
        let a_tilde = match mech_a {
            Some(m) => pick(m.row(a), rng.gen()),
            None => a,
        };
        let u = pick(world.policy().row(x_tilde, a_tilde), rng.gen());
        records.push(TraceRecord { x, a, x_tilde, a_tilde, u });
    }
    Trace::new(world.u().clone(), world.x().clone(), world.a().clone(), records)
}

fn row_error(what: &'static str, location: String, fault: RowFault) -> Error {
    match fault {
        RowFault::Entry(i, value) => Error::InvalidProbability { what, location: format!("{location}[{i}]"), value },
        RowFault::Sum(sum) => Error::RowSum { what, location, sum },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::counterexample_world;
    use crate::mechanism::{randomized_response, MechanismMatrix};
    use alloc::vec;

    fn bin() -> Alphabet {
        Alphabet::binary()
    }

    fn small_world() -> TabularWorld {
        let policy = DecisionPolicy::from_nested(
            bin(),
            bin(),
            bin(),
            &[
                vec![vec![0.25, 0.75], vec![0.5, 0.5]],
                vec![vec![0.1, 0.9], vec![0.6, 0.4]],
            ],
        )
        .unwrap();
        TabularWorld::new(policy, Prior::uniform(bin()), Prior::uniform(bin())).unwrap()
    }

    #[test]
    fn alphabet_rejects_duplicates_and_empty() {
        assert_eq!(Alphabet::new(["a", "a"]), Err(Error::DuplicateLabel { label: "a".into() }));
        assert_eq!(Alphabet::new(Vec::<String>::new()), Err(Error::EmptyAlphabet));
    }

    #[test]
    fn policy_reports_first_bad_row() {
        let err = DecisionPolicy::new(bin(), bin(), bin(), vec![0.5, 0.5, 0.5, 0.5, 0.5, 0.6, 0.5, 0.5]).unwrap_err();
        assert!(matches!(err, Error::RowSum { ref location, .. } if location == "[1][0]"), "{err:?}");
        let err = DecisionPolicy::new(bin(), bin(), bin(), vec![0.5, 0.5, -0.1, 1.1, 0.5, 0.5, 0.5, 0.5]).unwrap_err();
        assert!(matches!(err, Error::InvalidProbability { ref location, .. } if location == "[0][1][0]"));
    }

    #[test]
    fn conditional_utility_hand_sum() {
        let world = small_world();
        let g = UtilityTable::u_value(world.u(), 2, 2).unwrap();
        assert!((conditional_utility(&world, &g, "0", "0").unwrap() - 0.75).abs() < 1e-15);
        let one = UtilityTable::constant(2, 2, 2, 1.0);
        assert!((conditional_utility(&world, &one, "1", "1").unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            conditional_utility(&world, &g, "7", "0"),
            Err(Error::UnknownLabel { axis: "x", .. })
        ));
    }

    #[test]
    fn marginal_utility_weighted_average() {
        // conditional utilities 0.2 and 0.6 under a uniform X prior
        let policy = DecisionPolicy::from_nested(
            bin(),
            bin(),
            Alphabet::new(["g"]).unwrap(),
            &[vec![vec![0.8, 0.2]], vec![vec![0.4, 0.6]]],
        )
        .unwrap();
        let a = Alphabet::new(["g"]).unwrap();
        let world = TabularWorld::new(policy, Prior::uniform(bin()), Prior::uniform(a)).unwrap();
        let g = UtilityTable::u_value(world.u(), 2, 1).unwrap();
        assert!((marginal_utility(&world, &g, "g").unwrap() - 0.4).abs() < 1e-15);
        let c = UtilityTable::constant(2, 2, 1, 3.5);
        assert!((marginal_utility(&world, &c, "g").unwrap() - 3.5).abs() < 1e-15);
    }

    #[test]
    fn counterexample_means() {
        let ce = counterexample_world();
        let g = &ce.utility;
        assert!((marginal_utility(&ce.world, g, "0").unwrap() - 0.5).abs() < 1e-15);
        let private = compose_mechanisms(&ce.world, None, Some(&ce.mech_x)).unwrap();
        assert!((private.policy().prob(0, 0, 1) - 0.9).abs() < 1e-15);
        assert!((private.policy().prob(1, 0, 1) - 0.7).abs() < 1e-15);
        assert!((conditional_utility(&private, g, "0", "0").unwrap() - 0.9).abs() < 1e-15);
        assert!((conditional_utility(&private, g, "1", "0").unwrap() - 0.7).abs() < 1e-15);
        assert!((marginal_utility(&private, g, "0").unwrap() - 0.8).abs() < 1e-12);
        assert!((marginal_utility(&private, g, "1").unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn dependent_world_needs_positive_group_mass() {
        let w = small_world();
        let world = TabularWorld::with_joint(
            w.policy().clone(),
            Prior::new(bin(), vec![0.5, 0.5]).unwrap(),
            Prior::new(bin(), vec![1.0, 0.0]).unwrap(),
            vec![vec![0.5, 0.0], vec![0.5, 0.0]],
        )
        .unwrap();
        let g = UtilityTable::u_value(world.u(), 2, 2).unwrap();
        assert!(matches!(marginal_utility(&world, &g, "1"), Err(Error::UndefinedConditional { .. })));
        assert!(!world.is_independent() || world.joint_prob(0, 1) == 0.0);
    }

    #[test]
    fn joint_marginals_must_match() {
        let w = small_world();
        let err = TabularWorld::with_joint(
            w.policy().clone(),
            Prior::uniform(bin()),
            Prior::uniform(bin()),
            vec![vec![0.4, 0.1], vec![0.1, 0.4]],
        );
        assert!(err.is_ok());
        let err = TabularWorld::with_joint(
            w.policy().clone(),
            Prior::uniform(bin()),
            Prior::uniform(bin()),
            vec![vec![0.5, 0.1], vec![0.0, 0.4]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::MarginalMismatch { axis: "x", index: 0, .. }));
    }

    #[test]
    fn identity_composition_is_noop() {
        let world = small_world();
        let id = MechanismMatrix::identity(bin());
        let composed = compose_mechanisms(&world, Some(&id), Some(&id)).unwrap();
        assert_eq!(composed.policy().table(), world.policy().table());
    }

    #[test]
    fn uniform_mechanism_erases_attribute() {
        let world = small_world();
        let uniform = randomized_response(&bin(), 0.0).unwrap();
        let composed = compose_mechanisms(&world, Some(&uniform), None).unwrap();
        for x in 0..2 {
            let expected: Vec<f64> = (0..2)
                .map(|u| 0.5 * (world.policy().prob(x, 0, u) + world.policy().prob(x, 1, u)))
                .collect();
            for a in 0..2 {
                for u in 0..2 {
                    assert!((composed.policy().prob(x, a, u) - expected[u]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn composition_rejects_foreign_alphabet() {
        let world = small_world();
        let m = MechanismMatrix::identity(Alphabet::new(["p", "q"]).unwrap());
        assert!(matches!(compose_mechanisms(&world, Some(&m), None), Err(Error::AlphabetMismatch { .. })));
    }

    #[test]
    fn sampling_is_deterministic_and_forced() {
        let world = small_world();
        assert_eq!(sample_trace(&world, None, None, 0, 1), Err(Error::InvalidSampleCount));
        let t1 = sample_trace(&world, None, None, 500, 42).unwrap();
        let t2 = sample_trace(&world, None, None, 500, 42).unwrap();
        assert_eq!(t1, t2);

        let policy = DecisionPolicy::from_nested(
            bin(),
            bin(),
            bin(),
            &[vec![vec![1.0, 0.0], vec![1.0, 0.0]], vec![vec![0.0, 1.0], vec![1.0, 0.0]]],
        )
        .unwrap();
        let forced = TabularWorld::new(policy, Prior::point_mass(bin(), 1), Prior::point_mass(bin(), 0)).unwrap();
        let t = sample_trace(&forced, None, None, 1, 9).unwrap();
        assert_eq!(t.records(), &[TraceRecord { x: 1, a: 0, x_tilde: 1, a_tilde: 0, u: 1 }]);
    }

    #[test]
    fn counterexample_group_mean_statistically() {
        let ce = counterexample_world();
        let trace = sample_trace(&ce.world, None, Some(&ce.mech_x), 100_000, 7).unwrap();
        let (mut hits, mut total) = (0usize, 0usize);
        for r in trace.records().iter().filter(|r| r.a == 0) {
            total += 1;
            hits += r.u;
        }
        let mean = hits as f64 / total as f64;
        assert!((mean - 0.8).abs() < 0.01, "{mean}");
    }
}
