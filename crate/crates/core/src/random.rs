//! Seeded generators of random worlds, utilities and mechanisms for
//! randomized checks.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::math::ln;
use crate::mechanism::{randomized_response, MechanismMatrix};
use crate::model::{Alphabet, DecisionPolicy, Prior, TabularWorld};
use crate::utility::UtilityTable;

/// Alphabet `{prefix0, prefix1, …}` of size `k`.
pub fn alphabet(prefix: &str, k: usize) -> Alphabet {
    Alphabet::new((0..k).map(|i| format!("{prefix}{i}"))).expect("generated labels are distinct")
}

/// A flat-Dirichlet draw of length `k`. Each entry is independently zeroed
/// with probability `zero_prob` (at least one entry always survives), and
/// surviving entries are mixed with the uniform vector by `floor` so they
/// stay at least `floor / k`.
pub fn distribution<R: Rng + ?Sized>(rng: &mut R, k: usize, zero_prob: f64, floor: f64) -> Vec<f64> {
    let keep: Vec<bool> = loop {
        let keep: Vec<bool> = (0..k).map(|_| !rng.gen_bool(zero_prob)).collect();
        if keep.iter().any(|b| *b) {
            break keep;
        }
    };
    let raw: Vec<f64> = keep
        .iter()
        .map(|&k| if k { -ln(1.0 - rng.gen::<f64>()) + 1e-12 } else { 0.0 })
        .collect();
    let total: f64 = raw.iter().sum();
    let live = keep.iter().filter(|b| **b).count() as f64;
    raw.iter()
        .zip(&keep)
        .map(|(r, &k)| if k { (1.0 - floor) * r / total + floor / live } else { 0.0 })
        .collect()
}

/// Shape and sparsity of a random world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldShape {
    pub nu: usize,
    pub nx: usize,
    pub na: usize,
    /// Chance that a policy entry is exactly zero.
    pub zero_prob: f64,
    /// Mixing weight with the uniform row, bounding entries away from zero.
    pub floor: f64,
}

impl WorldShape {
    pub fn dense(nu: usize, nx: usize, na: usize) -> Self {
        Self { nu, nx, na, zero_prob: 0.0, floor: 0.0 }
    }
}

/// Random policy with strictly positive independent priors.
pub fn world<R: Rng + ?Sized>(rng: &mut R, shape: WorldShape) -> TabularWorld {
    let (u, x, a) = (alphabet("u", shape.nu), alphabet("x", shape.nx), alphabet("a", shape.na));
    let policy = DecisionPolicy::from_fn(u, x.clone(), a.clone(), |_, _| {
        distribution(rng, shape.nu, shape.zero_prob, shape.floor)
    })
    .expect("generated rows are stochastic");
    let px = Prior::new(x, distribution(rng, shape.nx, 0.0, 0.05)).expect("generated prior is valid");
    let pa = Prior::new(a, distribution(rng, shape.na, 0.0, 0.05)).expect("generated prior is valid");
    TabularWorld::new(policy, px, pa).expect("alphabets agree")
}

/// Which arguments a random utility may depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtilityKind {
    General,
    IndependentOfA,
    FunctionOfU,
}

/// Random utility with values in `[0, gamma]`; each value is zero with
/// probability `zero_prob`.
pub fn utility<R: Rng + ?Sized>(
    rng: &mut R,
    (nu, nx, na): (usize, usize, usize),
    kind: UtilityKind,
    gamma: f64,
    zero_prob: f64,
) -> UtilityTable {
    let draw = |rng: &mut R| if rng.gen_bool(zero_prob) { 0.0 } else { gamma * rng.gen::<f64>() };
    let by_u: Vec<f64> = (0..nu).map(|_| draw(rng)).collect();
    let by_ux: Vec<f64> = (0..nu * nx).map(|_| draw(rng)).collect();
    let full: Vec<f64> = (0..nu * nx * na).map(|_| draw(rng)).collect();
    UtilityTable::from_fn(nu, nx, na, |u, x, a| match kind {
        UtilityKind::FunctionOfU => by_u[u],
        UtilityKind::IndependentOfA => by_ux[u * nx + x],
        UtilityKind::General => full[(u * nx + x) * na + a],
    })
    .expect("generated values are non-negative")
}

/// Random row-stochastic `k_in × k_out` mechanism with optional exact zeros.
pub fn mechanism<R: Rng + ?Sized>(rng: &mut R, k_in: usize, k_out: usize, zero_prob: f64) -> MechanismMatrix {
    let rows = (0..k_in).map(|_| distribution(rng, k_out, zero_prob, 0.0)).collect();
    MechanismMatrix::new(alphabet("i", k_in), alphabet("o", k_out), rows).expect("generated rows are stochastic")
}

/// An `(ε, δ)`-DP mechanism on `alphabet`: with probability `1 − δ` apply
/// k-ary randomized response at level `ε`, otherwise an arbitrary random
/// channel.
pub fn dp_mechanism<R: Rng + ?Sized>(rng: &mut R, alphabet: &Alphabet, epsilon: f64, delta: f64) -> MechanismMatrix {
    let k = alphabet.len();
    let rr = randomized_response(alphabet, epsilon).expect("alphabet has at least two labels");
    let rows = (0..k)
        .map(|i| {
            let noise = distribution(rng, k, 0.3, 0.0);
            rr.row(i).iter().zip(noise).map(|(p, n)| (1.0 - delta) * p + delta * n).collect()
        })
        .collect();
    MechanismMatrix::new(alphabet.clone(), alphabet.clone(), rows).expect("mixture rows are stochastic")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn distributions_are_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 1..6 {
            for _ in 0..200 {
                let d = distribution(&mut rng, k, 0.4, 0.1);
                assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(d.iter().all(|p| *p >= 0.0));
            }
        }
    }

    #[test]
    fn dp_mechanism_meets_its_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let k = rng.gen_range(2..5);
            let eps = rng.gen_range(0.0..4.0);
            let delta = rng.gen_range(0.0..0.3);
            let m = dp_mechanism(&mut rng, &alphabet("a", k), eps, delta);
            assert!(m.tightest_delta(eps) <= delta + 1e-12);
        }
    }
}
