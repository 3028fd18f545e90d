//! Utility-aware fairness metrics and the classical group metrics they bound.
//!
//! `L` compares expected utility across groups within each context,
//! `L̄` after marginalizing the context. Both are logs of a worst-case ratio
//! with `0/0` pairs skipped and `c/0` read as `+∞`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::math::log_ratio;
use crate::model::TabularWorld;
use crate::utility::UtilityTable;
use crate::Error;

/// Labels attaining a supremum. `x` is absent for marginal metrics, `u` for
/// utility metrics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub x: Option<String>,
    pub a: String,
    pub a_prime: String,
    pub u: Option<String>,
}

/// A log-ratio metric value in `[0, +∞]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessValue {
    pub value: f64,
    pub witness: Option<Witness>,
}

impl FairnessValue {
    pub fn zero() -> Self {
        Self { value: 0.0, witness: None }
    }

    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

struct Best {
    value: f64,
    at: Option<(Option<usize>, usize, usize, Option<usize>)>,
}

impl Best {
    fn new() -> Self {
        Self { value: 0.0, at: None }
    }

    fn offer(&mut self, r: Option<f64>, at: (Option<usize>, usize, usize, Option<usize>)) {
        if let Some(r) = r {
            if r > self.value {
                self.value = r;
                self.at = Some(at);
            }
        }
    }

    fn finish(self, world: &TabularWorld) -> FairnessValue {
        let witness = self.at.map(|(x, a, b, u)| Witness {
            x: x.map(|i| world.x().label(i).into()),
            a: world.a().label(a).into(),
            a_prime: world.a().label(b).into(),
            u: u.map(|i| world.u().label(i).into()),
        });
        FairnessValue { value: self.value, witness }
    }
}

/// `L = log sup_{x, a, a'} E[g | x, a] / E[g | x, a']`.
pub fn local_g_fairness(world: &TabularWorld, g: &UtilityTable) -> Result<FairnessValue, Error> {
    g.check_shape(world)?;
    let na = world.a().len();
    let mut best = Best::new();
    let mut cells = Vec::with_capacity(na);
    for x in 0..world.x().len() {
        cells.clear();
        cells.extend((0..na).map(|a| world.cond_utility(g, x, a)));
        for a in 0..na {
            for b in 0..na {
                if a != b {
                    best.offer(log_ratio(cells[a], cells[b]), (Some(x), a, b, None));
                }
            }
        }
    }
    Ok(best.finish(world))
}

/// `L̄ = log sup_{a, a'} E[g | a] / E[g | a']`. Groups with zero probability
/// under a dependent joint have no conditional law and are skipped.
pub fn global_g_fairness(world: &TabularWorld, g: &UtilityTable) -> Result<FairnessValue, Error> {
    g.check_shape(world)?;
    let na = world.a().len();
    let mut means = Vec::with_capacity(na);
    for a in 0..na {
        match world.marg_utility(g, a) {
            Ok(v) => means.push(Some(v)),
            Err(Error::UndefinedConditional { .. }) => means.push(None),
            Err(e) => return Err(e),
        }
    }
    let mut best = Best::new();
    for a in 0..na {
        for b in 0..na {
            if let (true, Some(p), Some(q)) = (a != b, means[a], means[b]) {
                best.offer(log_ratio(p, q), (None, a, b, None));
            }
        }
    }
    Ok(best.finish(world))
}

/// `½ Σ |p − q|`, which on a finite alphabet equals `sup_S |p(S) − q(S)|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Largest total-variation gap between `P(U | A = a)` and `P(U | A = a')`.
pub fn demographic_parity(world: &TabularWorld) -> Result<f64, Error> {
    let rows = (0..world.a().len()).map(|a| world.u_given_a(a)).collect::<Result<Vec<_>, _>>()?;
    Ok(max_pairwise_tv(&rows))
}

/// Largest total-variation gap between `P(U | x, a)` and `P(U | x, a')` over
/// all contexts `x`.
pub fn equalized_odds(world: &TabularWorld) -> f64 {
    let policy = world.policy();
    (0..world.x().len())
        .map(|x| {
            let rows: Vec<Vec<f64>> = (0..world.a().len()).map(|a| policy.row(x, a).to_vec()).collect();
            max_pairwise_tv(&rows)
        })
        .fold(0.0, f64::max)
}

fn max_pairwise_tv(rows: &[Vec<f64>]) -> f64 {
    let mut best: f64 = 0.0;
    for (i, p) in rows.iter().enumerate() {
        for q in &rows[i + 1..] {
            best = best.max(total_variation(p, q));
        }
    }
    best.min(1.0)
}

/// `log R_max`, the largest log ratio of decision probabilities between two
/// groups, conditioned on `x` when `conditional` is set and marginal over `X`
/// otherwise.
pub fn ratio_sup(world: &TabularWorld, conditional: bool) -> Result<FairnessValue, Error> {
    let (nx, na, nu) = (world.x().len(), world.a().len(), world.u().len());
    let mut best = Best::new();
    if conditional {
        let policy = world.policy();
        for x in 0..nx {
            for a in 0..na {
                for b in 0..na {
                    if a == b {
                        continue;
                    }
                    for u in 0..nu {
                        best.offer(log_ratio(policy.prob(x, a, u), policy.prob(x, b, u)), (Some(x), a, b, Some(u)));
                    }
                }
            }
        }
    } else {
        let rows = (0..na).map(|a| world.u_given_a(a)).collect::<Result<Vec<_>, _>>()?;
        for a in 0..na {
            for b in 0..na {
                if a == b {
                    continue;
                }
                for u in 0..nu {
                    best.offer(log_ratio(rows[a][u], rows[b][u]), (None, a, b, Some(u)));
                }
            }
        }
    }
    Ok(best.finish(world))
}

/// `g_k(u, x, a) = 1 + k·1{u = u*}` where `u*` is the outcome attaining the
/// conditional ratio supremum. As `k` grows, `exp L(P, g_k)` increases to
/// `R_max`, including when `R_max` is infinite.
pub fn witness_utility_family(world: &TabularWorld, k: f64) -> Result<UtilityTable, Error> {
    if !(k >= 0.0) || !k.is_finite() {
        return Err(Error::InvalidParameter { name: "k", value: k });
    }
    let sup = ratio_sup(world, true)?;
    let target = sup
        .witness
        .and_then(|w| w.u)
        .and_then(|u| world.u().index_of(&u))
        .unwrap_or(0);
    let (nu, nx, na) = (world.u().len(), world.x().len(), world.a().len());
    UtilityTable::from_fn(nu, nx, na, |u, _, _| if u == target { 1.0 + k } else { 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{exp, ln};
    use crate::certificates::counterexample_world;
    use crate::model::{compose_mechanisms, Alphabet, DecisionPolicy, Prior};
    use alloc::vec;

    fn bin() -> Alphabet {
        Alphabet::binary()
    }

    fn one_x_world(rows: [[f64; 2]; 2]) -> TabularWorld {
        let x = Alphabet::new(["only"]).unwrap();
        let policy =
            DecisionPolicy::from_nested(bin(), x.clone(), bin(), &[vec![rows[0].to_vec(), rows[1].to_vec()]]).unwrap();
        TabularWorld::new(policy, Prior::uniform(x), Prior::uniform(bin())).unwrap()
    }

    #[test]
    fn counterexample_local_is_infinite() {
        let ce = counterexample_world();
        let l = local_g_fairness(&ce.world, &ce.utility).unwrap();
        assert!(l.is_infinite());
        assert_eq!(
            l.witness,
            Some(Witness { x: Some("0".into()), a: "0".into(), a_prime: "1".into(), u: None })
        );
    }

    #[test]
    fn global_counterexample_values() {
        let ce = counterexample_world();
        assert_eq!(global_g_fairness(&ce.world, &ce.utility).unwrap().value, 0.0);
        let private = compose_mechanisms(&ce.world, None, Some(&ce.mech_x)).unwrap();
        let v = global_g_fairness(&private, &ce.utility).unwrap().value;
        assert!((v - ln(4.0)).abs() < 1e-12, "{v}");
    }

    #[test]
    fn local_log_two() {
        let w = one_x_world([[0.4, 0.6], [0.7, 0.3]]);
        let g = UtilityTable::u_value(w.u(), 1, 2).unwrap();
        let l = local_g_fairness(&w, &g).unwrap();
        assert!((l.value - ln(2.0)).abs() < 1e-12);
        assert_eq!(l.witness.unwrap().a, "0");
    }

    #[test]
    fn a_free_policy_scores_zero_everywhere() {
        let w = one_x_world([[0.3, 0.7], [0.3, 0.7]]);
        let g = UtilityTable::u_value(w.u(), 1, 2).unwrap();
        assert_eq!(local_g_fairness(&w, &g).unwrap(), FairnessValue::zero());
        assert_eq!(global_g_fairness(&w, &g).unwrap(), FairnessValue::zero());
        assert_eq!(demographic_parity(&w).unwrap(), 0.0);
        assert_eq!(equalized_odds(&w), 0.0);
        assert_eq!(ratio_sup(&w, true).unwrap().value, 0.0);
    }

    #[test]
    fn group_metrics_examples() {
        let ce = counterexample_world();
        let private = compose_mechanisms(&ce.world, None, Some(&ce.mech_x)).unwrap();
        assert!((demographic_parity(&private).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(equalized_odds(&ce.world), 1.0);
        let disjoint = one_x_world([[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(demographic_parity(&disjoint).unwrap(), 1.0);
        assert_eq!(equalized_odds(&disjoint), demographic_parity(&disjoint).unwrap());
    }

    #[test]
    fn ratio_sup_examples() {
        let w = one_x_world([[0.75, 0.25], [0.25, 0.75]]);
        assert!((ratio_sup(&w, true).unwrap().value - ln(3.0)).abs() < 1e-12);
        assert!((ratio_sup(&w, false).unwrap().value - ln(3.0)).abs() < 1e-12);
        assert!(ratio_sup(&counterexample_world().world, true).unwrap().is_infinite());
    }

    #[test]
    fn witness_family_converges() {
        let w = one_x_world([[0.75, 0.25], [0.25, 0.75]]);
        let g0 = witness_utility_family(&w, 0.0).unwrap();
        assert_eq!(local_g_fairness(&w, &g0).unwrap().value, 0.0);
        let mut last = 1.0;
        for k in [1.0, 10.0, 100.0, 1e4, 1e6] {
            let g = witness_utility_family(&w, k).unwrap();
            let r = exp(local_g_fairness(&w, &g).unwrap().value);
            // (1 + k·q) / (1 + k·q') on the witness pair
            let closed = (1.0 + 0.75 * k) / (1.0 + 0.25 * k);
            assert!((r - closed).abs() < 1e-12);
            assert!(r >= last);
            last = r;
        }
        assert!((last - 3.0).abs() < 1e-4);
    }

    #[test]
    fn scale_invariance() {
        let ce = counterexample_world();
        let private = compose_mechanisms(&ce.world, None, Some(&ce.mech_x)).unwrap();
        let g = ce.utility.scaled(7.5).unwrap();
        let a = global_g_fairness(&private, &ce.utility).unwrap().value;
        let b = global_g_fairness(&private, &g).unwrap().value;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn dependent_zero_group_is_skipped_for_global() {
        let policy = DecisionPolicy::from_nested(
            bin(),
            bin(),
            bin(),
            &[vec![vec![0.5, 0.5], vec![0.0, 1.0]], vec![vec![0.2, 0.8], vec![1.0, 0.0]]],
        )
        .unwrap();
        let w = TabularWorld::with_joint(
            policy,
            Prior::uniform(bin()),
            Prior::new(bin(), vec![1.0, 0.0]).unwrap(),
            vec![vec![0.5, 0.0], vec![0.5, 0.0]],
        )
        .unwrap();
        let g = UtilityTable::u_value(w.u(), 2, 2).unwrap();
        assert_eq!(global_g_fairness(&w, &g).unwrap().value, 0.0);
        assert!(matches!(demographic_parity(&w), Err(Error::UndefinedConditional { .. })));
    }
}
