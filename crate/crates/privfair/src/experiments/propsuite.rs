//! Randomized theorem checks over seeded random instances.

use privfair_core::math::exp;
use privfair_core::random::{self, UtilityKind, WorldShape};
use privfair_core::{
    certify, compose_mechanisms, demographic_parity, equalized_odds, global_g_fairness, local_g_fairness,
    randomized_response, ratio_sup, x_privacy_check, AttributeMetric, DecisionPolicy, MechanismMatrix, Prior,
    TabularWorld, UtilityTable,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::derive_seed;
use crate::formats::{MechanismFile, WorldFile};

pub const TOLERANCE: f64 = 1e-9;

/// Alphabet sizes `(|U|, |X|, |A|)`.
pub type Dims = (usize, usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Pass,
    Fail(String),
    /// The instance does not meet the theorem's hypotheses.
    Hypothesis(String),
}

/// A random world with a utility, mechanisms and a budget; each check reads
/// the parts it needs.
#[derive(Debug, Clone)]
pub struct Instance {
    pub world: TabularWorld,
    pub g: UtilityTable,
    pub mechs: Vec<MechanismMatrix>,
    pub epsilon: f64,
    pub delta: f64,
}

impl Instance {
    pub fn to_json(&self) -> Value {
        let (nu, nx, na) = self.g.shape();
        let g: Vec<Vec<Vec<f64>>> =
            (0..nu).map(|u| (0..nx).map(|x| (0..na).map(|a| self.g.get(u, x, a)).collect()).collect()).collect();
        json!({
            "world": WorldFile::from_world(&self.world),
            "utility": { "g": g },
            "mechanisms": self.mechs.iter().map(MechanismFile::from_mechanism).collect::<Vec<_>>(),
            "epsilon": self.epsilon,
            "delta": self.delta,
        })
    }
}

#[derive(Clone, Copy)]
pub struct Check {
    pub name: &'static str,
    pub dims: fn(&mut ChaCha8Rng) -> Dims,
    pub generate: fn(&mut ChaCha8Rng, Dims) -> Instance,
    pub verify: fn(&Instance) -> Outcome,
}

fn small_dims(r: &mut ChaCha8Rng) -> Dims {
    (r.gen_range(2..=4), r.gen_range(1..=4), r.gen_range(2..=4))
}

fn shape(d: Dims, zero_prob: f64, floor: f64) -> WorldShape {
    WorldShape { nu: d.0, nx: d.1, na: d.2, zero_prob, floor }
}

fn self_mechanism(r: &mut ChaCha8Rng, alphabet: &privfair_core::Alphabet, zero_prob: f64) -> MechanismMatrix {
    let m = random::mechanism(r, alphabet.len(), alphabet.len(), zero_prob);
    MechanismMatrix::new(alphabet.clone(), alphabet.clone(), m.rows()).expect("same shape")
}

fn plain(world: TabularWorld, g: UtilityTable) -> Instance {
    Instance { world, g, mechs: Vec::new(), epsilon: 0.0, delta: 0.0 }
}

fn gen_chain(r: &mut ChaCha8Rng, d: Dims) -> Instance {
    let world = random::world(r, shape(d, 0.0, 0.05));
    let epsilon = r.gen_range(0.0..4.0);
    let delta = r.gen_range(0.0..0.3);
    let m = random::dp_mechanism(r, world.a(), epsilon, delta);
    let raw = random::utility(r, d, UtilityKind::General, 1.0, 0.0);
    let g = UtilityTable::from_fn(d.0, d.1, d.2, |u, x, a| 0.05 + raw.get(u, x, a)).expect("positive");
    Instance { world, g, mechs: vec![m], epsilon, delta }
}

fn verify_chain(i: &Instance) -> Outcome {
    match certify(&i.world, &i.g, &AttributeMetric::Discrete, &i.mechs[0], None, i.delta) {
        Err(e) => Outcome::Fail(format!("certify failed: {e}")),
        Ok(c) => match (c.violation, c.holds) {
            (Some(v), _) => Outcome::Hypothesis(v.to_string()),
            (None, true) => Outcome::Pass,
            (None, false) => Outcome::Fail(format!("L̄ = {} ≤ L = {} ≤ bound = {} fails", c.l_bar.value, c.l.value, c.bound)),
        },
    }
}

fn gen_pure(r: &mut ChaCha8Rng, d: Dims) -> Instance {
    let world = random::world(r, shape(d, 0.2, 0.0));
    let epsilon = r.gen_range(0.0..4.0);
    let m = randomized_response(world.a(), epsilon).expect("|A| ≥ 2");
    let g = random::utility(r, d, UtilityKind::IndependentOfA, 1.0, 0.2);
    Instance { world, g, mechs: vec![m], epsilon, delta: 0.0 }
}

fn verify_pure(i: &Instance) -> Outcome {
    if i.g.depends_on_a() {
        return Outcome::Hypothesis("utility depends on the attribute".into());
    }
    let l = compose_mechanisms(&i.world, Some(&i.mechs[0]), None).and_then(|c| local_g_fairness(&c, &i.g));
    match l {
        Err(e) => Outcome::Fail(e.to_string()),
        Ok(l) if l.value <= i.epsilon + TOLERANCE => Outcome::Pass,
        Ok(l) => Outcome::Fail(format!("L = {} > ε = {}", l.value, i.epsilon)),
    }
}

fn gen_world(r: &mut ChaCha8Rng, d: Dims) -> Instance {
    let world = random::world(r, shape(d, 0.3, 0.0));
    let g = random::utility(r, d, UtilityKind::General, 2.0, 0.2);
    plain(world, g)
}

fn verify_classical(i: &Instance) -> Outcome {
    let w = &i.world;
    let (Ok(cond), Ok(marg), Ok(dp)) = (ratio_sup(w, true), ratio_sup(w, false), demographic_parity(w)) else {
        return Outcome::Fail("metric undefined on a world with positive priors".into());
    };
    let eo = equalized_odds(w);
    if eo > exp(cond.value) - 1.0 + TOLERANCE {
        return Outcome::Fail(format!("L_eo = {eo} > exp({}) - 1", cond.value));
    }
    if dp > exp(marg.value) - 1.0 + TOLERANCE {
        return Outcome::Fail(format!("L_dp = {dp} > exp({}) - 1", marg.value));
    }
    Outcome::Pass
}

fn verify_global_le_local(i: &Instance) -> Outcome {
    match (local_g_fairness(&i.world, &i.g), global_g_fairness(&i.world, &i.g)) {
        (Ok(l), Ok(lb)) if lb.value <= l.value + TOLERANCE || lb.value == l.value => Outcome::Pass,
        (Ok(l), Ok(lb)) => Outcome::Fail(format!("L̄ = {} > L = {}", lb.value, l.value)),
        (Err(e), _) | (_, Err(e)) => Outcome::Fail(e.to_string()),
    }
}

fn gen_x_privacy(r: &mut ChaCha8Rng, d: Dims) -> Instance {
    let world = random::world(r, shape(d, 0.3, 0.0));
    let m = self_mechanism(r, world.x(), 0.3);
    let g = random::utility(r, d, UtilityKind::FunctionOfU, 1.0, 0.2);
    Instance { mechs: vec![m], ..plain(world, g) }
}

fn verify_x_privacy(i: &Instance) -> Outcome {
    match x_privacy_check(&i.world, &i.g, &i.mechs[0]) {
        Err(e) => Outcome::Hypothesis(e.to_string()),
        Ok(rep) if rep.non_worsening => Outcome::Pass,
        Ok(rep) => Outcome::Fail(format!("L with X released = {} > without = {}", rep.l_with.value, rep.l_without.value)),
    }
}

fn gen_post(r: &mut ChaCha8Rng, d: Dims) -> Instance {
    let world = random::world(r, shape(d, 0.0, 0.0));
    let first = random::mechanism(r, d.2, d.0 + 1, 0.2);
    let second = random::mechanism(r, d.0 + 1, d.1 + 1, 0.2);
    let second = MechanismMatrix::new(first.output().clone(), second.output().clone(), second.rows()).expect("same shape");
    let g = UtilityTable::constant(d.0, d.1, d.2, 1.0);
    Instance { mechs: vec![first, second], ..plain(world, g) }
}

fn verify_post(i: &Instance) -> Outcome {
    let (m, post) = (&i.mechs[0], &i.mechs[1]);
    match m.post_process(post) {
        Err(e) => Outcome::Fail(e.to_string()),
        Ok(c) if c.tightest_epsilon() <= m.tightest_epsilon() + 1e-12 => Outcome::Pass,
        Ok(c) => Outcome::Fail(format!("post-processing raised ε from {} to {}", m.tightest_epsilon(), c.tightest_epsilon())),
    }
}

fn rr_dims(r: &mut ChaCha8Rng) -> Dims {
    (1, 1, r.gen_range(2..=6))
}

fn gen_rr(r: &mut ChaCha8Rng, d: Dims) -> Instance {
    let world = random::world(r, shape((2, 1, d.2), 0.0, 0.0));
    let epsilon = r.gen_range(0.0..8.0);
    let m = randomized_response(world.a(), epsilon).expect("|A| ≥ 2");
    let g = UtilityTable::constant(2, 1, d.2, 1.0);
    Instance { world, g, mechs: vec![m], epsilon, delta: 0.0 }
}

fn verify_rr(i: &Instance) -> Outcome {
    let got = i.mechs[0].tightest_epsilon();
    if (got - i.epsilon).abs() <= 1e-10 {
        Outcome::Pass
    } else {
        Outcome::Fail(format!("randomized response at ε = {} has tightest ε {got}", i.epsilon))
    }
}

pub const CHECKS: [Check; 7] = [
    Check { name: "certificate_chain", dims: small_dims, generate: gen_chain, verify: verify_chain },
    Check { name: "pure_dp_attribute_free", dims: small_dims, generate: gen_pure, verify: verify_pure },
    Check { name: "classical_metrics_bounded", dims: small_dims, generate: gen_world, verify: verify_classical },
    Check { name: "global_le_local", dims: small_dims, generate: gen_world, verify: verify_global_le_local },
    Check { name: "x_privacy_non_worsening", dims: small_dims, generate: gen_x_privacy, verify: verify_x_privacy },
    Check { name: "post_processing", dims: small_dims, generate: gen_post, verify: verify_post },
    Check { name: "rr_round_trip", dims: rr_dims, generate: gen_rr, verify: verify_rr },
];

/// Replaces the world's independent priors with a random dependent joint.
pub fn make_dependent(r: &mut ChaCha8Rng, world: &TabularWorld) -> TabularWorld {
    let (nx, na) = (world.x().len(), world.a().len());
    let flat = random::distribution(r, nx * na, 0.0, 0.0);
    let joint: Vec<Vec<f64>> = flat.chunks(na).map(<[f64]>::to_vec).collect();
    let px: Vec<f64> = joint.iter().map(|row| row.iter().sum()).collect();
    let pa: Vec<f64> = (0..na).map(|a| joint.iter().map(|row| row[a]).sum()).collect();
    let px = Prior::new(world.x().clone(), px).expect("marginal of a distribution");
    let pa = Prior::new(world.a().clone(), pa).expect("marginal of a distribution");
    TabularWorld::with_joint(world.policy().clone(), px, pa, joint).unwrap_or_else(|_| world.clone())
}

fn round_row(row: &[f64], decimals: u32) -> Vec<f64> {
    let scale = 10f64.powi(decimals as i32);
    let mut out: Vec<f64> = row.iter().map(|p| (p * scale).round() / scale).collect();
    let top = (0..out.len()).max_by(|&i, &j| out[i].total_cmp(&out[j])).unwrap_or(0);
    let rest: f64 = out.iter().enumerate().filter(|(i, _)| *i != top).map(|(_, p)| p).sum();
    out[top] = (1.0 - rest).max(0.0);
    out
}

/// The instance with every probability and utility rounded to `decimals`,
/// if the result is still well formed.
pub fn round_instance(i: &Instance, decimals: u32) -> Option<Instance> {
    let w = &i.world;
    let policy = DecisionPolicy::from_fn(w.u().clone(), w.x().clone(), w.a().clone(), |x, a| {
        round_row(w.policy().row(x, a), decimals)
    })
    .ok()?;
    let px = Prior::new(w.x().clone(), round_row(w.prior_x().probs(), decimals)).ok()?;
    let pa = Prior::new(w.a().clone(), round_row(w.prior_a().probs(), decimals)).ok()?;
    let world = match w.joint_xa() {
        Some(_) => TabularWorld::with_joint(policy, w.prior_x().clone(), w.prior_a().clone(), {
            let na = w.a().len();
            w.joint_xa()?.chunks(na).map(<[f64]>::to_vec).collect()
        })
        .ok()?,
        None => TabularWorld::new(policy, px, pa).ok()?,
    };
    let scale = 10f64.powi(decimals as i32);
    let (nu, nx, na) = i.g.shape();
    let g = UtilityTable::from_fn(nu, nx, na, |u, x, a| (i.g.get(u, x, a) * scale).round() / scale).ok()?;
    let mechs = i
        .mechs
        .iter()
        .map(|m| {
            let rows = m.rows().iter().map(|r| round_row(r, decimals)).collect();
            MechanismMatrix::new(m.input().clone(), m.output().clone(), rows).ok()
        })
        .collect::<Option<Vec<_>>>()?;
    Some(Instance { world, g, mechs, ..i.clone() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reproduction {
    pub seed: u64,
    pub dims: Dims,
    pub decimals: Option<u32>,
    pub detail: String,
    pub instance: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub check: &'static str,
    pub instance_index: usize,
    pub seed: u64,
    pub detail: String,
    pub minimized: Reproduction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub name: &'static str,
    pub passed: usize,
    pub failed: usize,
    pub hypothesis_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteSummary {
    pub seed: u64,
    pub instances: usize,
    pub checks: Vec<CheckSummary>,
    pub first_failure: Option<Failure>,
}

impl SuiteSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.failed == 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub instances: usize,
    /// Feed dependent `(X, A)` worlds to the certificate check.
    pub inject_dependent: bool,
}

fn instance_for(check: &Check, seed: u64, dims: Option<Dims>, dependent: bool) -> (Dims, Instance) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let drawn = (check.dims)(&mut r);
    let mut d = dims.unwrap_or(drawn);
    if dependent {
        d.1 = d.1.max(2);
    }
    let mut inst = (check.generate)(&mut r, d);
    if dependent {
        inst.world = make_dependent(&mut r, &inst.world);
    }
    (d, inst)
}

/// Smallest failing variant of a failing case: alphabets are shrunk one axis
/// at a time (regenerating from the same seed), then values are rounded to
/// as few decimals as still fail.
pub fn minimize(check: &Check, seed: u64, dependent: bool) -> Reproduction {
    let fails = |i: &Instance| match (check.verify)(i) {
        Outcome::Fail(d) => Some(d),
        _ => None,
    };
    let (mut dims, mut inst) = instance_for(check, seed, None, dependent);
    let mut detail = fails(&inst).unwrap_or_default();
    loop {
        let mut shrunk = false;
        for axis in 0..3 {
            let mut d = dims;
            let slot = match axis {
                0 => &mut d.0,
                1 => &mut d.1,
                _ => &mut d.2,
            };
            let floor = if axis == 1 { 1 } else { 2 };
            if *slot <= floor {
                continue;
            }
            *slot -= 1;
            let (_, candidate) = instance_for(check, seed, Some(d), dependent);
            if let Some(msg) = fails(&candidate) {
                (dims, inst, detail) = (d, candidate, msg);
                shrunk = true;
            }
        }
        if !shrunk {
            break;
        }
    }
    let mut decimals = None;
    for places in 1..=6 {
        if let Some(rounded) = round_instance(&inst, places) {
            if let Some(msg) = fails(&rounded) {
                (inst, detail, decimals) = (rounded, msg, Some(places));
                break;
            }
        }
    }
    Reproduction { seed, dims, decimals, detail, instance: inst.to_json() }
}

/// Runs every check on `instances` seeded random instances in parallel.
/// Instance `i` of check `j` uses seed `derive_seed(derive_seed(seed, i), j)`.
pub fn run_property_suite(config: SuiteConfig) -> SuiteSummary {
    run_checks(&CHECKS, config)
}

pub fn run_checks(checks: &[Check], config: SuiteConfig) -> SuiteSummary {
    let outcomes: Vec<Vec<(u64, Outcome)>> = (0..config.instances)
        .into_par_iter()
        .map(|i| {
            let base = derive_seed(config.seed, i as u64);
            checks
                .iter()
                .enumerate()
                .map(|(j, check)| {
                    let seed = derive_seed(base, j as u64);
                    let dependent = config.inject_dependent && check.name == "certificate_chain";
                    let (_, inst) = instance_for(check, seed, None, dependent);
                    (seed, (check.verify)(&inst))
                })
                .collect()
        })
        .collect();
    let mut summaries: Vec<CheckSummary> =
        checks.iter().map(|c| CheckSummary { name: c.name, passed: 0, failed: 0, hypothesis_violations: 0 }).collect();
    let mut first_failure = None;
    for (i, row) in outcomes.iter().enumerate() {
        for (j, (seed, outcome)) in row.iter().enumerate() {
            let s = &mut summaries[j];
            match outcome {
                Outcome::Pass => s.passed += 1,
                Outcome::Hypothesis(_) => s.hypothesis_violations += 1,
                Outcome::Fail(detail) => {
                    s.failed += 1;
                    if first_failure.is_none() {
                        let dependent = config.inject_dependent && checks[j].name == "certificate_chain";
                        first_failure = Some(Failure {
                            check: checks[j].name,
                            instance_index: i,
                            seed: *seed,
                            detail: detail.clone(),
                            minimized: minimize(&checks[j], *seed, dependent),
                        });
                    }
                }
            }
        }
    }
    SuiteSummary { seed: config.seed, instances: config.instances, checks: summaries, first_failure }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes_and_is_deterministic() {
        let cfg = SuiteConfig { seed: 3, instances: 200, inject_dependent: false };
        let a = run_property_suite(cfg);
        assert!(a.passed(), "{a:?}");
        assert!(a.checks.iter().all(|c| c.passed + c.hypothesis_violations == 200));
        assert_eq!(a, run_property_suite(cfg));
    }

    #[test]
    fn dependent_worlds_are_hypothesis_violations() {
        let s = run_property_suite(SuiteConfig { seed: 4, instances: 50, inject_dependent: true });
        assert!(s.passed());
        let chain = s.checks.iter().find(|c| c.name == "certificate_chain").unwrap();
        assert_eq!(chain.hypothesis_violations, 50);
        assert_eq!(chain.failed, 0);
    }

    fn any_entry_above_half(i: &Instance) -> Outcome {
        if i.world.policy().table().iter().any(|p| *p > 0.5) {
            Outcome::Fail("an entry exceeds one half".into())
        } else {
            Outcome::Pass
        }
    }

    #[test]
    fn failures_are_minimized() {
        let planted = Check { name: "planted", dims: small_dims, generate: gen_world, verify: any_entry_above_half };
        let s = run_checks(&[planted], SuiteConfig { seed: 1, instances: 20, inject_dependent: false });
        assert!(!s.passed());
        let f = s.first_failure.unwrap();
        assert_eq!(f.check, "planted");
        assert_eq!(f.instance_index, 0);
        let m = f.minimized;
        assert_eq!((m.dims.0, m.dims.1, m.dims.2), (2, 1, 2));
        assert_eq!(m.decimals, Some(1));
        assert!(m.instance["world"]["policy"].is_array());
    }
}
