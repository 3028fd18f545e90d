use std::path::PathBuf;

use privfair::experiments::simulate::{simulate, EstimationSettings};
use privfair::mock::{MockReply, MockServer};
use privfair::remote::{RemoteConfig, RemoteEngine};
use privfair::scenario::{MechanismSpec, Scenario};
use privfair_core::engine::{
    assign_task, CandidateView, DecisionEngine, DecisionRequest, Profile, ScenarioKind,
    SyntheticBiasedEngine, TabularEngine,
};
use privfair_core::{Alphabet, DecisionPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scenario(name: &str) -> Scenario {
    Scenario::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenarios").join(name)).unwrap()
}

fn est(seed: u64) -> EstimationSettings {
    EstimationSettings { resamples: 100, ..EstimationSettings::new(seed) }
}

#[test]
fn corridor_offices_are_equidistant() {
    let s = scenario("hr.toml");
    assert_eq!(s.candidates[0].route_cost, s.candidates[1].route_cost);
    assert_eq!(s.candidates[0].route_summary, s.candidates[1].route_summary);
    assert!(s.candidates[0].route_summary.starts_with("route length "));
}

#[test]
fn engines_are_interchangeable() {
    let s = scenario("hr.toml");
    let server = MockServer::start(0, vec![], MockReply::content(r#"{"HR1": "1.0", "HR2": "0.0", "reason": "r"}"#))
        .unwrap();
    let bin = |l: [&str; 2]| Alphabet::new(l).unwrap();
    let rows = [vec![vec![0.0, 1.0], vec![0.0, 1.0]]];
    let item = Alphabet::new(["document"]).unwrap();
    let policy = DecisionPolicy::from_nested(bin(["HR1", "HR2"]), item, bin(["Tom", "Mary"]), &rows).unwrap();
    let engines: Vec<Box<dyn DecisionEngine>> = vec![
        Box::new(SyntheticBiasedEngine::hr_default()),
        Box::new(TabularEngine::new(policy, "name")),
        Box::new(RemoteEngine::new(RemoteConfig::new(server.url(), "m")).unwrap()),
    ];
    let mut chosen = Vec::new();
    for e in &engines {
        let (trace, summary) = simulate(&s, e.as_ref(), 20, 1, est(1)).unwrap();
        assert_eq!(trace.engine, e.name());
        assert_eq!(trace.candidates, ["HR1", "HR2"]);
        assert_eq!(summary.completed, 20, "{}", e.name());
        assert!(summary.l_hat.is_some());
        chosen.push((summary.frequency("HR1").unwrap(), summary.frequency("HR2").unwrap()));
    }
    assert_eq!(chosen, [(0.0, 1.0), (0.0, 1.0), (1.0, 0.0)]);
}

#[test]
fn synthetic_choice_survives_common_weight_scaling() {
    let attrs = [("name", ["Tom", "Mary"]), ("age", ["25", "55"]), ("race", ["Asian", "American"])];
    let mut r = ChaCha8Rng::seed_from_u64(17);
    for round in 0..200 {
        let integer = round % 2 == 0;
        let weights: Vec<(&str, &str, f64)> = attrs
            .iter()
            .flat_map(|(a, ls)| ls.iter().map(move |l| (*a, *l)))
            .map(|(a, l)| (a, l, if integer { r.gen_range(0..3) as f64 } else { r.gen_range(-2.0..2.0) }))
            .collect();
        let shift = r.gen_range(1e-3f64..1e3).ln();
        let base = SyntheticBiasedEngine::new(weights.iter().copied()).unwrap();
        let scaled = SyntheticBiasedEngine::new(weights.iter().map(|&(a, l, w)| (a, l, w + shift))).unwrap();
        let n = r.gen_range(2..=4);
        let candidates: Vec<CandidateView> = (0..n)
            .map(|i| CandidateView {
                id: format!("C{i}"),
                profile: Profile::new(attrs.iter().map(|(a, ls)| (a.to_string(), ls[r.gen_range(0..2)].to_string())))
                    .unwrap(),
                route_cost: 1.0,
                route_summary: String::new(),
            })
            .collect();
        for kind in [ScenarioKind::HrDelivery, ScenarioKind::PackageDelivery] {
            let req = DecisionRequest { scenario: kind, candidates: candidates.clone(), context: None };
            for seed in 0..5 {
                let a = base.decide(&req, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                let b = scaled.decide(&req, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                assert_eq!(a.chosen, b.chosen, "round {round}");
                assert_eq!(a.order, b.order, "round {round}");
            }
        }
    }
}

#[test]
fn identity_release_repeats_one_choice() {
    let s = scenario("hr.toml");
    let (_, summary) = simulate(&s, s.build_engine().unwrap().as_ref(), 100, 9, est(9)).unwrap();
    assert!(summary.frequency("HR2").unwrap() >= 0.95);
}

#[test]
fn zero_epsilon_release_is_a_coin_flip() {
    let s = scenario("hr.toml").with_mechanism(&MechanismSpec::RandomizedResponse { epsilon: 0.0 }).unwrap();
    let (_, summary) = simulate(&s, s.build_engine().unwrap().as_ref(), 10_000, 4, est(4)).unwrap();
    let f = summary.frequency("HR1").unwrap();
    assert!((f - 0.5).abs() <= 0.03, "{f}");
}

#[test]
fn symmetric_tabular_package_policy_is_balanced() {
    let s = scenario("package.toml");
    let (_, summary) = simulate(&s, s.build_engine().unwrap().as_ref(), 1000, 2, est(2)).unwrap();
    let f = summary.frequency("Recipient1").unwrap();
    assert!((f - 0.5).abs() <= 0.1, "{f}");

    let biased = scenario("package_biased.toml");
    let (_, summary) = simulate(&biased, biased.build_engine().unwrap().as_ref(), 100, 2, est(2)).unwrap();
    assert_eq!(summary.frequency("Recipient1"), Some(1.0));
}

#[test]
fn assignments_are_reproducible_per_seed() {
    let s = scenario("hr_private.toml");
    let e = s.build_engine().unwrap();
    let run = |seed| {
        assign_task(s.kind, &s.candidates, &s.profiles, e.as_ref(), &s.mechanisms, s.item.as_deref(), seed).unwrap()
    };
    for seed in 0..20 {
        assert_eq!(run(seed), run(seed));
    }
    let differs = (0..50).any(|seed| run(seed).privatized != run(0).privatized);
    assert!(differs);
}
