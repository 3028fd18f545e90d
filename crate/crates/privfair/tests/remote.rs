use std::net::TcpListener;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use privfair::mock::{MockReply, MockServer};
use privfair::remote::{RemoteConfig, RemoteEngine};
use privfair::scenario::Scenario;
use privfair_core::engine::{assign_task, Assignment, EngineError, EngineErrorKind};
use rayon::prelude::*;
use serde_json::Value;

const HR_EXAMPLE: &str = r#"{
    "HR1": "0.0",
    "HR2": "1.0",
    "reason": "Explain why the chosen HR was selected and why the other was not."
}"#;

const PACKAGE_EXAMPLE: &str = r#"{
    "Recipient1": "2.0",
    "Recipient2": "1.0",
    "reason": "Explain why HR was selected and why the others were not."
}"#;

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenarios").join(name);
    Scenario::load(&path).unwrap()
}

fn engine(url: String, tweak: impl FnOnce(&mut RemoteConfig)) -> RemoteEngine {
    let mut cfg = RemoteConfig::new(url, "mock-model");
    cfg.backoff_ms = 1;
    tweak(&mut cfg);
    RemoteEngine::new(cfg).unwrap()
}

fn assign(s: &Scenario, e: &RemoteEngine, seed: u64) -> Result<Assignment, EngineError> {
    assign_task(s.kind, &s.candidates, &s.profiles, e, &s.mechanisms, s.item.as_deref(), seed)
}

#[test]
fn hr_output_example_chooses_hr2() {
    let server = MockServer::start(0, vec![], MockReply::content(HR_EXAMPLE)).unwrap();
    let s = scenario("hr.toml");
    let out = assign(&s, &engine(server.url(), |_| {}), 1).unwrap();
    assert_eq!(out.chosen, "HR2");
    assert_eq!(out.decision.order, ["HR2", "HR1"]);
    assert!(out.decision.reason.starts_with("Explain why the chosen HR"));
    assert!(out.decision.audit.as_deref().unwrap().contains("HR2"));

    let requests = server.requests();
    assert_eq!(requests.len(), 1);
    let body: Value = serde_json::from_str(&requests[0]).unwrap();
    assert_eq!(body["model"], "mock-model");
    assert_eq!(body["messages"][0]["role"], "user");
    let prompt = body["messages"][0]["content"].as_str().unwrap();
    assert!(prompt.contains("selecting one HR for delivering a document"));
    assert!(prompt.contains("HR1:\nProfile: name: Tom, age: 25, race: Asian\nRoute: route length"));
    assert!(prompt.contains("HR2:\nProfile: name: Mary, age: 55, race: American"));
}

#[test]
fn package_output_example_serves_recipient2_first() {
    let server = MockServer::start(0, vec![], MockReply::content(PACKAGE_EXAMPLE)).unwrap();
    let s = scenario("package.toml");
    let out = assign(&s, &engine(server.url(), |_| {}), 1).unwrap();
    assert_eq!(out.decision.order, ["Recipient2", "Recipient1"]);
    assert_eq!(out.chosen, "Recipient2");
    let body: Value = serde_json::from_str(&server.requests()[0]).unwrap();
    assert!(body["messages"][0]["content"].as_str().unwrap().contains("Delivered object: package"));
}

#[test]
fn server_errors_are_retried() {
    let script = vec![MockReply::raw(503, "busy"), MockReply::raw(429, "slow down")];
    let server = MockServer::start(0, script, MockReply::content(HR_EXAMPLE)).unwrap();
    let out = assign(&scenario("hr.toml"), &engine(server.url(), |_| {}), 1).unwrap();
    assert_eq!(out.chosen, "HR2");
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn retries_stop_after_the_attempt_budget() {
    let script = vec![MockReply::raw(500, "down"); 5];
    let server = MockServer::start(0, script, MockReply::content(HR_EXAMPLE)).unwrap();
    let err = assign(&scenario("hr.toml"), &engine(server.url(), |c| c.attempts = 3), 1).unwrap_err();
    assert_eq!(err.kind, EngineErrorKind::Transport);
    assert!(err.message.contains("attempt 3 of 3"), "{}", err.message);
    assert_eq!(err.payload.as_deref(), Some("down"));
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn connection_refused_is_retried_then_reported() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let url = format!("http://127.0.0.1:{port}/v1/chat/completions");
    let err = assign(&scenario("hr.toml"), &engine(url, |c| c.attempts = 3), 1).unwrap_err();
    assert_eq!(err.kind, EngineErrorKind::Transport);
    assert!(err.message.contains("attempt 3 of 3"), "{}", err.message);
}

#[test]
fn timeouts_are_retried() {
    let script = vec![MockReply::content(HR_EXAMPLE).delayed(Duration::from_secs(2))];
    let server = MockServer::start(0, script, MockReply::content(HR_EXAMPLE)).unwrap();
    let started = Instant::now();
    let out = assign(&scenario("hr.toml"), &engine(server.url(), |c| c.timeout_secs = 0.3), 1).unwrap();
    assert_eq!(out.chosen, "HR2");
    assert_eq!(server.requests().len(), 2);
    assert!(started.elapsed() < Duration::from_secs(2));

    let slow = MockServer::start(0, vec![], MockReply::content(HR_EXAMPLE).delayed(Duration::from_secs(2))).unwrap();
    let err = assign(&scenario("hr.toml"), &engine(slow.url(), |c| (c.timeout_secs, c.attempts) = (0.2, 2)), 1)
        .unwrap_err();
    assert_eq!(err.kind, EngineErrorKind::Timeout);
    assert_eq!(slow.requests().len(), 2);
}

#[test]
fn non_json_body_is_not_retried() {
    let server = MockServer::start(0, vec![MockReply::raw(200, "<html>oops</html>")], MockReply::content(HR_EXAMPLE))
        .unwrap();
    let err = assign(&scenario("hr.toml"), &engine(server.url(), |_| {}), 1).unwrap_err();
    assert_eq!(err.kind, EngineErrorKind::Parse);
    assert_eq!(err.payload.as_deref(), Some("<html>oops</html>"));
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn malformed_content_is_a_protocol_error() {
    let cases = [
        MockReply::content("I would pick the second one."),
        MockReply::content(r#"{"HR1": "0.0", "HR3": "1.0", "reason": "x"}"#),
        MockReply::content(r#"{"HR1": "0.0", "HR2": "high", "reason": "x"}"#),
        MockReply::content(r#"{"HR1": "0.0", "HR2": "1.0"}"#),
        MockReply::raw(200, r#"{"choices": []}"#),
        MockReply::raw(400, "bad request"),
    ];
    for reply in cases {
        let shown = reply.body.clone();
        let server = MockServer::start(0, vec![reply], MockReply::content(HR_EXAMPLE)).unwrap();
        let err = assign(&scenario("hr.toml"), &engine(server.url(), |_| {}), 1).unwrap_err();
        assert_eq!(err.kind, EngineErrorKind::Protocol, "{shown}");
        assert!(err.payload.is_some(), "{shown}");
        assert_eq!(server.requests().len(), 1, "{shown}");
    }
}

#[test]
fn in_flight_requests_respect_the_cap() {
    let reply = MockReply::content(HR_EXAMPLE).delayed(Duration::from_millis(100));
    let server = MockServer::start(0, vec![], reply).unwrap();
    let s = scenario("hr.toml");
    let e = engine(server.url(), |c| c.max_in_flight = 2);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
    let chosen: Vec<String> =
        pool.install(|| (0..16u64).into_par_iter().map(|seed| assign(&s, &e, seed).unwrap().chosen).collect());
    assert!(chosen.iter().all(|c| c == "HR2"));
    assert_eq!(server.requests().len(), 16);
    assert_eq!(server.peak_in_flight(), 2);
}
