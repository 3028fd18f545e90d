use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use privfair::error::{Error, ModelContext, Result};
use privfair::experiments::certify::CertificateReport;
use privfair::experiments::propsuite::{run_property_suite, SuiteConfig};
use privfair::experiments::simulate::{simulate, summarize, EstimationSettings, SimulationTrace};
use privfair::experiments::sweep::{sweep_scenario, sweep_tabular, to_csv, SweepConfig};
use privfair::fixtures::corridor;
use privfair::formats::{
    load_mechanism, load_metric, load_utility, load_world, parse_mask, parse_point_cloud, read_json, read_text,
    to_json_pretty, write_mask, write_point_cloud, write_text, PathFile,
};
use privfair::mock::{MockReply, MockServer, ReplySpec};
use privfair::remote::RemoteConfig;
use privfair::scenario::{EngineSpec, MechanismSpec, Scenario};
use privfair_core::nav::{a_star, build_top_view, build_traversability, Cell, Connectivity};
use privfair_core::{certify, reproduce_counterexample, AttributeMetric, DpVerdict, MechanismMatrix, PrivacyBudget};
use serde_json::json;

/// Fairness and differential-privacy certification toolkit.
#[derive(Debug, Parser)]
#[command(name = "privfair", version)]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certify a world's fairness against the privacy bound.
    Certify(CertifyArgs),
    /// Sweep randomized response over an ε grid.
    Sweep(SweepArgs),
    /// Simulate task assignment for a scenario.
    Simulate(SimulateArgs),
    /// Build grid maps from a point cloud and plan a path.
    Plan(PlanArgs),
    /// Check a mechanism against an (ε, δ) budget.
    VerifyDp(VerifyArgs),
    /// Reproduce the X-privacy counterexample.
    ReproCounterexample(ReproArgs),
    /// Run the randomized theorem checks.
    PropSuite(SuiteArgs),
    /// Fixture generators and the mock chat server.
    #[command(subcommand)]
    Fixtures(FixtureCommand),
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[arg(long)]
    world: PathBuf,
    #[arg(long)]
    utility: PathBuf,
    /// Mechanism on A; identity when omitted.
    #[arg(long)]
    mech_a: Option<PathBuf>,
    #[arg(long)]
    mech_x: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Attribute distance matrix; discrete metric when omitted.
    #[arg(long)]
    metric: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, conflicts_with = "scenario", requires = "utility")]
    world: Option<PathBuf>,
    #[arg(long)]
    utility: Option<PathBuf>,
    #[arg(long, required_unless_present = "world")]
    scenario: Option<PathBuf>,
    /// Comma-separated ascending ε grid.
    #[arg(long, value_delimiter = ',', required = true)]
    epsilons: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 1000)]
    resamples: usize,
    #[arg(long)]
    metric: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineChoice {
    Synthetic,
    Tabular,
    Remote,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, required_unless_present = "from_trace")]
    scenario: Option<PathBuf>,
    /// Recompute the summary of an earlier run from its trace.
    #[arg(long, conflicts_with = "scenario")]
    from_trace: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Engine to use instead of the scenario's.
    #[arg(long, value_enum)]
    engine: Option<EngineChoice>,
    /// Remote endpoint URL when `--engine remote` overrides the scenario.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, default_value = "mock")]
    model: String,
    /// Mechanism for every attribute: identity, uniform or rr:<epsilon>.
    #[arg(long)]
    mechanism: Option<String>,
    /// Where to write the per-trial trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    resamples: usize,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[arg(long, required_unless_present = "mask")]
    cloud: Option<PathBuf>,
    /// Occupancy mask (`.` free, `#` blocked) instead of a point cloud.
    #[arg(long, conflicts_with = "cloud")]
    mask: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    res: f64,
    #[arg(long, default_value_t = 2.3)]
    ceiling: f64,
    #[arg(long, default_value_t = 0.0)]
    hmin: f64,
    #[arg(long, default_value_t = 0.3)]
    hmax: f64,
    #[arg(long, value_parser = parse_cell)]
    start: Cell,
    #[arg(long, value_parser = parse_cell)]
    goal: Cell,
    #[arg(long, value_enum, default_value = "8")]
    conn: Conn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Conn {
    #[value(name = "4")]
    Four,
    #[value(name = "8")]
    Eight,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    mech: PathBuf,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
}

#[derive(Debug, Args)]
struct ReproArgs {
    /// Replace the example's X mechanism, e.g. to check that a perturbed
    /// mechanism is detected.
    #[arg(long)]
    mech: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SuiteArgs {
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    instances: u64,
    /// Feed dependent (X, A) worlds to the certificate check.
    #[arg(long)]
    inject_dependent: bool,
}

#[derive(Debug, Subcommand)]
enum FixtureCommand {
    /// Write the 20×20 corridor scene and its traversability mask.
    GenCorridor {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Serve canned chat-completion replies.
    MockServer {
        #[arg(long, default_value_t = 8089)]
        port: u16,
        /// JSON array of replies served in order.
        #[arg(long)]
        replies: Option<PathBuf>,
        /// Message content served after the scripted replies run out.
        #[arg(long, default_value = r#"{"HR1": "0.0", "HR2": "1.0", "reason": "mock"}"#)]
        fallback: String,
    },
}

fn parse_cell(s: &str) -> std::result::Result<Cell, String> {
    let (r, c) = s.split_once(',').ok_or_else(|| format!("expected R,C, got {s:?}"))?;
    let n = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("{v:?} is not a cell index"));
    Ok((n(r)?, n(c)?))
}

fn parse_mechanism(s: &str) -> Result<MechanismSpec> {
    match s {
        "identity" => Ok(MechanismSpec::Identity),
        "uniform" => Ok(MechanismSpec::Uniform),
        _ => match s.strip_prefix("rr:").map(str::parse::<f64>) {
            Some(Ok(epsilon)) => Ok(MechanismSpec::RandomizedResponse { epsilon }),
            _ => Err(Error::config("mechanism", format!("expected identity, uniform or rr:<epsilon>, got {s:?}"))),
        },
    }
}

/// Outcome of a command: text to emit and whether its check passed.
struct Report {
    text: String,
    passed: bool,
}

impl Report {
    fn ok(text: String) -> Self {
        Self { text, passed: true }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn json_only(cmd: &str, format: Option<Format>) -> Result<()> {
    match format {
        Some(Format::Csv) => Err(Error::config("format", format!("{cmd} only writes json"))),
        _ => Ok(()),
    }
}

fn run_certify(a: &CertifyArgs, format: Option<Format>) -> Result<Report> {
    json_only("certify", format)?;
    let world = load_world(&a.world)?;
    let g = load_utility(&a.utility, &world)?;
    let mech_a = match &a.mech_a {
        Some(p) => load_mechanism(p)?,
        None => MechanismMatrix::identity(world.a().clone()),
    };
    let mech_x = a.mech_x.as_deref().map(load_mechanism).transpose()?;
    let metric = match &a.metric {
        Some(p) => load_metric(p)?,
        None => AttributeMetric::Discrete,
    };
    let cert = certify(&world, &g, &metric, &mech_a, mech_x.as_ref(), a.delta).context("certify")?;
    Ok(Report { text: to_json_pretty(&CertificateReport::from(&cert)), passed: cert.holds })
}

fn run_sweep(a: &SweepArgs, seed: u64, format: Option<Format>) -> Result<Report> {
    let mut config = SweepConfig::new(a.epsilons.clone(), a.samples, seed);
    config.delta = a.delta;
    config.resamples = a.resamples;
    let rows = match (&a.world, &a.utility, &a.scenario) {
        (Some(w), Some(u), None) => {
            let world = load_world(w)?;
            let g = load_utility(u, &world)?;
            let metric = match &a.metric {
                Some(p) => load_metric(p)?,
                None => AttributeMetric::Discrete,
            };
            sweep_tabular(&world, &g, &metric, &config)?
        }
        (None, _, Some(s)) => sweep_scenario(&Scenario::load(s)?, &config)?,
        _ => return Err(Error::config("sweep", "give --world with --utility, or --scenario")),
    };
    let text = match format.unwrap_or(Format::Csv) {
        Format::Csv => to_csv(&rows)?,
        Format::Json => to_json_pretty(&rows),
    };
    Ok(Report::ok(text))
}

fn summary_text(summary: &privfair::experiments::simulate::Summary, format: Option<Format>) -> Result<String> {
    Ok(match format.unwrap_or(Format::Json) {
        Format::Json => to_json_pretty(summary),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["id", "count", "frequency"])?;
            for p in &summary.picks {
                w.write_record([p.id.clone(), p.count.to_string(), p.frequency.to_string()])?;
            }
            String::from_utf8(w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))?).expect("utf-8")
        }
    })
}

fn run_simulate(a: &SimulateArgs, seed: u64, format: Option<Format>) -> Result<Report> {
    if let Some(t) = &a.from_trace {
        let trace: SimulationTrace = read_json(t)?;
        return Ok(Report::ok(summary_text(&summarize(&trace)?, format)?));
    }
    let path = a.scenario.as_ref().expect("clap requires scenario or from_trace");
    let mut scenario = Scenario::load(path)?;
    if let Some(m) = &a.mechanism {
        scenario = scenario.with_mechanism(&parse_mechanism(m)?)?;
    }
    match (a.engine, &scenario.engine) {
        (None, _)
        | (Some(EngineChoice::Synthetic), EngineSpec::Synthetic { .. })
        | (Some(EngineChoice::Tabular), EngineSpec::Tabular { .. }) => {}
        (Some(EngineChoice::Remote), spec) => {
            scenario.engine = match (&a.endpoint, spec) {
                (Some(url), _) => EngineSpec::Remote(RemoteConfig::new(url, &a.model)),
                (None, EngineSpec::Remote(_)) => spec.clone(),
                (None, _) => return Err(Error::config("endpoint", "required for --engine remote")),
            };
        }
        (Some(EngineChoice::Synthetic), _) => scenario.engine = EngineSpec::Synthetic { weights: None },
        (Some(EngineChoice::Tabular), _) => {
            return Err(Error::config("engine", "the scenario declares no tabular policy"));
        }
    }
    let engine = scenario.build_engine()?;
    let est = EstimationSettings { resamples: a.resamples, ..EstimationSettings::new(seed) };
    let (trace, summary) = simulate(&scenario, engine.as_ref(), a.trials, seed, est)?;
    if let Some(t) = &a.trace {
        write_text(t, &to_json_pretty(&trace))?;
    }
    Ok(Report::ok(summary_text(&summary, format)?))
}

fn run_plan(a: &PlanArgs, format: Option<Format>) -> Result<Report> {
    json_only("plan", format)?;
    let env = match (&a.cloud, &a.mask) {
        (Some(c), _) => {
            let cloud = parse_point_cloud(&read_text(c)?)?;
            build_traversability(&build_top_view(&cloud, a.res, a.ceiling)?, a.hmin, a.hmax)?
        }
        (None, Some(m)) => parse_mask(&read_text(m)?)?,
        (None, None) => return Err(Error::config("plan", "give --cloud or --mask")),
    };
    let conn = match a.conn {
        Conn::Four => Connectivity::Four,
        Conn::Eight => Connectivity::Eight,
    };
    let plan = a_star(&env, a.start, a.goal, conn)?;
    Ok(Report::ok(to_json_pretty(&PathFile::from(&plan))))
}

fn run_verify(a: &VerifyArgs, format: Option<Format>) -> Result<Report> {
    json_only("verify-dp", format)?;
    let m = load_mechanism(&a.mech)?;
    let budget = PrivacyBudget::new(a.eps, a.delta).context("budget")?;
    let verdict = m.verify_dp(budget);
    let value = match &verdict {
        DpVerdict::Pass { tightest_delta } => json!({
            "passed": true, "epsilon": a.eps, "delta": a.delta, "tightest_delta": tightest_delta,
        }),
        DpVerdict::Fail { a: i, a_prime, event, gap } => json!({
            "passed": false, "epsilon": a.eps, "delta": a.delta,
            "witness": {
                "a": m.input().label(*i),
                "a_prime": m.input().label(*a_prime),
                "event": event.iter().map(|o| m.output().label(*o)).collect::<Vec<_>>(),
                "gap": gap,
            },
        }),
    };
    Ok(Report { text: to_json_pretty(&value), passed: verdict.passed() })
}

fn run_repro(a: &ReproArgs, format: Option<Format>) -> Result<Report> {
    let mech = match &a.mech {
        Some(p) => load_mechanism(p)?,
        None => privfair_core::counterexample_world().mech_x,
    };
    let checks = reproduce_counterexample(&mech).context("counterexample")?;
    let passed = checks.iter().all(|c| c.passed);
    let text = match format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["check", "expected", "actual", "diff", "passed"])?;
            for c in &checks {
                let diff = (c.actual - c.expected).abs();
                w.write_record([c.name.to_string(), c.expected.to_string(), c.actual.to_string(), diff.to_string(), c.passed.to_string()])?;
            }
            String::from_utf8(w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))?).expect("utf-8")
        }
        Format::Json => to_json_pretty(
            &checks
                .iter()
                .map(|c| json!({"check": c.name, "expected": c.expected, "actual": c.actual, "diff": (c.actual - c.expected).abs(), "passed": c.passed}))
                .collect::<Vec<_>>(),
        ),
    };
    Ok(Report { text, passed })
}

fn run_suite(a: &SuiteArgs, seed: u64, format: Option<Format>) -> Result<Report> {
    json_only("prop-suite", format)?;
    let started = Instant::now();
    let summary = run_property_suite(SuiteConfig { seed, instances: a.instances as usize, inject_dependent: a.inject_dependent });
    eprintln!("prop-suite: {} instances in {:.2?}", a.instances, started.elapsed());
    Ok(Report { text: to_json_pretty(&summary), passed: summary.passed() })
}

fn run_fixtures(cmd: &FixtureCommand) -> Result<Report> {
    match cmd {
        FixtureCommand::GenCorridor { dir } => {
            let (cloud, mask) = corridor();
            write_text(&dir.join("scene.xyz"), &write_point_cloud(&cloud))?;
            write_text(&dir.join("mask.txt"), &write_mask(&mask))?;
            Ok(Report::ok(format!("wrote {} and {}\n", dir.join("scene.xyz").display(), dir.join("mask.txt").display())))
        }
        FixtureCommand::MockServer { port, replies, fallback } => {
            let script = match replies {
                Some(p) => read_json::<Vec<ReplySpec>>(p)?
                    .iter()
                    .enumerate()
                    .map(|(i, r)| r.to_reply().map_err(|m| Error::config(format!("replies[{i}]"), m)))
                    .collect::<Result<Vec<_>>>()?,
                None => Vec::new(),
            };
            let server = MockServer::start(*port, script, MockReply::content(fallback)).map_err(|e| Error::io("mock server", e))?;
            eprintln!("mock server listening on {}", server.url());
            server.wait();
            Ok(Report::ok(String::new()))
        }
    }
}

fn run(cli: &Cli) -> Result<Report> {
    match &cli.command {
        Command::Certify(a) => run_certify(a, cli.format),
        Command::Sweep(a) => run_sweep(a, cli.seed, cli.format),
        Command::Simulate(a) => run_simulate(a, cli.seed, cli.format),
        Command::Plan(a) => run_plan(a, cli.format),
        Command::VerifyDp(a) => run_verify(a, cli.format),
        Command::ReproCounterexample(a) => run_repro(a, cli.format),
        Command::PropSuite(a) => run_suite(a, cli.seed, cli.format),
        Command::Fixtures(c) => run_fixtures(c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = emit(cli.out.as_deref(), &report.text) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
