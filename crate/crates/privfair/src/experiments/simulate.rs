//! Repeated task assignment over a scenario, with per-trial traces.

use privfair_core::engine::{assign_task, DecisionEngine};
use privfair_core::estimate::DEFAULT_SMOOTHING;
use privfair_core::{estimate_metrics, Alphabet, BootstrapConfig, EstimateWithCI, Trace, TraceRecord, UtilityTable};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, real};
use crate::error::{Error, ModelContext, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationSettings {
    #[serde(with = "real")]
    pub smoothing: f64,
    pub resamples: usize,
    pub seed: u64,
}

impl EstimationSettings {
    pub fn new(seed: u64) -> Self {
        Self { smoothing: DEFAULT_SMOOTHING, resamples: BootstrapConfig::default().resamples, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub id: String,
    #[serde(with = "real")]
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub raw: Vec<Vec<(String, String)>>,
    pub privatized: Vec<Vec<(String, String)>>,
    pub chosen: Option<String>,
    pub order: Vec<String>,
    pub scores: Vec<ScoreEntry>,
    pub reason: String,
    pub error: Option<String>,
}

/// Everything needed to recompute a [`Summary`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub scenario: String,
    pub engine: String,
    pub item: Option<String>,
    pub candidates: Vec<String>,
    pub estimation: EstimationSettings,
    pub trials: Vec<TrialRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "real")]
    pub point: f64,
    #[serde(with = "real")]
    pub ci_low: f64,
    #[serde(with = "real")]
    pub ci_high: f64,
}

impl From<EstimateWithCI> for Interval {
    fn from(e: EstimateWithCI) -> Self {
        Self { point: e.point, ci_low: e.ci_low, ci_high: e.ci_high }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickFrequency {
    pub id: String,
    pub count: usize,
    #[serde(with = "real")]
    pub frequency: f64,
}

/// Pick rates of the completed trials and fairness estimates for the burden
/// `g(u, a) = 1{u = a}` with `A` the candidate slot, so that `L̂` is the log
/// ratio of the most and least picked candidates' rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub completed: usize,
    pub incomplete: Vec<usize>,
    pub picks: Vec<PickFrequency>,
    pub l_hat: Option<Interval>,
    pub l_bar_hat: Option<Interval>,
    pub n_samples: usize,
}

fn pairs(p: &privfair_core::engine::Profile) -> Vec<(String, String)> {
    p.attributes().to_vec()
}

/// Runs `trials` assignments in parallel; trial `t` uses seed
/// `derive_seed(seed, t)`. Engine failures are recorded, not fatal.
pub fn simulate(
    scenario: &Scenario,
    engine: &dyn DecisionEngine,
    trials: usize,
    seed: u64,
    estimation: EstimationSettings,
) -> Result<(SimulationTrace, Summary)> {
    if trials == 0 {
        return Err(Error::config("trials", "must be at least 1"));
    }
    let records: Vec<TrialRecord> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = derive_seed(seed, t as u64);
            let outcome = assign_task(
                scenario.kind,
                &scenario.candidates,
                &scenario.profiles,
                engine,
                &scenario.mechanisms,
                scenario.item.as_deref(),
                s,
            );
            let raw = scenario.profiles.iter().map(pairs).collect();
            match outcome {
                Ok(a) => TrialRecord {
                    trial: t,
                    seed: s,
                    raw,
                    privatized: a.privatized.iter().map(pairs).collect(),
                    chosen: Some(a.chosen),
                    order: a.decision.order,
                    scores: a.decision.scores.into_iter().map(|(id, score)| ScoreEntry { id, score }).collect(),
                    reason: a.decision.reason,
                    error: None,
                },
                Err(e) => TrialRecord {
                    trial: t,
                    seed: s,
                    raw,
                    privatized: Vec::new(),
                    chosen: None,
                    order: Vec::new(),
                    scores: Vec::new(),
                    reason: String::new(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let trace = SimulationTrace {
        scenario: scenario.kind.as_str().into(),
        engine: engine.name().into(),
        item: scenario.item.clone(),
        candidates: scenario.candidate_ids(),
        estimation,
        trials: records,
    };
    let summary = summarize(&trace)?;
    Ok((trace, summary))
}

/// Recomputes the summary from a trace alone.
pub fn summarize(trace: &SimulationTrace) -> Result<Summary> {
    let ids = Alphabet::new(trace.candidates.iter().cloned()).context("trace candidates")?;
    let mut counts = vec![0usize; ids.len()];
    let mut incomplete = Vec::new();
    let mut records = Vec::new();
    for t in &trace.trials {
        let Some(c) = &t.chosen else {
            incomplete.push(t.trial);
            continue;
        };
        let u = ids
            .index_of(c)
            .ok_or_else(|| Error::config(format!("trials[{}].chosen", t.trial), format!("{c:?} is not a candidate")))?;
        counts[u] += 1;
        records.extend((0..ids.len()).map(|a| TraceRecord { x: 0, a, x_tilde: 0, a_tilde: a, u }));
    }
    let completed: usize = counts.iter().sum();
    let picks = ids
        .labels()
        .iter()
        .zip(&counts)
        .map(|(id, &count)| PickFrequency {
            id: id.clone(),
            count,
            frequency: if completed == 0 { 0.0 } else { count as f64 / completed as f64 },
        })
        .collect();
    let (mut l_hat, mut l_bar_hat) = (None, None);
    if completed > 0 {
        let x = Alphabet::new([trace.item.clone().unwrap_or_else(|| "-".into())]).context("trace item")?;
        let g = UtilityTable::indicator_u_equals_a(&ids, &x, &ids);
        let metric_trace = Trace::new(ids.clone(), x, ids, records).context("metric trace")?;
        let boot = BootstrapConfig {
            resamples: trace.estimation.resamples,
            seed: trace.estimation.seed,
            ..BootstrapConfig::default()
        };
        let est = estimate_metrics(&metric_trace, &g, trace.estimation.smoothing, &boot).context("estimates")?;
        l_hat = Some(est.l.into());
        l_bar_hat = Some(est.l_bar.into());
    }
    Ok(Summary { trials: trace.trials.len(), completed, incomplete, picks, l_hat, l_bar_hat, n_samples: completed })
}

impl Summary {
    pub fn frequency(&self, id: &str) -> Option<f64> {
        self.picks.iter().find(|p| p.id == id).map(|p| p.frequency)
    }
}
