//! Privacy sweeps: randomized response at each ε of a grid, exact and
//! estimated fairness, and the certified bound.

use std::io::Write;

use privfair_core::certificates::bound_constants;
use privfair_core::estimate::empirical_world;
use privfair_core::{
    certify, estimate_metrics, randomized_response, sample_trace, theorem_bound, AttributeMetric, BootstrapConfig,
    PrivacyBudget, TabularWorld, UtilityTable,
};
use rayon::prelude::*;
use serde::Serialize;

use super::simulate::{simulate, EstimationSettings};
use super::derive_seed;
use crate::error::{Error, ModelContext, Result};
use crate::scenario::{MechanismSpec, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    pub delta: f64,
    pub samples: usize,
    pub seed: u64,
    pub smoothing: f64,
    pub resamples: usize,
}

impl SweepConfig {
    pub fn new(epsilons: Vec<f64>, samples: usize, seed: u64) -> Self {
        let est = EstimationSettings::new(seed);
        Self { epsilons, delta: 0.0, samples, seed, smoothing: est.smoothing, resamples: est.resamples }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::config("epsilons", "grid is empty"));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e >= 0.0) || e.is_nan()) {
            return Err(Error::config("epsilons", format!("{e} is not a non-negative number")));
        }
        if self.epsilons.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::config("epsilons", "grid must be sorted ascending"));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::config("delta", format!("{} is outside [0, 1]", self.delta)));
        }
        if self.samples == 0 {
            return Err(Error::config("samples", "must be at least 1"));
        }
        if !(self.smoothing >= 0.0) || !self.smoothing.is_finite() {
            return Err(Error::config("smoothing", format!("{} is not a non-negative number", self.smoothing)));
        }
        Ok(())
    }
}

/// One grid point. `epsilon_sum` is the per-attribute ε times the number of
/// released attributes; `odds` is `p/(1-p)` for the keep probability `p` of
/// the randomized response used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon_a: f64,
    pub delta_a: f64,
    pub l_exact: Option<f64>,
    pub l_bar_exact: Option<f64>,
    pub l_hat: f64,
    pub l_hat_ci_low: f64,
    pub l_hat_ci_high: f64,
    pub l_bar_hat: f64,
    pub bound: f64,
    pub n_samples: usize,
    pub epsilon_sum: f64,
    pub odds: f64,
}

fn odds(epsilon: f64, k: usize) -> f64 {
    if epsilon.is_infinite() {
        return f64::INFINITY;
    }
    // keep p = e^ε / (e^ε + k - 1)
    epsilon.exp() / (k as f64 - 1.0)
}

/// Sweep over a tabular world with randomized response on `A`.
pub fn sweep_tabular(
    world: &TabularWorld,
    g: &UtilityTable,
    metric: &AttributeMetric,
    config: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    config.validate()?;
    config
        .epsilons
        .par_iter()
        .enumerate()
        .map(|(i, &eps)| {
            let mech = randomized_response(world.a(), eps).context("randomized_response")?;
            let cert = certify(world, g, metric, &mech, None, config.delta).context("certify")?;
            let seed = derive_seed(config.seed, i as u64);
            let trace = sample_trace(world, Some(&mech), None, config.samples, seed).context("sample_trace")?;
            let boot = BootstrapConfig { resamples: config.resamples, seed, ..BootstrapConfig::default() };
            let est = estimate_metrics(&trace, g, config.smoothing, &boot).context("estimates")?;
            Ok(SweepRow {
                epsilon_a: eps,
                delta_a: config.delta,
                l_exact: Some(cert.l.value),
                l_bar_exact: Some(cert.l_bar.value),
                l_hat: est.l.point,
                l_hat_ci_low: est.l.ci_low,
                l_hat_ci_high: est.l.ci_high,
                l_bar_hat: est.l_bar.point,
                bound: cert.bound,
                n_samples: config.samples,
                epsilon_sum: eps,
                odds: odds(eps, world.a().len()),
            })
        })
        .collect()
}

/// Sweep over a scenario: every attribute goes through randomized response
/// at the grid ε and `samples` assignments are simulated. No exact values
/// exist; `bound` uses the summed ε and constants of the smoothed empirical
/// pipeline, so it is a plug-in estimate.
pub fn sweep_scenario(scenario: &Scenario, config: &SweepConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let engine = scenario.build_engine()?;
    let released = scenario.attributes.len() as f64;
    let k = scenario.attributes[0].labels.len();
    let mut rows = Vec::with_capacity(config.epsilons.len());
    for (i, &eps) in config.epsilons.iter().enumerate() {
        let s = scenario.with_mechanism(&MechanismSpec::RandomizedResponse { epsilon: eps })?;
        let seed = derive_seed(config.seed, i as u64);
        let est = EstimationSettings { smoothing: config.smoothing, resamples: config.resamples, seed };
        let (trace, summary) = simulate(&s, engine.as_ref(), config.samples, seed, est)?;
        let (Some(l), Some(l_bar)) = (summary.l_hat, summary.l_bar_hat) else {
            return Err(Error::config("samples", format!("no trial completed at epsilon {eps}")));
        };
        let epsilon_sum = eps * released;
        rows.push(SweepRow {
            epsilon_a: eps,
            delta_a: 0.0,
            l_exact: None,
            l_bar_exact: None,
            l_hat: l.point,
            l_hat_ci_low: l.ci_low,
            l_hat_ci_high: l.ci_high,
            l_bar_hat: l_bar.point,
            bound: plug_in_bound(&trace, config.smoothing, epsilon_sum),
            n_samples: summary.completed,
            epsilon_sum,
            odds: odds(eps, k),
        });
    }
    Ok(rows)
}

fn plug_in_bound(trace: &super::simulate::SimulationTrace, smoothing: f64, epsilon: f64) -> f64 {
    let n = trace.candidates.len();
    let Ok(ids) = privfair_core::Alphabet::new(trace.candidates.iter().cloned()) else { return f64::INFINITY };
    let Ok(x) = privfair_core::Alphabet::new(["-"]) else { return f64::INFINITY };
    let mut counts = vec![0u64; n * n];
    for t in &trace.trials {
        if let Some(u) = t.chosen.as_ref().and_then(|c| ids.index_of(c)) {
            for a in 0..n {
                counts[a * n + u] += 1;
            }
        }
    }
    let Ok(empty) = privfair_core::Trace::new(ids.clone(), x.clone(), ids.clone(), Vec::new()) else {
        return f64::INFINITY;
    };
    let g = UtilityTable::indicator_u_equals_a(&ids, &x, &ids);
    empirical_world(&empty, &counts, smoothing)
        .ok()
        .and_then(|w| bound_constants(&w, &g, &AttributeMetric::Discrete).ok())
        .and_then(|c| PrivacyBudget::new(epsilon, 0.0).ok().map(|b| theorem_bound(b, c)))
        .unwrap_or(f64::INFINITY)
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn to_csv(rows: &[SweepRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
