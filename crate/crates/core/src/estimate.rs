//! Plug-in estimates of the fairness metrics from sampled traces, with
//! percentile-bootstrap confidence intervals.
//!
//! The empirical world uses the true `(x, a)` of each record and its decision
//! `u`; cell counts are smoothed additively before normalizing.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::floor;
use crate::metrics::{demographic_parity, equalized_odds, global_g_fairness, local_g_fairness};
use crate::model::{DecisionPolicy, Prior, TabularWorld, Trace};
use crate::utility::UtilityTable;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    Plugin,
    PluginSmoothed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithCI {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_samples: usize,
    pub method: EstimateMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub resamples: usize,
    /// Two-sided coverage of the interval, e.g. `0.95`.
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { resamples: 1000, level: 0.95, seed: 0 }
    }
}

/// Estimates of `L`, `L̄`, demographic parity and equalized odds.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricEstimates {
    pub l: EstimateWithCI,
    pub l_bar: EstimateWithCI,
    pub l_dp: EstimateWithCI,
    pub l_eo: EstimateWithCI,
}

/// Default additive smoothing per count.
pub const DEFAULT_SMOOTHING: f64 = 0.5;

fn cell_counts(trace: &Trace, idx: impl Iterator<Item = usize>) -> Vec<u64> {
    let (nx, na, nu) = (trace.x().len(), trace.a().len(), trace.u().len());
    let mut counts = vec![0u64; nx * na * nu];
    let records = trace.records();
    for i in idx {
        let r = &records[i];
        counts[(r.x * na + r.a) * nu + r.u] += 1;
    }
    counts
}

/// Empirical world from counts indexed `[x][a][u]`, with `smoothing` added to
/// every count and the empirical `(X, A)` joint.
pub fn empirical_world(trace: &Trace, counts: &[u64], smoothing: f64) -> Result<TabularWorld, Error> {
    if !(smoothing >= 0.0) || !smoothing.is_finite() {
        return Err(Error::InvalidParameter { name: "smoothing", value: smoothing });
    }
    let (nx, na, nu) = (trace.x().len(), trace.a().len(), trace.u().len());
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyTrace);
    }
    let n = total as f64;
    let mut table = Vec::with_capacity(counts.len());
    let mut joint = vec![vec![0.0; na]; nx];
    for x in 0..nx {
        for a in 0..na {
            let row = &counts[(x * na + a) * nu..(x * na + a + 1) * nu];
            let cell: u64 = row.iter().sum();
            if cell == 0 && smoothing == 0.0 {
                return Err(Error::InsufficientData { x: trace.x().label(x).into(), a: trace.a().label(a).into() });
            }
            let denom = cell as f64 + smoothing * nu as f64;
            table.extend(row.iter().map(|c| (*c as f64 + smoothing) / denom));
            joint[x][a] = cell as f64 / n;
        }
    }
    let prior_x: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let prior_a: Vec<f64> = (0..na).map(|a| joint.iter().map(|r| r[a]).sum()).collect();
    let policy = DecisionPolicy::new(trace.u().clone(), trace.x().clone(), trace.a().clone(), table)?;
    TabularWorld::with_joint(
        policy,
        Prior::new(trace.x().clone(), prior_x)?,
        Prior::new(trace.a().clone(), prior_a)?,
        joint,
    )
}

fn metrics_of(world: &TabularWorld, g: &UtilityTable) -> Result<[f64; 4], Error> {
    Ok([
        local_g_fairness(world, g)?.value,
        global_g_fairness(world, g)?.value,
        demographic_parity(world)?,
        equalized_odds(world),
    ])
}

/// Nearest-rank quantile of sorted values; safe with infinities.
fn quantile(sorted: &[f64], q: f64) -> (f64, f64) {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = floor(pos) as usize;
    let hi = (lo + usize::from(pos > lo as f64)).min(sorted.len() - 1);
    (sorted[lo], sorted[hi])
}

/// Plug-in estimates from `trace` with additive `smoothing` on counts and a
/// seeded percentile bootstrap. Resamples on which a metric is undefined are
/// dropped; the interval always contains the point estimate.
pub fn estimate_metrics(
    trace: &Trace,
    g: &UtilityTable,
    smoothing: f64,
    bootstrap: &BootstrapConfig,
) -> Result<MetricEstimates, Error> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if g.shape() != (trace.u().len(), trace.x().len(), trace.a().len()) {
        return Err(Error::ShapeMismatch {
            what: "utility shape vs trace",
            expected: trace.u().len() * trace.x().len() * trace.a().len(),
            found: g.values().len(),
        });
    }
    if !(bootstrap.level > 0.0 && bootstrap.level < 1.0) {
        return Err(Error::InvalidParameter { name: "level", value: bootstrap.level });
    }
    let n = trace.len();
    let world = empirical_world(trace, &cell_counts(trace, 0..n), smoothing)?;
    let point = metrics_of(&world, g)?;

    let mut samples: [Vec<f64>; 4] = Default::default();
    let mut rng = ChaCha8Rng::seed_from_u64(bootstrap.seed);
    for _ in 0..bootstrap.resamples {
        let counts = cell_counts(trace, (0..n).map(|_| rng.gen_range(0..n)));
        let Ok(w) = empirical_world(trace, &counts, smoothing) else { continue };
        if let Ok(m) = metrics_of(&w, g) {
            for (s, v) in samples.iter_mut().zip(m) {
                s.push(v);
            }
        }
    }
    let method = if smoothing > 0.0 { EstimateMethod::PluginSmoothed } else { EstimateMethod::Plugin };
    let tail = 0.5 * (1.0 - bootstrap.level);
    let mut out = [EstimateWithCI { point: 0.0, ci_low: 0.0, ci_high: 0.0, n_samples: n, method }; 4];
    for ((slot, mut s), p) in out.iter_mut().zip(samples).zip(point) {
        let (mut lo, mut hi) = (p, p);
        if !s.is_empty() {
            s.sort_by(f64::total_cmp);
            lo = quantile(&s, tail).0.min(p);
            hi = quantile(&s, 1.0 - tail).1.max(p);
        }
        *slot = EstimateWithCI { point: p, ci_low: lo, ci_high: hi, n_samples: n, method };
    }
    let [l, l_bar, l_dp, l_eo] = out;
    Ok(MetricEstimates { l, l_bar, l_dp, l_eo })
}
