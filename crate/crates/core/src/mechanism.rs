//! Randomized release mechanisms over finite alphabets and exact `(ε, δ)`
//! accounting for them.
//!
//! Every pair of inputs is treated as adjacent, so the guarantee of a
//! mechanism is governed by its worst pair of rows. For rows `p = M[a]` and
//! `q = M[a']` the tightest slack at level `ε` is attained by the positive-gap
//! event `{o : p_o > e^ε q_o}`, which gives the closed form
//! `δ*(ε) = max_{a, a'} Σ_o (p_o − e^ε q_o)⁺`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use crate::math::{check_row, exp, ln, log_ratio, pick, RowFault};
use crate::model::Alphabet;
use crate::{Error, LOAD_TOLERANCE};

/// Row-stochastic matrix `M[input][output]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismMatrix {
    input: Alphabet,
    output: Alphabet,
    rows: Vec<f64>,
}

/// An `(ε, δ)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self, Error> {
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidParameter { name: "epsilon", value: epsilon });
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::InvalidParameter { name: "delta", value: delta });
        }
        Ok(Self { epsilon, delta })
    }

    pub fn pure(epsilon: f64) -> Result<Self, Error> {
        Self::new(epsilon, 0.0)
    }
}

/// Outcome of [`MechanismMatrix::verify_dp`].
#[derive(Debug, Clone, PartialEq)]
pub enum DpVerdict {
    Pass {
        /// `δ*(ε)` of the mechanism at the requested `ε`.
        tightest_delta: f64,
    },
    Fail {
        a: usize,
        a_prime: usize,
        /// Output indices forming the violating event.
        event: Vec<usize>,
        /// `P(M(a) ∈ event) − e^ε P(M(a') ∈ event)`.
        gap: f64,
    },
}

impl DpVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, DpVerdict::Pass { .. })
    }
}

impl MechanismMatrix {
    pub fn new(input: Alphabet, output: Alphabet, rows: Vec<Vec<f64>>) -> Result<Self, Error> {
        if rows.len() != input.len() {
            return Err(Error::ShapeMismatch { what: "mechanism rows", expected: input.len(), found: rows.len() });
        }
        let mut flat = Vec::with_capacity(input.len() * output.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != output.len() {
                return Err(Error::ShapeMismatch { what: "mechanism row", expected: output.len(), found: row.len() });
            }
            check_row(row, LOAD_TOLERANCE).map_err(|fault| match fault {
                RowFault::Entry(j, value) => Error::InvalidProbability {
                    what: "mechanism",
                    location: format!("[{i}][{j}]"),
                    value,
                },
                RowFault::Sum(sum) => Error::RowSum { what: "mechanism", location: format!("[{i}]"), sum },
            })?;
            flat.extend_from_slice(row);
        }
        Ok(Self { input, output, rows: flat })
    }

    pub fn identity(alphabet: Alphabet) -> Self {
        let k = alphabet.len();
        let mut rows = vec![0.0; k * k];
        for i in 0..k {
            rows[i * k + i] = 1.0;
        }
        Self { input: alphabet.clone(), output: alphabet, rows }
    }

    /// Every input maps to the uniform distribution: outputs carry no information.
    pub fn uniform(alphabet: Alphabet) -> Self {
        let k = alphabet.len();
        Self { input: alphabet.clone(), output: alphabet, rows: vec![1.0 / k as f64; k * k] }
    }

    pub fn input(&self) -> &Alphabet {
        &self.input
    }

    pub fn output(&self) -> &Alphabet {
        &self.output
    }

    pub fn row(&self, input: usize) -> &[f64] {
        let k = self.output.len();
        &self.rows[input * k..(input + 1) * k]
    }

    pub fn prob(&self, input: usize, output: usize) -> f64 {
        self.rows[input * self.output.len() + output]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.input.len()).map(|i| self.row(i).to_vec()).collect()
    }

    /// Draws an output index for `input`.
    pub fn sample(&self, input: usize, rng: &mut dyn RngCore) -> usize {
        let s = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        pick(self.row(input), s)
    }

    /// Smallest `ε` for which the mechanism is `(ε, 0)`-DP; `+∞` when some
    /// output is reachable from one input but not from another.
    pub fn tightest_epsilon(&self) -> f64 {
        let n = self.input.len();
        let mut best: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                for (&p, &q) in self.row(a).iter().zip(self.row(b)) {
                    // ratios within rounding of 1 count as equal
                    if p <= q * (1.0 + 4.0 * f64::EPSILON) {
                        continue;
                    }
                    if let Some(r) = log_ratio(p, q) {
                        best = best.max(r);
                    }
                }
            }
        }
        best
    }

    /// `δ*(ε)`: the smallest `δ` for which `(ε, δ)`-DP holds.
    pub fn tightest_delta(&self, epsilon: f64) -> f64 {
        self.worst_pair(epsilon).2
    }

    fn worst_pair(&self, epsilon: f64) -> (usize, usize, f64) {
        let t = exp(epsilon);
        let n = self.input.len();
        let mut best = (0, 0, 0.0);
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let gap: f64 = self.row(a).iter().zip(self.row(b)).map(|(p, q)| positive_gap(*p, *q, t)).sum();
                if gap > best.2 {
                    best = (a, b, gap);
                }
            }
        }
        best
    }

    /// Smallest `ε` with `δ*(ε) ≤ delta` up to rounding, by bisection on the
    /// monotone `δ*`.
    pub fn epsilon_for_delta(&self, delta: f64) -> f64 {
        let delta = delta + 8.0 * f64::EPSILON;
        if self.tightest_delta(0.0) <= delta {
            return 0.0;
        }
        let mut hi = self.tightest_epsilon();
        if hi.is_infinite() {
            if self.tightest_delta(f64::INFINITY) > delta {
                return f64::INFINITY;
            }
            hi = 1.0;
            while self.tightest_delta(hi) > delta {
                hi *= 2.0;
                if hi > 1e3 {
                    return f64::INFINITY;
                }
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.tightest_delta(mid) <= delta {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// The tight budget at a caller-chosen slack: `(ε*(δ), δ*(ε*(δ)))`.
    /// A residual `δ*` within rounding of `delta` is reported as `delta`.
    pub fn tight_budget(&self, delta: f64) -> PrivacyBudget {
        let epsilon = self.epsilon_for_delta(delta);
        let tight = self.tightest_delta(epsilon);
        PrivacyBudget { epsilon, delta: if tight <= delta + 8.0 * f64::EPSILON { delta } else { tight } }
    }

    /// Checks `(ε, δ)`-DP over all input pairs and all output events.
    pub fn verify_dp(&self, budget: PrivacyBudget) -> DpVerdict {
        let (a, b, gap) = self.worst_pair(budget.epsilon);
        if gap <= budget.delta + 1e-12 {
            return DpVerdict::Pass { tightest_delta: gap };
        }
        let t = exp(budget.epsilon);
        let event = self
            .row(a)
            .iter()
            .zip(self.row(b))
            .enumerate()
            .filter(|(_, (p, q))| positive_gap(**p, **q, t) > 0.0)
            .map(|(o, _)| o)
            .collect();
        DpVerdict::Fail { a, a_prime: b, event, gap }
    }

    /// Runs `self` and feeds its output through `map`: the product `self · map`.
    pub fn post_process(&self, map: &MechanismMatrix) -> Result<MechanismMatrix, Error> {
        if self.output != map.input {
            return Err(Error::AlphabetMismatch { what: "post-processing map input must equal mechanism output" });
        }
        let (n, m, k) = (self.input.len(), self.output.len(), map.output.len());
        let mut rows = vec![0.0; n * k];
        for i in 0..n {
            for j in 0..m {
                let w = self.prob(i, j);
                if w == 0.0 {
                    continue;
                }
                for l in 0..k {
                    rows[i * k + l] += w * map.prob(j, l);
                }
            }
        }
        Ok(MechanismMatrix { input: self.input.clone(), output: map.output.clone(), rows })
    }
}

/// `(p − t q)⁺`, with products of `∞ · 0` read as zero and sub-ulp residue
/// from `t = p / q` flushed to zero.
fn positive_gap(p: f64, q: f64, t: f64) -> f64 {
    if q == 0.0 {
        return p;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let tq = t * q;
    let d = p - tq;
    if d <= 4.0 * f64::EPSILON * p.max(tq) {
        0.0
    } else {
        d
    }
}

/// k-ary randomized response: keep the true symbol with probability
/// `e^ε / (e^ε + k − 1)`, otherwise report one of the other `k − 1` symbols
/// uniformly.
pub fn randomized_response(alphabet: &Alphabet, epsilon: f64) -> Result<MechanismMatrix, Error> {
    let k = alphabet.len();
    if k < 2 {
        return Err(Error::DegenerateAlphabet { size: k });
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter { name: "epsilon", value: epsilon });
    }
    if epsilon.is_infinite() {
        return Ok(MechanismMatrix::identity(alphabet.clone()));
    }
    let others = (k - 1) as f64;
    // e^ε / (e^ε + k − 1) written to stay finite for large ε
    let keep = 1.0 / (1.0 + others * exp(-epsilon));
    let flip = (1.0 - keep) / others;
    let mut rows = vec![flip; k * k];
    for i in 0..k {
        rows[i * k + i] = keep;
    }
    Ok(MechanismMatrix { input: alphabet.clone(), output: alphabet.clone(), rows })
}

/// Binary randomized response that keeps the true label with probability `p`.
pub fn binary_rr_from_p(alphabet: &Alphabet, p: f64) -> Result<MechanismMatrix, Error> {
    if alphabet.len() != 2 {
        return Err(Error::ShapeMismatch { what: "binary alphabet", expected: 2, found: alphabet.len() });
    }
    if !(p > 0.0 && p < 1.0) {
        if p == 0.0 || p == 1.0 {
            return Err(Error::DegenerateMechanism { p });
        }
        return Err(Error::InvalidParameter { name: "p", value: p });
    }
    MechanismMatrix::new(alphabet.clone(), alphabet.clone(), vec![vec![p, 1.0 - p], vec![1.0 - p, p]])
}

/// `ε = ln(p / (1 − p))`, the DP level of binary randomized response.
pub fn epsilon_from_keep_probability(p: f64) -> f64 {
    ln(p / (1.0 - p)).abs()
}
