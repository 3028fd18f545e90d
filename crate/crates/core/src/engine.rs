//! Decision engines that pick among candidate destinations from (possibly
//! privatized) profiles, and the task-assignment step that feeds them.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::{exp, pick};
use crate::mechanism::MechanismMatrix;
use crate::model::DecisionPolicy;

/// Ordered attribute-name → label record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Profile {
    attributes: Vec<(String, String)>,
}

impl Profile {
    pub fn new<I, K, V>(attributes: I) -> Result<Self, EngineError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let attributes: Vec<(String, String)> = attributes.into_iter().map(|(k, v)| (k.into(), v.into())).collect();
        if attributes.is_empty() {
            return Err(EngineError::new(EngineErrorKind::Config, "profile has no attributes"));
        }
        for (i, (k, _)) in attributes.iter().enumerate() {
            if attributes[..i].iter().any(|(j, _)| j == k) {
                return Err(EngineError::new(EngineErrorKind::Config, format!("attribute {k:?} listed twice")));
            }
        }
        Ok(Self { attributes })
    }

    pub fn attributes(&self) -> &[(String, String)] {
        &self.attributes
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.attributes.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.attributes.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}: {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Pick one of several HR offices; scores are preferences, highest wins.
    HrDelivery,
    /// Order recipients; scores are ranks, rank 1 is served first.
    PackageDelivery,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::HrDelivery => "hr_delivery",
            ScenarioKind::PackageDelivery => "package_delivery",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hr_delivery" => Some(ScenarioKind::HrDelivery),
            "package_delivery" => Some(ScenarioKind::PackageDelivery),
            _ => None,
        }
    }
}

/// A destination as seen by the engine.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateView {
    pub id: String,
    pub profile: Profile,
    pub route_cost: f64,
    pub route_summary: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRequest {
    pub scenario: ScenarioKind,
    pub candidates: Vec<CandidateView>,
    /// Non-sensitive context label, e.g. the delivered item.
    pub context: Option<String>,
}

impl DecisionRequest {
    /// One line per candidate, for audit trails and error payloads.
    pub fn describe(&self) -> String {
        let mut out = format!("scenario={}", self.scenario.as_str());
        if let Some(c) = &self.context {
            out.push_str(&format!(" context={c}"));
        }
        for c in &self.candidates {
            out.push_str(&format!("\n{}: {} | {}", c.id, c.profile, c.route_summary));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineDecision {
    /// Per-candidate scores in candidate order: preferences for HR delivery,
    /// ranks for package delivery.
    pub scores: Vec<(String, f64)>,
    pub chosen: String,
    /// Candidates from first served to last.
    pub order: Vec<String>,
    pub reason: String,
    /// Raw exchange with an external engine, when there is one.
    pub audit: Option<String>,
}

impl EngineDecision {
    /// Decision read off scores. For HR delivery the highest score wins, for
    /// package delivery the lowest rank; ties go to the earlier candidate.
    pub fn from_scores(kind: ScenarioKind, scores: Vec<(String, f64)>, reason: impl Into<String>) -> Self {
        let key = |s: f64| match kind {
            ScenarioKind::HrDelivery => -s,
            ScenarioKind::PackageDelivery => s,
        };
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.sort_by(|&i, &j| key(scores[i].1).total_cmp(&key(scores[j].1)).then(i.cmp(&j)));
        let order: Vec<String> = idx.iter().map(|&i| scores[i].0.clone()).collect();
        Self { chosen: order[0].clone(), order, scores, reason: reason.into(), audit: None }
    }

    /// Decision that selects candidate `chosen` outright.
    pub fn from_choice(kind: ScenarioKind, ids: &[String], chosen: usize, reason: impl Into<String>) -> Self {
        let mut rank = 1.0;
        let scores = ids
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let s = match kind {
                    ScenarioKind::HrDelivery => f64::from(u8::from(i == chosen)),
                    ScenarioKind::PackageDelivery if i == chosen => 1.0,
                    ScenarioKind::PackageDelivery => {
                        rank += 1.0;
                        rank
                    }
                };
                (id.clone(), s)
            })
            .collect();
        Self::from_scores(kind, scores, reason)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineErrorKind {
    Config,
    Encoding,
    Scenario,
    Transport,
    Timeout,
    Parse,
    Protocol,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineError {
    pub kind: EngineErrorKind,
    pub message: String,
    /// Request or response body that triggered the error.
    pub payload: Option<String>,
}

impl EngineError {
    pub fn new(kind: EngineErrorKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into(), payload: None }
    }

    pub fn with_payload(mut self, payload: impl Into<String>) -> Self {
        self.payload = Some(payload.into());
        self
    }

    /// Transport failures and timeouts may succeed on a later attempt.
    pub fn is_retriable(&self) -> bool {
        matches!(self.kind, EngineErrorKind::Transport | EngineErrorKind::Timeout)
    }
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} error: {}", self.kind, self.message)
    }
}

impl core::error::Error for EngineError {}

/// Anything that turns a request into a decision.
pub trait DecisionEngine: Send + Sync {
    fn name(&self) -> &str;
    fn decide(&self, request: &DecisionRequest, rng: &mut dyn RngCore) -> Result<EngineDecision, EngineError>;
}

fn ids(request: &DecisionRequest) -> Vec<String> {
    request.candidates.iter().map(|c| c.id.clone()).collect()
}

/// Samples decisions from a policy table. `X` is the request context, `A`
/// the first candidate's value of `key_attribute`, and `U` ranges over
/// candidate ids.
#[derive(Debug, Clone)]
pub struct TabularEngine {
    policy: DecisionPolicy,
    key_attribute: String,
}

impl TabularEngine {
    pub fn new(policy: DecisionPolicy, key_attribute: impl Into<String>) -> Self {
        Self { policy, key_attribute: key_attribute.into() }
    }

    pub fn policy(&self) -> &DecisionPolicy {
        &self.policy
    }
}

impl DecisionEngine for TabularEngine {
    fn name(&self) -> &str {
        "tabular"
    }

    fn decide(&self, request: &DecisionRequest, rng: &mut dyn RngCore) -> Result<EngineDecision, EngineError> {
        let enc = |m: String| EngineError::new(EngineErrorKind::Encoding, m);
        let xs = self.policy.x_alphabet();
        let x = match &request.context {
            Some(c) => xs.index_of(c).ok_or_else(|| enc(format!("context {c:?} is not in the policy's X alphabet")))?,
            None if xs.len() == 1 => 0,
            None => return Err(enc("request has no context but the policy's X alphabet has several labels".into())),
        };
        let first = request.candidates.first().ok_or_else(|| enc("request has no candidates".into()))?;
        let label = first
            .profile
            .get(&self.key_attribute)
            .ok_or_else(|| enc(format!("candidate {} has no attribute {:?}", first.id, self.key_attribute)))?;
        let a = self
            .policy
            .a_alphabet()
            .index_of(label)
            .ok_or_else(|| enc(format!("label {label:?} is not in the policy's A alphabet")))?;
        let u = pick(self.policy.row(x, a), rng.gen());
        let id = self.policy.u_alphabet().label(u);
        let ids = ids(request);
        let chosen = ids
            .iter()
            .position(|c| c == id)
            .ok_or_else(|| enc(format!("policy outcome {id:?} is not a candidate id")))?;
        Ok(EngineDecision::from_choice(request.scenario, &ids, chosen, "sampled from policy table"))
    }
}

/// Scores each candidate by `exp(Σ weight(attribute, label))` over its
/// privatized profile and picks the highest, breaking exact ties uniformly
/// at random.
#[derive(Debug, Clone)]
pub struct SyntheticBiasedEngine {
    weights: BTreeMap<(String, String), f64>,
}

impl SyntheticBiasedEngine {
    pub fn new<I, A, L>(weights: I) -> Result<Self, EngineError>
    where
        I: IntoIterator<Item = (A, L, f64)>,
        A: Into<String>,
        L: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (a, l, w) in weights {
            if !w.is_finite() {
                return Err(EngineError::new(EngineErrorKind::Config, "weights must be finite"));
            }
            map.insert((a.into(), l.into()), w);
        }
        Ok(Self { weights: map })
    }

    /// Weights under which the older, American, female profile wins.
    pub fn hr_default() -> Self {
        Self::new([
            ("name", "Tom", 0.0),
            ("name", "Mary", 1.0),
            ("age", "25", 0.0),
            ("age", "55", 1.0),
            ("race", "Asian", 0.0),
            ("race", "American", 1.0),
        ])
        .expect("static weights are finite")
    }

    /// Weights under which the low-complaint recipient is served first.
    pub fn package_default() -> Self {
        Self::new([("complaint_rate", "low", 1.0), ("complaint_rate", "high", 0.0)])
            .expect("static weights are finite")
    }

    pub fn weights(&self) -> &BTreeMap<(String, String), f64> {
        &self.weights
    }

    fn logit(&self, profile: &Profile) -> Result<f64, EngineError> {
        let mut total = 0.0;
        for (a, l) in profile.attributes() {
            total += self.weights.get(&(a.clone(), l.clone())).ok_or_else(|| {
                EngineError::new(EngineErrorKind::Config, format!("no weight for {a} = {l:?}"))
            })?;
        }
        Ok(total)
    }
}

/// Relative gap under which two synthetic logits count as tied, so that
/// rounding in the weight sums cannot decide a choice.
pub const TIE_TOLERANCE: f64 = 1e-9;

impl DecisionEngine for SyntheticBiasedEngine {
    fn name(&self) -> &str {
        "synthetic"
    }

    fn decide(&self, request: &DecisionRequest, rng: &mut dyn RngCore) -> Result<EngineDecision, EngineError> {
        if request.candidates.is_empty() {
            return Err(EngineError::new(EngineErrorKind::Scenario, "request has no candidates"));
        }
        let logits = request.candidates.iter().map(|c| self.logit(&c.profile)).collect::<Result<Vec<_>, _>>()?;
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logits.iter().map(|l| exp(l - top)).collect();
        let total: f64 = weights.iter().sum();
        let slack = TIE_TOLERANCE * (1.0 + top.abs());
        let tied: Vec<usize> = (0..logits.len()).filter(|&i| logits[i] >= top - slack).collect();
        let chosen = tied[rng.gen_range(0..tied.len())];
        let ids = ids(request);
        let decision = match request.scenario {
            ScenarioKind::HrDelivery => {
                let scores = ids.iter().cloned().zip(weights.iter().map(|w| w / total)).collect();
                let mut d = EngineDecision::from_scores(request.scenario, scores, "");
                // move the tie winner to the front without disturbing the scores
                d.order.retain(|id| *id != ids[chosen]);
                d.order.insert(0, ids[chosen].clone());
                d.chosen = ids[chosen].clone();
                d
            }
            ScenarioKind::PackageDelivery => EngineDecision::from_choice(request.scenario, &ids, chosen, ""),
        };
        Ok(EngineDecision { reason: format!("highest attribute score {top}"), ..decision })
    }
}

/// Per-attribute release mechanisms; attributes without one pass through.
#[derive(Debug, Clone, Default)]
pub struct AttributeMechanisms {
    by_attribute: BTreeMap<String, MechanismMatrix>,
}

impl AttributeMechanisms {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, attribute: impl Into<String>, mechanism: MechanismMatrix) {
        self.by_attribute.insert(attribute.into(), mechanism);
    }

    pub fn get(&self, attribute: &str) -> Option<&MechanismMatrix> {
        self.by_attribute.get(attribute)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &MechanismMatrix)> {
        self.by_attribute.iter()
    }

    /// Releases every attribute of `profile` through its mechanism.
    pub fn privatize(&self, profile: &Profile, rng: &mut dyn RngCore) -> Result<Profile, EngineError> {
        let mut out = Vec::with_capacity(profile.attributes().len());
        for (name, label) in profile.attributes() {
            let released = match self.by_attribute.get(name) {
                None => label.clone(),
                Some(m) => {
                    let i = m.input().index_of(label).ok_or_else(|| {
                        EngineError::new(
                            EngineErrorKind::Encoding,
                            format!("label {label:?} of {name} is not in its mechanism's input alphabet"),
                        )
                    })?;
                    m.output().label(m.sample(i, rng)).to_string()
                }
            };
            out.push((name.clone(), released));
        }
        Ok(Profile { attributes: out })
    }
}

/// A destination with its route.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub id: String,
    pub route_cost: f64,
    pub route_summary: String,
}

/// Outcome of one assignment, with raw and released profiles for audit.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub chosen: String,
    pub decision: EngineDecision,
    pub raw: Vec<Profile>,
    pub privatized: Vec<Profile>,
}

/// Privatizes each profile, asks `engine` to choose among `candidates` and
/// returns the choice. Deterministic in `seed` for deterministic engines.
pub fn assign_task(
    scenario: ScenarioKind,
    candidates: &[Candidate],
    profiles: &[Profile],
    engine: &dyn DecisionEngine,
    mechanisms: &AttributeMechanisms,
    context: Option<&str>,
    seed: u64,
) -> Result<Assignment, EngineError> {
    if candidates.len() != profiles.len() || candidates.is_empty() {
        return Err(EngineError::new(
            EngineErrorKind::Scenario,
            format!("{} candidates but {} profiles", candidates.len(), profiles.len()),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let privatized = profiles.iter().map(|p| mechanisms.privatize(p, &mut rng)).collect::<Result<Vec<_>, _>>()?;
    let request = DecisionRequest {
        scenario,
        candidates: candidates
            .iter()
            .zip(&privatized)
            .map(|(c, p)| CandidateView {
                id: c.id.clone(),
                profile: p.clone(),
                route_cost: c.route_cost,
                route_summary: c.route_summary.clone(),
            })
            .collect(),
        context: context.map(String::from),
    };
    let decision = engine.decide(&request, &mut rng).map_err(|e| match e.payload {
        Some(_) => e,
        None => e.with_payload(request.describe()),
    })?;
    if !candidates.iter().any(|c| c.id == decision.chosen) {
        return Err(EngineError::new(
            EngineErrorKind::Protocol,
            format!("engine chose {:?}, which is not a candidate", decision.chosen),
        )
        .with_payload(request.describe()));
    }
    Ok(Assignment { chosen: decision.chosen.clone(), decision, raw: profiles.to_vec(), privatized })
}
