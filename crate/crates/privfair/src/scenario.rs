//! Task-assignment scenario files (TOML, `version = 1`).

use std::path::{Path, PathBuf};

use privfair_core::engine::{
    AttributeMechanisms, Candidate, DecisionEngine, Profile, ScenarioKind, SyntheticBiasedEngine, TabularEngine,
};
use privfair_core::nav::{build_top_view, build_traversability, candidate_paths, Cell, Connectivity};
use privfair_core::{binary_rr_from_p, randomized_response, Alphabet, DecisionPolicy, MechanismMatrix};
use serde::Deserialize;

use crate::error::{Error, ModelContext, Result};
use crate::formats::{parse_mask, parse_point_cloud, read_text};
use crate::remote::{RemoteConfig, RemoteEngine};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MechanismSpec {
    Identity,
    Uniform,
    RandomizedResponse { epsilon: f64 },
    /// Binary randomized response that keeps the label with probability `p`.
    KeepProbability { p: f64 },
    Rows { rows: Vec<Vec<f64>> },
}

impl MechanismSpec {
    pub fn build(&self, alphabet: &Alphabet) -> Result<MechanismMatrix> {
        match self {
            MechanismSpec::Identity => Ok(MechanismMatrix::identity(alphabet.clone())),
            MechanismSpec::Uniform => Ok(MechanismMatrix::uniform(alphabet.clone())),
            MechanismSpec::RandomizedResponse { epsilon } => {
                randomized_response(alphabet, *epsilon).context("randomized_response")
            }
            MechanismSpec::KeepProbability { p } => binary_rr_from_p(alphabet, *p).context("keep_probability"),
            MechanismSpec::Rows { rows } => {
                MechanismMatrix::new(alphabet.clone(), alphabet.clone(), rows.clone()).context("mechanism rows")
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttributeFile {
    name: String,
    labels: Vec<String>,
    #[serde(default = "identity")]
    mechanism: MechanismSpec,
}

fn identity() -> MechanismSpec {
    MechanismSpec::Identity
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidateFile {
    id: String,
    profile: toml::Table,
    #[serde(default)]
    destination: Option<[usize; 2]>,
    #[serde(default)]
    route_cost: Option<f64>,
    #[serde(default)]
    route_summary: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    #[serde(default)]
    mask: Option<PathBuf>,
    #[serde(default)]
    cloud: Option<PathBuf>,
    #[serde(default = "unit")]
    resolution: f64,
    #[serde(default)]
    ceiling: Option<f64>,
    #[serde(default)]
    h_min: Option<f64>,
    #[serde(default)]
    h_max: Option<f64>,
    start: [usize; 2],
    #[serde(default = "eight")]
    connectivity: u8,
}

fn unit() -> f64 {
    1.0
}

fn eight() -> u8 {
    8
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub attribute: String,
    pub label: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EngineSpec {
    /// Softmax over attribute weights; scenario defaults when omitted.
    Synthetic {
        #[serde(default)]
        weights: Option<Vec<WeightSpec>>,
    },
    /// Policy table over `x` = item, `a` = labels of `key_attribute` and
    /// `u` = candidate ids, indexed `[x][a][u]`.
    Tabular { key_attribute: String, u: Vec<String>, x: Vec<String>, a: Vec<String>, policy: Vec<Vec<Vec<f64>>> },
    Remote(RemoteConfig),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    version: u32,
    scenario: String,
    #[serde(default)]
    item: Option<String>,
    engine: EngineSpec,
    attributes: Vec<AttributeFile>,
    candidates: Vec<CandidateFile>,
    #[serde(default)]
    map: Option<MapFile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeDecl {
    pub name: String,
    pub labels: Alphabet,
}

/// A validated scenario: candidates with routes, their raw profiles, one
/// mechanism per attribute and an engine description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub item: Option<String>,
    pub attributes: Vec<AttributeDecl>,
    pub mechanisms: AttributeMechanisms,
    pub candidates: Vec<Candidate>,
    pub profiles: Vec<Profile>,
    pub engine: EngineSpec,
}

fn grid_cell(v: [usize; 2]) -> Cell {
    (v[0], v[1])
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            Error::Config { field, message } => Error::Config { field: format!("{}: {field}", path.display()), message },
            e => e,
        })
    }

    /// Parses scenario text; relative map paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::config("scenario", e.message().to_string()))?;
        if file.version != SCENARIO_VERSION {
            return Err(Error::config("version", format!("expected {SCENARIO_VERSION}, found {}", file.version)));
        }
        let kind = ScenarioKind::parse(&file.scenario)
            .ok_or_else(|| Error::config("scenario", format!("unknown scenario {:?}", file.scenario)))?;
        if file.attributes.is_empty() {
            return Err(Error::config("attributes", "at least one attribute is required"));
        }
        let mut attributes = Vec::new();
        let mut mechanisms = AttributeMechanisms::new();
        for (i, a) in file.attributes.iter().enumerate() {
            if attributes.iter().any(|d: &AttributeDecl| d.name == a.name) {
                return Err(Error::config(format!("attributes[{i}].name"), format!("duplicate attribute {:?}", a.name)));
            }
            let labels = Alphabet::new(a.labels.iter().cloned()).context(format!("attributes[{i}].labels"))?;
            mechanisms.insert(&a.name, a.mechanism.build(&labels)?);
            attributes.push(AttributeDecl { name: a.name.clone(), labels });
        }
        if file.candidates.len() < 2 {
            return Err(Error::config("candidates", "at least two candidates are required"));
        }
        let mut profiles = Vec::new();
        for (i, c) in file.candidates.iter().enumerate() {
            let field = format!("candidates[{i}].profile");
            if let Some(k) = c.profile.keys().find(|k| !attributes.iter().any(|a| &a.name == *k)) {
                return Err(Error::config(field, format!("undeclared attribute {k:?}")));
            }
            let mut pairs = Vec::new();
            for a in &attributes {
                let label = c
                    .profile
                    .get(&a.name)
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| Error::config(&field, format!("missing string label for {:?}", a.name)))?;
                if a.labels.index_of(label).is_none() {
                    return Err(Error::config(&field, format!("{label:?} is not a declared label of {:?}", a.name)));
                }
                pairs.push((a.name.clone(), label.to_string()));
            }
            profiles.push(Profile::new(pairs).map_err(|e| Error::config(&field, e.message))?);
        }
        let candidates = match &file.map {
            Some(map) => routed_candidates(&file.candidates, map, base)?,
            None => file
                .candidates
                .iter()
                .enumerate()
                .map(|(i, c)| match c.route_cost {
                    Some(cost) if cost >= 0.0 && cost.is_finite() => Ok(Candidate {
                        id: c.id.clone(),
                        route_cost: cost,
                        route_summary: c.route_summary.clone().unwrap_or_else(|| format!("route cost {cost:.1}")),
                    }),
                    _ => Err(Error::config(
                        format!("candidates[{i}].route_cost"),
                        "required non-negative number when there is no [map]",
                    )),
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let scenario = Self { kind, item: file.item, attributes, mechanisms, candidates, profiles, engine: file.engine };
        scenario.build_engine()?;
        Ok(scenario)
    }

    pub fn candidate_ids(&self) -> Vec<String> {
        self.candidates.iter().map(|c| c.id.clone()).collect()
    }

    /// Same scenario with every attribute released through `spec`.
    pub fn with_mechanism(&self, spec: &MechanismSpec) -> Result<Self> {
        let mut mechanisms = AttributeMechanisms::new();
        for a in &self.attributes {
            mechanisms.insert(&a.name, spec.build(&a.labels)?);
        }
        Ok(Self { mechanisms, ..self.clone() })
    }

    pub fn build_engine(&self) -> Result<Box<dyn DecisionEngine>> {
        match &self.engine {
            EngineSpec::Synthetic { weights } => {
                let engine = match (weights, self.kind) {
                    (Some(w), _) => SyntheticBiasedEngine::new(w.iter().map(|w| (&*w.attribute, &*w.label, w.weight)))?,
                    (None, ScenarioKind::HrDelivery) => SyntheticBiasedEngine::hr_default(),
                    (None, ScenarioKind::PackageDelivery) => SyntheticBiasedEngine::package_default(),
                };
                for a in &self.attributes {
                    for l in a.labels.labels() {
                        if !engine.weights().contains_key(&(a.name.clone(), l.clone())) {
                            return Err(Error::config("engine.weights", format!("no weight for {} = {l:?}", a.name)));
                        }
                    }
                }
                Ok(Box::new(engine))
            }
            EngineSpec::Tabular { key_attribute, u, x, a, policy } => {
                let alpha = |v: &[String], f: &str| Alphabet::new(v.iter().cloned()).context(format!("engine.{f}"));
                let p = DecisionPolicy::from_nested(alpha(u, "u")?, alpha(x, "x")?, alpha(a, "a")?, policy)
                    .context("engine.policy")?;
                if !self.attributes.iter().any(|d| &d.name == key_attribute) {
                    return Err(Error::config("engine.key_attribute", format!("undeclared attribute {key_attribute:?}")));
                }
                Ok(Box::new(TabularEngine::new(p, key_attribute)))
            }
            EngineSpec::Remote(cfg) => {
                if self.candidates.len() != 2 {
                    return Err(Error::config("candidates", "the remote engine needs exactly two candidates"));
                }
                Ok(Box::new(RemoteEngine::new(cfg.clone())?))
            }
        }
    }
}

fn routed_candidates(candidates: &[CandidateFile], map: &MapFile, base: &Path) -> Result<Vec<Candidate>> {
    let conn = match map.connectivity {
        4 => Connectivity::Four,
        8 => Connectivity::Eight,
        n => return Err(Error::config("map.connectivity", format!("expected 4 or 8, found {n}"))),
    };
    let (env, resolution) = match (&map.mask, &map.cloud) {
        (Some(mask), None) => (parse_mask(&read_text(&base.join(mask))?)?, map.resolution),
        (None, Some(cloud)) => {
            let need = |v: Option<f64>, f: &str| v.ok_or_else(|| Error::config(format!("map.{f}"), "required with cloud"));
            let cloud = parse_point_cloud(&read_text(&base.join(cloud))?)?;
            let top = build_top_view(&cloud, map.resolution, need(map.ceiling, "ceiling")?)?;
            (build_traversability(&top, need(map.h_min, "h_min")?, need(map.h_max, "h_max")?)?, map.resolution)
        }
        _ => return Err(Error::config("map", "exactly one of mask or cloud is required")),
    };
    let mut dests = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        let d = c.destination.ok_or_else(|| Error::config(format!("candidates[{i}].destination"), "required with [map]"))?;
        dests.push((c.id.clone(), grid_cell(d)));
    }
    let set = candidate_paths(&env, grid_cell(map.start), &dests, conn)?;
    if let Some(id) = set.unreachable.first() {
        return Err(Error::config("candidates", format!("destination of {id:?} is unreachable")));
    }
    Ok(set
        .paths
        .into_iter()
        .map(|(id, plan)| Candidate {
            route_summary: format!("route length {:.1} m over {} cells", plan.cost * resolution, plan.cells.len()),
            id,
            route_cost: plan.cost,
        })
        .collect())
}
