//! JSON and text file formats: worlds, utilities, mechanisms, attribute
//! metrics, path plans, point clouds and occupancy masks.

use std::fs;
use std::path::Path;

use privfair_core::nav::{GridEnvironment, PathPlan, Point, PointCloud};
use privfair_core::{Alphabet, AttributeMetric, DecisionPolicy, MechanismMatrix, Prior, TabularWorld, UtilityTable};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ModelContext, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), source })
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("in-memory values serialize");
    s.push('\n');
    s
}

fn alphabet(labels: &[String], axis: &str) -> Result<Alphabet> {
    Alphabet::new(labels.iter().cloned()).context(format!("alphabet {axis}"))
}

/// World file: policy indexed `[x][a][u]`, optional dependent joint `[x][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldFile {
    pub u: Vec<String>,
    pub x: Vec<String>,
    pub a: Vec<String>,
    pub prior_x: Vec<f64>,
    pub prior_a: Vec<f64>,
    pub policy: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_xa: Option<Vec<Vec<f64>>>,
}

impl WorldFile {
    pub fn to_world(&self) -> Result<TabularWorld> {
        let (u, x, a) = (alphabet(&self.u, "u")?, alphabet(&self.x, "x")?, alphabet(&self.a, "a")?);
        let policy = DecisionPolicy::from_nested(u, x.clone(), a.clone(), &self.policy).context("policy")?;
        let px = Prior::new(x, self.prior_x.clone()).context("prior_x")?;
        let pa = Prior::new(a, self.prior_a.clone()).context("prior_a")?;
        match &self.joint_xa {
            None => TabularWorld::new(policy, px, pa).context("world"),
            Some(j) => TabularWorld::with_joint(policy, px, pa, j.clone()).context("joint_xa"),
        }
    }

    pub fn from_world(world: &TabularWorld) -> Self {
        let (nu, na) = (world.u().len(), world.a().len());
        let table = world.policy().table();
        let policy = table.chunks(nu * na).map(|by_a| by_a.chunks(nu).map(<[f64]>::to_vec).collect()).collect();
        Self {
            u: world.u().labels().to_vec(),
            x: world.x().labels().to_vec(),
            a: world.a().labels().to_vec(),
            prior_x: world.prior_x().probs().to_vec(),
            prior_a: world.prior_a().probs().to_vec(),
            policy,
            joint_xa: world.joint_xa().map(|j| j.chunks(na).map(<[f64]>::to_vec).collect()),
        }
    }
}

pub fn load_world(path: &Path) -> Result<TabularWorld> {
    read_json::<WorldFile>(path)?.to_world().map_err(|e| match e {
        Error::Model { context, source } => Error::Model { context: format!("{}: {context}", path.display()), source },
        e => e,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    IndicatorUEqualsA,
    UValue,
}

/// Utility file: a dense table `g[u][x][a]` or a named shorthand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum UtilitySpec {
    Dense { g: Vec<Vec<Vec<f64>>> },
    Kind { kind: UtilityKind },
}

impl UtilitySpec {
    pub fn to_table(&self, u: &Alphabet, x: &Alphabet, a: &Alphabet) -> Result<UtilityTable> {
        let (nu, nx, na) = (u.len(), x.len(), a.len());
        match self {
            UtilitySpec::Kind { kind: UtilityKind::IndicatorUEqualsA } => Ok(UtilityTable::indicator_u_equals_a(u, x, a)),
            UtilitySpec::Kind { kind: UtilityKind::UValue } => UtilityTable::u_value(u, nx, na).context("utility u_value"),
            UtilitySpec::Dense { g } => {
                let bad = |axis: &str, expected: usize, found: usize| {
                    Error::config("utility g", format!("{axis} axis has {found} entries, world has {expected}"))
                };
                if g.len() != nu {
                    return Err(bad("u", nu, g.len()));
                }
                let mut values = Vec::with_capacity(nu * nx * na);
                for by_x in g {
                    if by_x.len() != nx {
                        return Err(bad("x", nx, by_x.len()));
                    }
                    for by_a in by_x {
                        if by_a.len() != na {
                            return Err(bad("a", na, by_a.len()));
                        }
                        values.extend_from_slice(by_a);
                    }
                }
                UtilityTable::new(nu, nx, na, values).context("utility g")
            }
        }
    }
}

pub fn load_utility(path: &Path, world: &TabularWorld) -> Result<UtilityTable> {
    read_json::<UtilitySpec>(path)?.to_table(world.u(), world.x(), world.a())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismFile {
    #[serde(rename = "in")]
    pub input: Vec<String>,
    #[serde(rename = "out")]
    pub output: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl MechanismFile {
    pub fn to_mechanism(&self) -> Result<MechanismMatrix> {
        MechanismMatrix::new(alphabet(&self.input, "in")?, alphabet(&self.output, "out")?, self.rows.clone())
            .context("mechanism")
    }

    pub fn from_mechanism(m: &MechanismMatrix) -> Self {
        Self { input: m.input().labels().to_vec(), output: m.output().labels().to_vec(), rows: m.rows() }
    }
}

pub fn load_mechanism(path: &Path) -> Result<MechanismMatrix> {
    read_json::<MechanismFile>(path)?.to_mechanism()
}

/// Explicit attribute metric: `{"distances": [[d]]}` over the A alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricFile {
    pub distances: Vec<Vec<f64>>,
}

pub fn load_metric(path: &Path) -> Result<AttributeMetric> {
    AttributeMetric::explicit(read_json::<MetricFile>(path)?.distances).context("attribute metric")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFile {
    pub cells: Vec<[usize; 2]>,
    pub cost: f64,
}

impl From<&PathPlan> for PathFile {
    fn from(p: &PathPlan) -> Self {
        Self { cells: p.cells.iter().map(|&(r, c)| [r, c]).collect(), cost: p.cost }
    }
}

/// Parses `x y z [label]` lines; blank lines and `#` comments are skipped.
pub fn parse_point_cloud(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(Error::config(format!("point cloud line {}", n + 1), "expected `x y z [label]`"));
        }
        let mut xyz = [0.0; 3];
        for (slot, f) in xyz.iter_mut().zip(&fields) {
            *slot = f
                .parse()
                .map_err(|_| Error::config(format!("point cloud line {}", n + 1), format!("{f:?} is not a number")))?;
        }
        points.push(match fields.get(3) {
            Some(l) => Point::labelled(xyz[0], xyz[1], xyz[2], *l),
            None => Point::new(xyz[0], xyz[1], xyz[2]),
        });
    }
    Ok(PointCloud::new(points)?)
}

pub fn write_point_cloud(cloud: &PointCloud) -> String {
    let mut out = String::new();
    for p in cloud.points() {
        out.push_str(&format!("{} {} {}", p.x, p.y, p.z));
        if let Some(l) = &p.label {
            out.push(' ');
            out.push_str(l);
        }
        out.push('\n');
    }
    out
}

/// Occupancy mask text: one line per row, `.` traversable and `#` blocked.
pub fn parse_mask(text: &str) -> Result<GridEnvironment> {
    let rows: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
    let cols = rows.first().map_or(0, |r| r.chars().count());
    let mut mask = Vec::with_capacity(rows.len() * cols);
    for (i, row) in rows.iter().enumerate() {
        if row.chars().count() != cols {
            return Err(Error::config(format!("mask row {i}"), format!("expected {cols} cells")));
        }
        for ch in row.chars() {
            mask.push(match ch {
                '.' => true,
                '#' => false,
                other => return Err(Error::config(format!("mask row {i}"), format!("unexpected {other:?}"))),
            });
        }
    }
    Ok(GridEnvironment::from_mask(rows.len(), cols, mask)?)
}

pub fn write_mask(env: &GridEnvironment) -> String {
    let mut out = String::with_capacity(env.rows() * (env.cols() + 1));
    for r in 0..env.rows() {
        out.extend((0..env.cols()).map(|c| if env.is_traversable((r, c)) { '.' } else { '#' }));
        out.push('\n');
    }
    out
}
