use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{Cell, NavError};
use crate::math::floor;

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub label: Option<String>,
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z, label: None }
    }

    pub fn labelled(x: f64, y: f64, z: f64, label: impl Into<String>) -> Self {
        Self { x, y, z, label: Some(label.into()) }
    }
}

/// Non-empty set of finite points in metres.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Result<Self, NavError> {
        if points.is_empty() {
            return Err(NavError::EmptyCloud);
        }
        if let Some(index) = points.iter().position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite())) {
            return Err(NavError::NonFinitePoint { index });
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }
}

/// Top-view height map and traversability mask on a regular grid. Row `r`
/// covers `y ∈ [origin.1 + r·res, origin.1 + (r+1)·res)`, column `c` the
/// same in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEnvironment {
    resolution: f64,
    origin: (f64, f64),
    rows: usize,
    cols: usize,
    top_view: Vec<Option<f64>>,
    traversable: Vec<bool>,
    labels: Vec<Option<String>>,
}

impl GridEnvironment {
    /// A grid given directly by its traversability mask (row-major); free
    /// cells get height 0, blocked cells are empty.
    pub fn from_mask(rows: usize, cols: usize, traversable: Vec<bool>) -> Result<Self, NavError> {
        if traversable.len() != rows * cols {
            return Err(NavError::ShapeMismatch { expected: rows * cols, found: traversable.len() });
        }
        Ok(Self {
            resolution: 1.0,
            origin: (0.0, 0.0),
            rows,
            cols,
            top_view: traversable.iter().map(|t| t.then_some(0.0)).collect(),
            traversable,
            labels: vec![None; rows * cols],
        })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn contains(&self, (r, c): Cell) -> bool {
        r < self.rows && c < self.cols
    }

    pub fn height(&self, (r, c): Cell) -> Option<f64> {
        self.top_view[r * self.cols + c]
    }

    pub fn is_traversable(&self, (r, c): Cell) -> bool {
        r < self.rows && c < self.cols && self.traversable[r * self.cols + c]
    }

    pub fn label(&self, (r, c): Cell) -> Option<&str> {
        self.labels[r * self.cols + c].as_deref()
    }

    pub fn top_view(&self) -> &[Option<f64>] {
        &self.top_view
    }

    pub fn traversable(&self) -> &[bool] {
        &self.traversable
    }

    /// Cells carrying `label`, in row-major order.
    pub fn cells_labelled(&self, label: &str) -> Vec<Cell> {
        (0..self.rows * self.cols)
            .filter(|i| self.labels[*i].as_deref() == Some(label))
            .map(|i| (i / self.cols, i % self.cols))
            .collect()
    }

    /// Cell containing the metric point `(x, y)`, if inside the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<Cell> {
        let c = floor((x - self.origin.0) / self.resolution);
        let r = floor((y - self.origin.1) / self.resolution);
        if r < 0.0 || c < 0.0 {
            return None;
        }
        let cell = (r as usize, c as usize);
        self.contains(cell).then_some(cell)
    }
}

/// Bins points below `ceiling_z` into square cells of side `resolution`,
/// keeping the highest point per cell. Each cell takes the most frequent
/// point label, ties going to the lexicographically smallest.
pub fn build_top_view(cloud: &PointCloud, resolution: f64, ceiling_z: f64) -> Result<GridEnvironment, NavError> {
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(NavError::InvalidResolution(resolution));
    }
    let kept: Vec<&Point> = cloud.points().iter().filter(|p| p.z < ceiling_z).collect();
    if kept.is_empty() {
        return Err(NavError::EmptyScene);
    }
    let index = |v: f64| floor(v / resolution) as i64;
    let min_ix = kept.iter().map(|p| index(p.x)).min().unwrap_or(0);
    let min_iy = kept.iter().map(|p| index(p.y)).min().unwrap_or(0);
    let max_ix = kept.iter().map(|p| index(p.x)).max().unwrap_or(0);
    let max_iy = kept.iter().map(|p| index(p.y)).max().unwrap_or(0);
    let rows = (max_iy - min_iy + 1) as usize;
    let cols = (max_ix - min_ix + 1) as usize;
    let mut top_view: Vec<Option<f64>> = vec![None; rows * cols];
    let mut votes: BTreeMap<usize, BTreeMap<&str, usize>> = BTreeMap::new();
    for p in kept {
        let i = (index(p.y) - min_iy) as usize * cols + (index(p.x) - min_ix) as usize;
        top_view[i] = Some(top_view[i].map_or(p.z, |h| h.max(p.z)));
        if let Some(l) = &p.label {
            *votes.entry(i).or_default().entry(l.as_str()).or_default() += 1;
        }
    }
    let mut labels = vec![None; rows * cols];
    for (i, counts) in votes {
        let mut best: Option<(&str, usize)> = None;
        for (l, n) in counts {
            if best.map_or(true, |(_, m)| n > m) {
                best = Some((l, n));
            }
        }
        labels[i] = best.map(|(l, _)| String::from(l));
    }
    Ok(GridEnvironment {
        resolution,
        origin: (min_ix as f64 * resolution, min_iy as f64 * resolution),
        rows,
        cols,
        top_view,
        traversable: vec![false; rows * cols],
        labels,
    })
}

/// Marks cells whose height lies in `[h_min, h_max]` as traversable; empty
/// cells are obstacles.
pub fn build_traversability(env: &GridEnvironment, h_min: f64, h_max: f64) -> Result<GridEnvironment, NavError> {
    if !(h_min < h_max) {
        return Err(NavError::InvalidHeightRange { h_min, h_max });
    }
    let mut out = env.clone();
    out.traversable = env.top_view.iter().map(|h| h.is_some_and(|h| h >= h_min && h <= h_max)).collect();
    Ok(out)
}
