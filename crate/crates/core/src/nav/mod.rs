//! Desk-scale navigation: point clouds to top-view and traversability grids,
//! and A* candidate routes to labelled destinations.

mod astar;
mod grid;

pub use astar::{a_star, a_star_traced, candidate_paths, heuristic, step_cost, CandidateSet, Connectivity, PathPlan};
pub use grid::{build_top_view, build_traversability, GridEnvironment, Point, PointCloud};

use core::fmt;

/// `(row, col)` grid coordinates.
pub type Cell = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub enum NavError {
    EmptyCloud,
    NonFinitePoint { index: usize },
    InvalidResolution(f64),
    /// Every point was at or above the ceiling.
    EmptyScene,
    InvalidHeightRange { h_min: f64, h_max: f64 },
    ShapeMismatch { expected: usize, found: usize },
    OutOfBounds { cell: Cell },
    InvalidEndpoint { cell: Cell },
    NoPath { start: Cell, goal: Cell },
    NoCandidates,
}

impl fmt::Display for NavError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NavError::EmptyCloud => write!(f, "point cloud is empty"),
            NavError::NonFinitePoint { index } => write!(f, "point {index} has a non-finite coordinate"),
            NavError::InvalidResolution(r) => write!(f, "resolution must be positive, got {r}"),
            NavError::EmptyScene => write!(f, "no points remain below the ceiling"),
            NavError::InvalidHeightRange { h_min, h_max } => {
                write!(f, "height range [{h_min}, {h_max}] is empty")
            }
            NavError::ShapeMismatch { expected, found } => {
                write!(f, "grid has {found} cells, expected {expected}")
            }
            NavError::OutOfBounds { cell } => write!(f, "cell {cell:?} is outside the grid"),
            NavError::InvalidEndpoint { cell } => write!(f, "cell {cell:?} is not traversable"),
            NavError::NoPath { start, goal } => write!(f, "no path from {start:?} to {goal:?}"),
            NavError::NoCandidates => write!(f, "no destination is reachable"),
        }
    }
}

impl core::error::Error for NavError {}
