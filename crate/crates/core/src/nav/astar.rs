use alloc::collections::BinaryHeap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::SQRT_2;

use super::{Cell, GridEnvironment, NavError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

/// A route on the grid; `cost` is the sum of step weights (1 orthogonal,
/// `√2` diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct PathPlan {
    pub cells: Vec<Cell>,
    pub cost: f64,
}

/// Weight of a step between two adjacent cells.
pub fn step_cost(a: Cell, b: Cell) -> f64 {
    if a.0 != b.0 && a.1 != b.1 {
        SQRT_2
    } else {
        1.0
    }
}

/// Manhattan distance for four-connectivity, octile for eight.
pub fn heuristic(a: Cell, b: Cell, conn: Connectivity) -> f64 {
    let dr = a.0.abs_diff(b.0) as f64;
    let dc = a.1.abs_diff(b.1) as f64;
    match conn {
        Connectivity::Four => dr + dc,
        Connectivity::Eight => {
            let (lo, hi) = if dr < dc { (dr, dc) } else { (dc, dr) };
            (hi - lo) + SQRT_2 * lo
        }
    }
}

const ORTHOGONAL: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
const DIAGONAL: [(isize, isize); 4] = [(-1, -1), (-1, 1), (1, -1), (1, 1)];

/// Traversable neighbours of `cell`. Diagonal moves need both orthogonal
/// cells they pass between to be free.
pub(crate) fn neighbours(env: &GridEnvironment, cell: Cell, conn: Connectivity, out: &mut Vec<Cell>) {
    out.clear();
    let shift = |(dr, dc): (isize, isize)| -> Option<Cell> {
        let r = cell.0.checked_add_signed(dr)?;
        let c = cell.1.checked_add_signed(dc)?;
        env.is_traversable((r, c)).then_some((r, c))
    };
    for d in ORTHOGONAL {
        if let Some(n) = shift(d) {
            out.push(n);
        }
    }
    if conn == Connectivity::Eight {
        for (dr, dc) in DIAGONAL {
            if shift((dr, 0)).is_some() && shift((0, dc)).is_some() {
                if let Some(n) = shift((dr, dc)) {
                    out.push(n);
                }
            }
        }
    }
}

#[derive(PartialEq)]
struct Entry {
    f: f64,
    g: f64,
    cell: Cell,
}

impl Eq for Entry {}

impl Ord for Entry {
    // reversed so the max-heap pops the smallest f, then the smallest (row, col)
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn check_endpoint(env: &GridEnvironment, cell: Cell) -> Result<(), NavError> {
    if !env.contains(cell) {
        return Err(NavError::OutOfBounds { cell });
    }
    if !env.is_traversable(cell) {
        return Err(NavError::InvalidEndpoint { cell });
    }
    Ok(())
}

/// Minimum-cost path from `start` to `goal`.
pub fn a_star(env: &GridEnvironment, start: Cell, goal: Cell, conn: Connectivity) -> Result<PathPlan, NavError> {
    a_star_traced(env, start, goal, conn).map(|(plan, _)| plan)
}

/// [`a_star`] that also returns every expanded cell with its heuristic
/// value, in expansion order.
pub fn a_star_traced(
    env: &GridEnvironment,
    start: Cell,
    goal: Cell,
    conn: Connectivity,
) -> Result<(PathPlan, Vec<(Cell, f64)>), NavError> {
    check_endpoint(env, start)?;
    check_endpoint(env, goal)?;
    let cols = env.cols();
    let idx = |c: Cell| c.0 * cols + c.1;
    let n = env.rows() * cols;
    let mut best = vec![f64::INFINITY; n];
    let mut parent: Vec<Option<Cell>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut expanded = Vec::new();
    let mut adj = Vec::with_capacity(8);

    best[idx(start)] = 0.0;
    heap.push(Entry { f: heuristic(start, goal, conn), g: 0.0, cell: start });
    while let Some(Entry { g, cell, .. }) = heap.pop() {
        let i = idx(cell);
        if closed[i] || g > best[i] {
            continue;
        }
        closed[i] = true;
        expanded.push((cell, heuristic(cell, goal, conn)));
        if cell == goal {
            let mut cells = vec![goal];
            let mut cur = goal;
            while let Some(p) = parent[idx(cur)] {
                cells.push(p);
                cur = p;
            }
            cells.reverse();
            return Ok((PathPlan { cells, cost: g }, expanded));
        }
        neighbours(env, cell, conn, &mut adj);
        for &next in &adj {
            let j = idx(next);
            if closed[j] {
                continue;
            }
            let cand = g + step_cost(cell, next);
            if cand < best[j] {
                best[j] = cand;
                parent[j] = Some(cell);
                heap.push(Entry { f: cand + heuristic(next, goal, conn), g: cand, cell: next });
            }
        }
    }
    Err(NavError::NoPath { start, goal })
}

/// Routes from one start to several named destinations.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub paths: Vec<(String, PathPlan)>,
    /// Destinations that are blocked, outside the grid or disconnected.
    pub unreachable: Vec<String>,
}

/// One A* route per reachable destination. Fails only when the start is
/// invalid or nothing is reachable.
pub fn candidate_paths(
    env: &GridEnvironment,
    start: Cell,
    destinations: &[(String, Cell)],
    conn: Connectivity,
) -> Result<CandidateSet, NavError> {
    check_endpoint(env, start)?;
    let mut set = CandidateSet { paths: Vec::new(), unreachable: Vec::new() };
    for (id, goal) in destinations {
        match a_star(env, start, *goal, conn) {
            Ok(plan) => set.paths.push((id.clone(), plan)),
            Err(NavError::NoPath { .. } | NavError::InvalidEndpoint { .. } | NavError::OutOfBounds { .. }) => {
                set.unreachable.push(id.clone())
            }
            Err(e) => return Err(e),
        }
    }
    if set.paths.is_empty() {
        return Err(NavError::NoCandidates);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open(rows: usize, cols: usize) -> GridEnvironment {
        GridEnvironment::from_mask(rows, cols, vec![true; rows * cols]).unwrap()
    }

    #[test]
    fn open_grid_costs() {
        let env = open(3, 3);
        let p = a_star(&env, (0, 0), (2, 2), Connectivity::Four).unwrap();
        assert_eq!(p.cost, 4.0);
        assert_eq!(p.cells.len(), 5);
        let p = a_star(&env, (0, 0), (2, 2), Connectivity::Eight).unwrap();
        assert!((p.cost - 2.0 * SQRT_2).abs() < 1e-12);
        assert_eq!(p.cells, vec![(0, 0), (1, 1), (2, 2)]);
        let p = a_star(&env, (1, 1), (1, 1), Connectivity::Eight).unwrap();
        assert_eq!((p.cells.len(), p.cost), (1, 0.0));
    }

    #[test]
    fn endpoint_errors() {
        let mut mask = vec![true; 9];
        mask[4] = false;
        let env = GridEnvironment::from_mask(3, 3, mask).unwrap();
        assert_eq!(a_star(&env, (1, 1), (0, 0), Connectivity::Four), Err(NavError::InvalidEndpoint { cell: (1, 1) }));
        assert_eq!(a_star(&env, (0, 0), (5, 0), Connectivity::Four), Err(NavError::OutOfBounds { cell: (5, 0) }));
        let walled = GridEnvironment::from_mask(1, 3, vec![true, false, true]).unwrap();
        assert!(matches!(a_star(&walled, (0, 0), (0, 2), Connectivity::Eight), Err(NavError::NoPath { .. })));
    }

    #[test]
    fn no_corner_cutting() {
        // free: (0,0) and (1,1); the two cells between them are blocked
        let env = GridEnvironment::from_mask(2, 2, vec![true, false, false, true]).unwrap();
        assert!(a_star(&env, (0, 0), (1, 1), Connectivity::Eight).is_err());
    }

    #[test]
    fn tie_break_is_reproducible() {
        let env = open(4, 4);
        let a = a_star(&env, (0, 0), (3, 3), Connectivity::Four).unwrap();
        let b = a_star(&env, (0, 0), (3, 3), Connectivity::Four).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cost, 6.0);
    }

    #[test]
    fn candidates_report_unreachable() {
        let mut mask = vec![true; 15];
        // wall off column 3 of a 3×5 grid
        for r in 0..3 {
            mask[r * 5 + 3] = false;
        }
        let env = GridEnvironment::from_mask(3, 5, mask).unwrap();
        let dests = vec![("near".into(), (0, 0)), ("far".into(), (1, 4)), ("sym".into(), (2, 0))];
        let set = candidate_paths(&env, (1, 0), &dests, Connectivity::Eight).unwrap();
        assert_eq!(set.paths.len(), 2);
        assert_eq!(set.unreachable, vec![String::from("far")]);
        assert_eq!(set.paths[0].1.cost, set.paths[1].1.cost);
        let only_far = vec![("far".into(), (1, 4))];
        assert_eq!(candidate_paths(&env, (1, 0), &only_far, Connectivity::Four), Err(NavError::NoCandidates));
    }
}
