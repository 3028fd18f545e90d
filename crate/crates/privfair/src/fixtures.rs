//! Synthetic scenes with known ground truth.

use privfair_core::nav::{Cell, GridEnvironment, Point, PointCloud};

pub const CORRIDOR_SIZE: usize = 20;
pub const CORRIDOR_RESOLUTION: f64 = 0.1;
pub const CORRIDOR_CEILING: f64 = 2.3;
pub const CORRIDOR_HEIGHT_RANGE: (f64, f64) = (0.0, 0.3);
pub const CORRIDOR_START: Cell = (18, 10);
pub const CORRIDOR_OFFICES: [(&str, Cell); 2] = [("HR1", (4, 3)), ("HR2", (4, 17))];

const FLOOR_Z: f64 = 0.02;
const WALL_Z: [f64; 2] = [1.0, 2.0];
const CEILING_Z: f64 = 2.6;

/// Room a free cell belongs to, or `None` for walls. The layout is mirror
/// symmetric about column 10, so both offices are equally far from the start.
fn room((r, c): Cell) -> Option<&'static str> {
    let within = |lo: usize, hi: usize, v: usize| (lo..=hi).contains(&v);
    if within(2, 6, r) && within(2, 6, c) {
        Some("HR1")
    } else if within(2, 6, r) && within(14, 18, c) {
        Some("HR2")
    } else if (r == 7 && (c == 4 || c == 16))
        || (within(8, 10, r) && within(2, 18, c))
        || (within(11, 14, r) && within(9, 11, c))
        || (within(15, 18, r) && within(7, 13, c))
    {
        Some("corridor")
    } else {
        None
    }
}

/// A 20×20 two-office corridor scene at 0.1 m resolution. Free cells get one
/// floor point, walls get a low and a high point, and every cell gets a
/// ceiling point to be filtered out. Returns the cloud and the expected
/// traversability mask.
pub fn corridor() -> (PointCloud, GridEnvironment) {
    let n = CORRIDOR_SIZE;
    let mut points = Vec::new();
    let mut mask = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let (x, y) = ((c as f64 + 0.5) * CORRIDOR_RESOLUTION, (r as f64 + 0.5) * CORRIDOR_RESOLUTION);
            match room((r, c)) {
                Some(label) => points.push(Point::labelled(x, y, FLOOR_Z, label)),
                None => points.extend(WALL_Z.iter().map(|&z| Point::labelled(x, y, z, "wall"))),
            }
            points.push(Point::new(x, y, CEILING_Z));
            mask.push(room((r, c)).is_some());
        }
    }
    let cloud = PointCloud::new(points).expect("generated points are finite");
    let env = GridEnvironment::from_mask(n, n, mask).expect("mask has the grid's shape");
    (cloud, env)
}
