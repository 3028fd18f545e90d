use std::collections::BinaryHeap;

use privfair_core::nav::{
    a_star, a_star_traced, build_top_view, build_traversability, candidate_paths, step_cost, Cell, Connectivity,
    GridEnvironment, Point, PointCloud,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_grid(seed: u64) -> GridEnvironment {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let rows = r.gen_range(3..20);
    let cols = r.gen_range(3..20);
    let density = r.gen_range(0.2..0.4);
    let mask = (0..rows * cols).map(|_| !r.gen_bool(density)).collect();
    GridEnvironment::from_mask(rows, cols, mask).unwrap()
}

/// Plain Dijkstra over the same move set, with no heuristic.
fn dijkstra(env: &GridEnvironment, from: Cell, conn: Connectivity) -> Vec<f64> {
    #[derive(PartialEq)]
    struct E(f64, Cell);
    impl Eq for E {}
    impl Ord for E {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            o.0.total_cmp(&self.0)
        }
    }
    impl PartialOrd for E {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    let cols = env.cols();
    let mut dist = vec![f64::INFINITY; env.rows() * cols];
    let mut heap = BinaryHeap::new();
    dist[from.0 * cols + from.1] = 0.0;
    heap.push(E(0.0, from));
    while let Some(E(d, c)) = heap.pop() {
        if d > dist[c.0 * cols + c.1] {
            continue;
        }
        for dr in -1isize..=1 {
            for dc in -1isize..=1 {
                if (dr, dc) == (0, 0) || (conn == Connectivity::Four && dr != 0 && dc != 0) {
                    continue;
                }
                let (Some(r), Some(cc)) = (c.0.checked_add_signed(dr), c.1.checked_add_signed(dc)) else { continue };
                if !env.is_traversable((r, cc)) {
                    continue;
                }
                if dr != 0 && dc != 0 && !(env.is_traversable((r, c.1)) && env.is_traversable((c.0, cc))) {
                    continue;
                }
                let nd = d + step_cost(c, (r, cc));
                if nd < dist[r * cols + cc] {
                    dist[r * cols + cc] = nd;
                    heap.push(E(nd, (r, cc)));
                }
            }
        }
    }
    dist
}

fn free_cells(env: &GridEnvironment) -> Vec<Cell> {
    (0..env.rows()).flat_map(|r| (0..env.cols()).map(move |c| (r, c))).filter(|c| env.is_traversable(*c)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn a_star_is_optimal_valid_and_admissible(seed in any::<u64>(), eight in any::<bool>()) {
        let env = random_grid(seed);
        let conn = if eight { Connectivity::Eight } else { Connectivity::Four };
        let free = free_cells(&env);
        prop_assume!(free.len() >= 2);
        let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let start = free[r.gen_range(0..free.len())];
        let goal = free[r.gen_range(0..free.len())];
        let from_start = dijkstra(&env, start, conn);
        let to_goal = dijkstra(&env, goal, conn);
        let oracle = from_start[goal.0 * env.cols() + goal.1];
        match a_star_traced(&env, start, goal, conn) {
            Ok((plan, expanded)) => {
                prop_assert!((plan.cost - oracle).abs() < 1e-9);
                let mut total = 0.0;
                for w in plan.cells.windows(2) {
                    prop_assert!(env.is_traversable(w[1]));
                    prop_assert!(w[0].0.abs_diff(w[1].0) <= 1 && w[0].1.abs_diff(w[1].1) <= 1 && w[0] != w[1]);
                    if conn == Connectivity::Four {
                        prop_assert!(w[0].0 == w[1].0 || w[0].1 == w[1].1);
                    }
                    total += step_cost(w[0], w[1]);
                }
                prop_assert!((total - plan.cost).abs() < 1e-9);
                for (cell, h) in expanded {
                    prop_assert!(h <= to_goal[cell.0 * env.cols() + cell.1] + 1e-9);
                }
            }
            Err(_) => prop_assert!(oracle.is_infinite()),
        }
    }
}

#[test]
fn symmetric_destinations_cost_the_same() {
    let (rows, cols) = (9, 11);
    let mut mask = vec![true; rows * cols];
    for r in 2..7 {
        mask[r * cols + 3] = false;
        mask[r * cols + 7] = false;
    }
    let env = GridEnvironment::from_mask(rows, cols, mask).unwrap();
    let dests = vec![("left".to_string(), (4, 1)), ("right".to_string(), (4, 9))];
    for conn in [Connectivity::Four, Connectivity::Eight] {
        let set = candidate_paths(&env, (8, 5), &dests, conn).unwrap();
        assert_eq!(set.paths.len(), 2);
        assert!((set.paths[0].1.cost - set.paths[1].1.cost).abs() < 1e-12);
        let oracle = dijkstra(&env, (8, 5), conn);
        assert!((set.paths[0].1.cost - oracle[4 * cols + 1]).abs() < 1e-9);
    }
}

#[test]
fn grid_building_is_deterministic() {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let points: Vec<Point> = (0..2000)
        .map(|_| Point::new(r.gen_range(0.0..3.0), r.gen_range(0.0..2.0), r.gen_range(0.0..3.0)))
        .collect();
    let cloud = PointCloud::new(points).unwrap();
    let a = build_traversability(&build_top_view(&cloud, 0.1, 2.5).unwrap(), 0.0, 0.3).unwrap();
    let b = build_traversability(&build_top_view(&cloud, 0.1, 2.5).unwrap(), 0.0, 0.3).unwrap();
    assert_eq!(a, b);
    for (h, t) in a.top_view().iter().zip(a.traversable()) {
        assert!(!t || h.is_some());
    }
    let plan = a_star(&a, (0, 0), (0, 0), Connectivity::Eight);
    assert!(plan.is_ok() || !a.is_traversable((0, 0)));
}
