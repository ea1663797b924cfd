use std::collections::VecDeque;

use molsrl_core::ccs::{prune, PartialCcs, WeightVector};
use molsrl_core::dol::{run_dol, DolConfig, ReuseMode};
use molsrl_core::momdp::{DeepSeaConfig, DeepSeaMap, DEEP_SEA_MAP};
use molsrl_core::planner::{
    exact_ccs, policy_eval_vector, scalarised_value_iteration, ExactSolver, VALUE_ITERATION_TOL,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Shortest path to every treasure by BFS over the grid (treasures end the
/// episode, so paths never pass through one), then the discounted return
/// of walking that path.
fn brute_force(map_text: &str, treasures: &str, gamma: f64, horizon: usize) -> Vec<[f64; 2]> {
    let grid: Vec<Vec<char>> = map_text
        .lines()
        .map(|l| l.trim().chars().collect())
        .collect();
    let values: Vec<f64> = treasures
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').nth(1).unwrap().trim().parse().unwrap())
        .collect();
    let v_max = values.iter().cloned().fold(f64::MIN, f64::max);
    let (rows, cols) = (grid.len() as i64, grid[0].len() as i64);
    let mut dist = vec![vec![usize::MAX; cols as usize]; rows as usize];
    dist[0][0] = 0;
    let mut queue = VecDeque::from([(0i64, 0i64)]);
    while let Some((r, c)) = queue.pop_front() {
        if grid[r as usize][c as usize] == 'T' {
            continue;
        }
        for (dr, dc) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            let (nr, nc) = (r + dr, c + dc);
            if nr < 0 || nc < 0 || nr >= rows || nc >= cols || grid[nr as usize][nc as usize] == '#'
            {
                continue;
            }
            if dist[nr as usize][nc as usize] == usize::MAX {
                dist[nr as usize][nc as usize] = dist[r as usize][c as usize] + 1;
                queue.push_back((nr, nc));
            }
        }
    }
    let mut out = Vec::new();
    for c in 0..cols as usize {
        for r in 0..rows as usize {
            if grid[r][c] == 'T' {
                let d = dist[r][c];
                let treasure = gamma.powi(d as i32 - 1) * values[c] / v_max;
                let time: f64 = (0..d.min(horizon))
                    .map(|t| -gamma.powi(t as i32) / horizon as f64)
                    .sum();
                out.push([treasure, time]);
            }
        }
    }
    out
}

fn components(s: &PartialCcs) -> Vec<Vec<f64>> {
    s.iter().map(|v| v.components().to_vec()).collect()
}

#[test]
fn deep_sea_ccs_matches_shortest_paths() {
    let config = DeepSeaConfig::default();
    let model = config.explicit_model().unwrap();
    let ccs = exact_ccs(&model).unwrap();
    let mut oracle = brute_force(
        DEEP_SEA_MAP,
        molsrl_core::momdp::DEEP_SEA_TREASURES,
        0.97,
        200,
    );
    oracle.sort_by(|a, b| a[0].total_cmp(&b[0]));
    assert_eq!(ccs.len(), 10);
    for (got, want) in components(&ccs).iter().zip(&oracle) {
        assert!(
            (got[0] - want[0]).abs() <= 1e-9 && (got[1] - want[1]).abs() <= 1e-9,
            "{got:?} vs {want:?}"
        );
    }
}

#[test]
fn exact_ols_call_bound_and_stability() {
    let model = DeepSeaConfig::default().explicit_model().unwrap();
    let mut solver = ExactSolver::new(model);
    let config = DolConfig {
        tau: 0.0,
        max_iterations: 1000,
        reuse: ReuseMode::None,
    };
    let out = run_dol(&mut solver, &config, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!(out.queue_exhausted);
    assert!(
        solver.calls() <= 2 * out.ccs.len() + 1,
        "{} calls",
        solver.calls()
    );
    let again = prune(out.ccs.vectors().to_vec()).unwrap();
    assert_eq!(components(&again), components(&out.ccs));
}

#[test]
fn value_iteration_reaches_nearest_and_richest_treasure() {
    let config = DeepSeaConfig::default();
    let model = config.explicit_model().unwrap();
    let time_only =
        scalarised_value_iteration(&model, &WeightVector::two(0.0), VALUE_ITERATION_TOL).unwrap();
    assert_eq!(
        policy_eval_vector(&model, &time_only).unwrap().components(),
        &[0.1, -0.005]
    );
    let treasure_only =
        scalarised_value_iteration(&model, &WeightVector::two(1.0), VALUE_ITERATION_TOL).unwrap();
    let v = policy_eval_vector(&model, &treasure_only).unwrap();
    let oracle = brute_force(
        DEEP_SEA_MAP,
        molsrl_core::momdp::DEEP_SEA_TREASURES,
        0.97,
        200,
    );
    let best = oracle.iter().map(|o| o[0]).fold(f64::MIN, f64::max);
    assert!((v.components()[0] - best).abs() <= 1e-12);
}

#[test]
fn single_treasure_variant_has_one_vector() {
    let map = "..\nT.\n";
    let treasures = "column,value\n0,5\n";
    let config = DeepSeaConfig {
        map: DeepSeaMap::parse(map, treasures).unwrap(),
        ..DeepSeaConfig::default()
    };
    let ccs = exact_ccs(&config.explicit_model().unwrap()).unwrap();
    assert_eq!(ccs.len(), 1);
    assert_eq!(ccs.vectors()[0].components(), &[1.0, -0.005]);
}
