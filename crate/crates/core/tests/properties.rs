mod common;

use bounded_ibr::ibr::solve;
use bounded_ibr::simulation::{min_pairwise_distance, run_episode};
use common::{scenario, LineGame};

#[test]
fn estimator_error_shrinks_with_budget() {
    let game = LineGame::default();
    let errors: Vec<f64> = [100, 1_000, 10_000, 100_000]
        .iter()
        .map(|&k| game.mean_abs_error(k, 0..20))
        .collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}

#[test]
fn head_on_pair_converges_for_most_seeds() {
    let config = scenario("swap2.scenario");
    let s = config.build().unwrap();
    let converged = (0..20u64)
        .filter(|&seed| {
            solve(&s.world, &s.initial, &s.betas, &s.prior, &s.solver, seed, 0)
                .unwrap()
                .converged
        })
        .count();
    assert!(converged >= 18, "{converged}/20");
}

#[test]
fn symmetric_swap_spreads_travel_evenly() {
    let mut config = scenario("swap4.scenario");
    config.solver.samples_per_response = 5_000;
    let runs: Vec<_> = (0..10).map(|r| run_episode(&config, r).unwrap()).collect();
    let per_agent: Vec<f64> = (0..4)
        .map(|i| {
            runs.iter()
                .map(|r| r.metrics.travel_distance[i])
                .sum::<f64>()
                / 10.0
        })
        .collect();
    let max = per_agent.iter().cloned().fold(f64::MIN, f64::max);
    let min = per_agent.iter().cloned().fold(f64::MAX, f64::min);
    let mean = per_agent.iter().sum::<f64>() / 4.0;
    assert!(max - min < 0.25 * mean, "{per_agent:?}");
}

#[test]
fn episode_invariants_hold() {
    let mut config = scenario("swap4.scenario");
    config.solver.samples_per_response = 500;
    config.episode.timesteps = 30;
    let r = run_episode(&config, 3).unwrap();
    let limit = config.prior.a_max * config.episode.dt + 1e-9;
    for pair in r.trajectory.windows(2) {
        for (a, b) in pair[0].positions().zip(pair[1].positions()) {
            assert!((b - a).norm() <= limit);
        }
    }
    for i in 0..4 {
        let below = (1..=30)
            .filter(|&t| {
                min_pairwise_distance(&r.trajectory, i, t).unwrap() < config.reward.safety_radius
            })
            .count();
        assert_eq!(below, r.metrics.collision_steps[i]);
        assert!(r.metrics.travel_distance[i] >= 0.0);
    }
    assert_eq!(r.executed_actions.len(), 30);
    assert_eq!(r.diagnostics.len(), 30);
}
