//! Receding-horizon episodes and the metrics reported for them.
//!
//! At every timestep the solver plans an H-step profile from the current
//! joint state and only the first action of each plan is executed.

use crate::error::{Error, Result};
use crate::ibr::solve;
use crate::prior::run_seed;
use crate::scenario::{Scenario, ScenarioConfig};
use crate::world::{Action, JointState, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub final_metric: f64,
    pub kl: Vec<f64>,
    pub ess: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub travel_distance: Vec<f64>,
    /// `[agent][t]` for `t = 0..=T`; `None` with a single agent.
    pub min_pairwise_distance: Vec<Vec<Option<f64>>>,
    /// Steps `t = 1..=T` at which the agent was inside another's safety radius.
    pub collision_steps: Vec<usize>,
    pub goal_reached: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub run_index: usize,
    pub seed: u64,
    /// `T + 1` joint states.
    pub trajectory: Vec<JointState>,
    /// `T` joint actions.
    pub executed_actions: Vec<Vec<Action>>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub metrics: Metrics,
}

pub fn travel_distance(positions: &[Vec3]) -> f64 {
    positions.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Distance from `agent` to its nearest neighbour at state `t`, or `None`
/// when there is no other agent.
pub fn min_pairwise_distance(trajectory: &[JointState], agent: usize, t: usize) -> Option<f64> {
    let state = &trajectory[t];
    let p = state.position(agent);
    state
        .positions()
        .enumerate()
        .filter(|(j, _)| *j != agent)
        .map(|(_, q)| (p - q).norm())
        .min_by(f64::total_cmp)
}

pub fn compute_metrics(
    trajectory: &[JointState],
    goals: &[Vec3],
    safety_radius: f64,
    goal_threshold: f64,
) -> Metrics {
    let n = goals.len();
    let mut metrics = Metrics {
        travel_distance: Vec::with_capacity(n),
        min_pairwise_distance: Vec::with_capacity(n),
        collision_steps: Vec::with_capacity(n),
        goal_reached: Vec::with_capacity(n),
    };
    for (i, goal) in goals.iter().enumerate() {
        let path: Vec<Vec3> = trajectory.iter().map(|s| s.position(i)).collect();
        metrics.travel_distance.push(travel_distance(&path));
        let mins: Vec<Option<f64>> = (0..trajectory.len())
            .map(|t| min_pairwise_distance(trajectory, i, t))
            .collect();
        let collisions = mins
            .iter()
            .skip(1)
            .filter(|d| d.is_some_and(|d| d < safety_radius))
            .count();
        metrics.collision_steps.push(collisions);
        metrics.min_pairwise_distance.push(mins);
        let last = path.last().copied().unwrap_or(*goal);
        metrics
            .goal_reached
            .push((last - goal).norm() < goal_threshold);
    }
    metrics
}

pub fn run_episode(config: &ScenarioConfig, run_index: usize) -> Result<EpisodeResult> {
    let scenario = config.build()?;
    run_scenario(&scenario, run_index)
}

pub fn run_scenario(scenario: &Scenario, run_index: usize) -> Result<EpisodeResult> {
    let seed = run_seed(scenario.episode.base_seed, run_index);
    let steps = scenario.episode.timesteps;
    let n = scenario.initial.len();
    let mut trajectory = Vec::with_capacity(steps + 1);
    let mut executed_actions = Vec::with_capacity(steps);
    let mut diagnostics = Vec::with_capacity(steps);
    trajectory.push(scenario.initial.clone());

    for t in 0..steps {
        let state = &trajectory[t];
        let wrap = |source: Error| Error::Episode {
            timestep: t,
            source: Box::new(source),
        };
        let profile = solve(
            &scenario.world,
            state,
            &scenario.betas,
            &scenario.prior,
            &scenario.solver,
            seed,
            t,
        )
        .map_err(wrap)?;
        let actions: Vec<Action> = profile
            .plans
            .iter()
            .map(|p| p.first().copied().unwrap_or_default())
            .collect();
        let next = scenario.world.step(state, &actions).map_err(wrap)?;
        diagnostics.push(StepDiagnostics {
            iterations: profile.iteration,
            converged: profile.converged,
            final_metric: profile.final_metric().unwrap_or(0.0),
            kl: profile.diagnostics.iter().map(|d| d.kl).collect(),
            ess: profile.diagnostics.iter().map(|d| d.ess).collect(),
        });
        executed_actions.push(actions);
        trajectory.push(next);
    }
    debug_assert_eq!(trajectory[0].len(), n);

    let radius = scenario.world.reward.safety_radius;
    let metrics = compute_metrics(&trajectory, &scenario.world.goals, radius, radius);
    Ok(EpisodeResult {
        run_index,
        seed,
        trajectory,
        executed_actions,
        diagnostics,
        metrics,
    })
}

/// The per-run numbers aggregation works from.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub timesteps: usize,
    pub travel_distance: Vec<f64>,
    pub collision_steps: Vec<usize>,
    pub goal_reached: Vec<bool>,
}

impl From<&EpisodeResult> for RunMetrics {
    fn from(r: &EpisodeResult) -> Self {
        RunMetrics {
            timesteps: r.executed_actions.len(),
            travel_distance: r.metrics.travel_distance.clone(),
            collision_steps: r.metrics.collision_steps.clone(),
            goal_reached: r.metrics.goal_reached.clone(),
        }
    }
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        MeanStd {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentSummary {
    pub travel: MeanStd,
    /// Mean fraction of timesteps spent inside another agent's safety radius.
    pub collision_rate: f64,
    pub goal_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub runs: usize,
    pub agents: Vec<AgentSummary>,
    /// Run-wise mean over all agents.
    pub group_travel: MeanStd,
    /// Ego travel and run-wise mean travel of the other agents.
    pub ego_vs_others: Option<(MeanStd, MeanStd)>,
    /// Fraction of agent-timesteps outside every other agent's safety radius.
    pub safe_fraction: f64,
}

pub fn aggregate(results: &[EpisodeResult], ego: Option<usize>) -> Result<Summary> {
    let runs: Vec<RunMetrics> = results.iter().map(RunMetrics::from).collect();
    aggregate_metrics(&runs, ego)
}

pub fn aggregate_metrics(runs: &[RunMetrics], ego: Option<usize>) -> Result<Summary> {
    let first = runs.first().ok_or(Error::EmptySampleSet)?;
    let n = first.travel_distance.len();
    if let Some(bad) = runs.iter().find(|r| r.travel_distance.len() != n) {
        return Err(Error::DimensionMismatch {
            what: "agents per run",
            expected: n,
            got: bad.travel_distance.len(),
        });
    }
    if let Some(e) = ego {
        if e >= n {
            return Err(Error::InvalidAgent { index: e, count: n });
        }
    }
    let count = runs.len() as f64;
    let agents = (0..n)
        .map(|i| {
            let travel: Vec<f64> = runs.iter().map(|r| r.travel_distance[i]).collect();
            AgentSummary {
                travel: MeanStd::of(&travel),
                collision_rate: runs
                    .iter()
                    .map(|r| r.collision_steps[i] as f64 / r.timesteps.max(1) as f64)
                    .sum::<f64>()
                    / count,
                goal_rate: runs.iter().filter(|r| r.goal_reached[i]).count() as f64 / count,
            }
        })
        .collect();
    let group: Vec<f64> = runs
        .iter()
        .map(|r| r.travel_distance.iter().sum::<f64>() / n as f64)
        .collect();
    let ego_vs_others = ego.filter(|_| n > 1).map(|e| {
        let ego_travel: Vec<f64> = runs.iter().map(|r| r.travel_distance[e]).collect();
        let others: Vec<f64> = runs
            .iter()
            .map(|r| {
                r.travel_distance
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != e)
                    .map(|(_, d)| d)
                    .sum::<f64>()
                    / (n - 1) as f64
            })
            .collect();
        (MeanStd::of(&ego_travel), MeanStd::of(&others))
    });
    let agent_steps: usize = runs.iter().map(|r| r.timesteps * n).sum();
    let unsafe_steps: usize = runs.iter().flat_map(|r| r.collision_steps.iter()).sum();
    let safe_fraction = if agent_steps == 0 {
        1.0
    } else {
        1.0 - unsafe_steps as f64 / agent_steps as f64
    };
    Ok(Summary {
        runs: runs.len(),
        agents,
        group_travel: MeanStd::of(&group),
        ego_vs_others,
        safe_fraction,
    })
}
