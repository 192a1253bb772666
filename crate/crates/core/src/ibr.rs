//! Iterated best response over bounded-rational agents.
//!
//! Starting from zero-velocity plans, agents are swept in ascending index
//! order and each plan is replaced by the agent's importance-sampled best
//! response to the current plans of everyone else. Sweeps stop once the
//! profile moves less than the tolerance, or after `max_iterations`.
//!
//! Each agent draws one proposal batch per planning step and reuses it in
//! every sweep, which makes the best-response map deterministic within a
//! call and lets the iteration settle on an exact fixed point.

use crate::error::{Error, Result};
use crate::prior::{stream_id, SampleBatch, SeededGenerator, UniformPrior};
use crate::sampler::{best_response_on_batch, RationalityLevel};
use crate::world::{ActionSequence, JointState, World};
use serde::{Deserialize, Serialize};

/// Above this many cached actions the proposal batches are regenerated for
/// each sweep instead of being held in memory. Both paths give identical
/// draws.
const BATCH_CACHE_LIMIT: usize = 1 << 23;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Threshold on [`convergence_metric`], m/s.
    pub convergence_tolerance: f64,
    pub samples_per_response: usize,
    pub deterministic: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 10,
            convergence_tolerance: 1e-3,
            samples_per_response: 20_000,
            deterministic: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("solver.max_iterations", "must be >= 1"));
        }
        if self.samples_per_response == 0 {
            return Err(Error::invalid(
                "solver.samples_per_response",
                "must be >= 1",
            ));
        }
        if !(self.convergence_tolerance.is_finite() && self.convergence_tolerance > 0.0) {
            return Err(Error::invalid(
                "solver.convergence_tolerance",
                format!("must be > 0, got {}", self.convergence_tolerance),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct AgentDiagnostics {
    pub kl: f64,
    pub ess: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyProfile {
    pub plans: Vec<ActionSequence>,
    /// Number of completed sweeps.
    pub iteration: usize,
    pub converged: bool,
    /// Diagnostics of each agent's most recent best response.
    pub diagnostics: Vec<AgentDiagnostics>,
    /// Convergence metric after each sweep.
    pub metric_history: Vec<f64>,
}

impl StrategyProfile {
    pub fn initial(agents: usize, horizon: usize) -> Self {
        StrategyProfile {
            plans: vec![ActionSequence::zeros(horizon); agents],
            iteration: 0,
            converged: false,
            diagnostics: vec![AgentDiagnostics::default(); agents],
            metric_history: Vec::new(),
        }
    }

    pub fn final_metric(&self) -> Option<f64> {
        self.metric_history.last().copied()
    }
}

/// Largest, over agents, of the mean per-step distance between two plans.
pub fn plan_distance(previous: &[ActionSequence], current: &[ActionSequence]) -> Result<f64> {
    if previous.len() != current.len() {
        return Err(Error::DimensionMismatch {
            what: "plans",
            expected: previous.len(),
            got: current.len(),
        });
    }
    let mut worst = 0.0f64;
    for (a, b) in previous.iter().zip(current) {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                what: "plan steps",
                expected: a.len(),
                got: b.len(),
            });
        }
        if a.is_empty() {
            continue;
        }
        let total: f64 = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x.velocity - y.velocity).norm())
            .sum();
        worst = worst.max(total / a.len() as f64);
    }
    Ok(worst)
}

pub fn convergence_metric(previous: &StrategyProfile, current: &StrategyProfile) -> Result<f64> {
    plan_distance(&previous.plans, &current.plans)
}

/// Proposal batches for one planning step, cached or regenerated on demand.
struct Proposals<'a> {
    prior: &'a UniformPrior,
    samples: usize,
    seed: u64,
    streams: &'a [u64],
    cache: Vec<Option<SampleBatch>>,
    keep: bool,
}

impl Proposals<'_> {
    fn with_batch<T>(&mut self, agent: usize, f: impl FnOnce(&SampleBatch) -> T) -> Result<T> {
        if let Some(batch) = &self.cache[agent] {
            return Ok(f(batch));
        }
        let mut gen = SeededGenerator::new(self.seed, self.streams[agent]);
        let batch = self.prior.sample_batch_flat(&mut gen, self.samples)?;
        let out = f(&batch);
        if self.keep {
            self.cache[agent] = Some(batch);
        }
        Ok(out)
    }
}

/// Solves for the bounded-rational equilibrium profile at `joint_state`.
///
/// Agent `i` draws its proposals from stream `stream_id(planning_step, i)`
/// of `seed`.
pub fn solve(
    world: &World,
    joint_state: &JointState,
    betas: &[RationalityLevel],
    prior: &UniformPrior,
    config: &SolverConfig,
    seed: u64,
    planning_step: usize,
) -> Result<StrategyProfile> {
    let streams: Vec<u64> = (0..joint_state.len())
        .map(|i| stream_id(planning_step, i))
        .collect();
    solve_with_streams(world, joint_state, betas, prior, config, seed, &streams)
}

/// [`solve`] with an explicit proposal stream per agent.
pub fn solve_with_streams(
    world: &World,
    joint_state: &JointState,
    betas: &[RationalityLevel],
    prior: &UniformPrior,
    config: &SolverConfig,
    seed: u64,
    streams: &[u64],
) -> Result<StrategyProfile> {
    solve_inner(
        world,
        joint_state,
        betas,
        prior,
        config,
        seed,
        streams,
        BATCH_CACHE_LIMIT,
    )
}

#[allow(clippy::too_many_arguments)]
fn solve_inner(
    world: &World,
    joint_state: &JointState,
    betas: &[RationalityLevel],
    prior: &UniformPrior,
    config: &SolverConfig,
    seed: u64,
    streams: &[u64],
    cache_limit: usize,
) -> Result<StrategyProfile> {
    config.validate()?;
    let n = joint_state.len();
    for (what, got) in [
        ("betas", betas.len()),
        ("goals", world.agent_count()),
        ("streams", streams.len()),
    ] {
        if got != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                got,
            });
        }
    }

    let horizon = prior.horizon();
    let mut profile = StrategyProfile::initial(n, horizon);
    let mut proposals = Proposals {
        prior,
        samples: config.samples_per_response,
        seed,
        streams,
        cache: vec![None; n],
        keep: n * config.samples_per_response * horizon <= cache_limit,
    };

    for iteration in 1..=config.max_iterations {
        let previous = profile.plans.clone();
        for (agent, &beta) in betas.iter().enumerate() {
            let response = proposals
                .with_batch(agent, |batch| {
                    best_response_on_batch(
                        world,
                        agent,
                        joint_state,
                        &profile.plans,
                        batch,
                        beta,
                        config.deterministic,
                    )
                })
                .and_then(|r| r)
                .map_err(|source| Error::Solver {
                    agent,
                    iteration,
                    source: Box::new(source),
                })?;
            profile.plans[agent] = response.plan;
            profile.diagnostics[agent] = AgentDiagnostics {
                kl: response.kl,
                ess: response.ess,
            };
        }
        let metric = plan_distance(&previous, &profile.plans)?;
        profile.metric_history.push(metric);
        profile.iteration = iteration;
        if metric < config.convergence_tolerance {
            profile.converged = true;
            break;
        }
    }
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::SeededGenerator;
    use crate::sampler::best_response;
    use crate::world::{Action, RewardParams, SpeedLimits, Vec3};

    fn beta(b: f64) -> RationalityLevel {
        RationalityLevel::new(b).unwrap()
    }

    fn world(goals: Vec<Vec3>) -> World {
        World::new(
            goals,
            vec![],
            RewardParams {
                goal_weight: 30.0,
                ..RewardParams::default()
            },
            SpeedLimits::default(),
            0.1,
        )
        .unwrap()
    }

    fn shifted(plan: &ActionSequence, by: Vec3) -> ActionSequence {
        ActionSequence::new(plan.iter().map(|a| Action::new(a.velocity + by)).collect())
    }

    #[test]
    fn metric_examples() {
        let plan = ActionSequence::from_velocities([
            Vec3::new(0.1, 0.2, 0.0),
            Vec3::new(-0.3, 0.0, 0.5),
            Vec3::new(0.0, 0.0, 0.0),
        ]);
        let a = vec![plan.clone(), plan.clone()];
        assert_eq!(plan_distance(&a, &a).unwrap(), 0.0);
        let b = vec![plan.clone(), shifted(&plan, Vec3::new(0.1, 0.0, 0.0))];
        assert!((plan_distance(&a, &b).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(
            plan_distance(&a, &b).unwrap(),
            plan_distance(&b, &a).unwrap()
        );
    }

    #[test]
    fn metric_shape_mismatch() {
        let a = vec![ActionSequence::zeros(3)];
        let b = vec![ActionSequence::zeros(3), ActionSequence::zeros(3)];
        assert!(plan_distance(&a, &b).is_err());
        assert!(plan_distance(&a, &[ActionSequence::zeros(2)]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::default();
        assert_eq!(c.max_iterations, 10);
        c.validate().unwrap();
        c.max_iterations = 0;
        assert!(c.validate().is_err());
        let c = SolverConfig {
            convergence_tolerance: 0.0,
            ..SolverConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_agent_is_one_best_response() {
        let w = world(vec![Vec3::new(2.0, 0.0, 0.0)]);
        let s = JointState::from_positions([Vec3::zeros()]).unwrap();
        let prior = UniformPrior::new(SpeedLimits::default(), 6).unwrap();
        let config = SolverConfig {
            samples_per_response: 2000,
            ..SolverConfig::default()
        };
        let profile = solve(&w, &s, &[beta(0.1)], &prior, &config, 5, 3).unwrap();
        let mut gen = SeededGenerator::new(5, stream_id(3, 0));
        let single = best_response(
            &w,
            0,
            &s,
            &[ActionSequence::zeros(6)],
            &prior,
            beta(0.1),
            2000,
            &mut gen,
        )
        .unwrap();
        assert_eq!(profile.plans[0], single.plan);
        assert_eq!(profile.iteration, 2);
        assert_eq!(profile.metric_history[1], 0.0);
        assert!(profile.converged);
    }

    #[test]
    fn zero_beta_converges_after_one_sweep() {
        let goals = vec![
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::zeros(),
        ];
        let w = world(goals);
        let s = JointState::from_positions([
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ])
        .unwrap();
        let prior = UniformPrior::new(SpeedLimits::default(), 5).unwrap();
        let config = SolverConfig {
            samples_per_response: 500,
            ..SolverConfig::default()
        };
        let profile = solve(&w, &s, &[beta(0.0); 3], &prior, &config, 1, 0).unwrap();
        assert_eq!(profile.iteration, 2);
        assert_eq!(profile.metric_history[1], 0.0);
    }

    #[test]
    fn mismatched_betas_rejected() {
        let w = world(vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0)]);
        let s = JointState::from_positions([Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0)]).unwrap();
        let prior = UniformPrior::new(SpeedLimits::default(), 3).unwrap();
        let err = solve(&w, &s, &[beta(0.1)], &prior, &SolverConfig::default(), 0, 0).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn failure_reports_agent_and_iteration() {
        // An enormous goal weight overflows β·U to infinity for agent 1.
        let mut w = world(vec![Vec3::zeros(), Vec3::new(1e300, 0.0, 0.0)]);
        w.reward.goal_weight = 1e10;
        let s = JointState::from_positions([Vec3::zeros(), Vec3::new(3.0, 0.0, 0.0)]).unwrap();
        let prior = UniformPrior::new(SpeedLimits::default(), 3).unwrap();
        let config = SolverConfig {
            samples_per_response: 10,
            ..SolverConfig::default()
        };
        let err = solve(&w, &s, &[beta(0.1); 2], &prior, &config, 0, 0).unwrap_err();
        match err {
            Error::Solver {
                agent, iteration, ..
            } => {
                assert_eq!(agent, 1);
                assert_eq!(iteration, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cached_and_regenerated_batches_agree() {
        let w = world(vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0)]);
        let s = JointState::from_positions([Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)])
            .unwrap();
        let prior = UniformPrior::new(SpeedLimits::default(), 4).unwrap();
        let streams = [stream_id(0, 0), stream_id(0, 1)];
        let config = SolverConfig {
            samples_per_response: 300,
            ..SolverConfig::default()
        };
        let cached = solve_inner(
            &w,
            &s,
            &[beta(0.2); 2],
            &prior,
            &config,
            9,
            &streams,
            usize::MAX,
        )
        .unwrap();
        let regenerated =
            solve_inner(&w, &s, &[beta(0.2); 2], &prior, &config, 9, &streams, 0).unwrap();
        assert_eq!(cached, regenerated);
    }

    #[test]
    fn far_apart_agents_are_permutation_equivariant() {
        let starts = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(50.0, 0.0, 0.0),
            Vec3::new(0.0, 50.0, 0.0),
        ];
        let goals = [
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(50.0, 1.0, 0.0),
            Vec3::new(0.0, 50.0, 1.0),
        ];
        let betas = [beta(0.05), beta(0.1), beta(0.2)];
        let streams = [11u64, 22, 33];
        let perm = [2usize, 0, 1];
        let prior = UniformPrior::new(SpeedLimits::default(), 4).unwrap();
        let config = SolverConfig {
            samples_per_response: 400,
            ..SolverConfig::default()
        };
        let solve_in = |order: &[usize]| {
            let w = world(order.iter().map(|&i| goals[i]).collect());
            let s = JointState::from_positions(order.iter().map(|&i| starts[i])).unwrap();
            let b: Vec<_> = order.iter().map(|&i| betas[i]).collect();
            let st: Vec<_> = order.iter().map(|&i| streams[i]).collect();
            solve_with_streams(&w, &s, &b, &prior, &config, 4, &st).unwrap()
        };
        let base = solve_in(&[0, 1, 2]);
        let permuted = solve_in(&perm);
        for (slot, &i) in perm.iter().enumerate() {
            assert_eq!(permuted.plans[slot], base.plans[i]);
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let w = world(vec![Vec3::new(1.5, 0.0, 0.0), Vec3::new(-1.5, 0.0, 0.0)]);
        let s = JointState::from_positions([Vec3::new(-1.5, 0.0, 0.0), Vec3::new(1.5, 0.0, 0.0)])
            .unwrap();
        let prior = UniformPrior::new(SpeedLimits::default(), 8).unwrap();
        let config = SolverConfig {
            samples_per_response: 3000,
            ..SolverConfig::default()
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| solve(&w, &s, &[beta(0.1); 2], &prior, &config, 77, 2).unwrap())
        };
        assert_eq!(run(1), run(8));
    }
}
