//! Deterministic multi-agent dynamics, per-step reward and horizon utility.
//!
//! Every agent is a single integrator: its position integrates the commanded
//! velocity over one timestep. Agents interact only through the reward, which
//! penalises distance to the goal, proximity to other agents and overlap with
//! inflated box obstacles.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Half of the agent's cubic footprint (0.125 m per side).
pub const AGENT_HALF_SIZE: f64 = 0.0625;

/// Slack allowed on the speed bounds for floating-point round-off.
const SPEED_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgentState {
    pub position: Vec3,
}

impl AgentState {
    pub fn new(position: Vec3) -> Self {
        AgentState { position }
    }
}

/// Positions of all agents at one timestep. Index identifies the agent.
#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    states: Vec<AgentState>,
}

impl JointState {
    pub fn new(states: Vec<AgentState>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::invalid(
                "joint_state",
                "at least one agent is required",
            ));
        }
        if let Some(i) = states
            .iter()
            .position(|s| !s.position.iter().all(|c| c.is_finite()))
        {
            return Err(Error::invalid(
                "joint_state",
                format!("agent {i} has a non-finite position"),
            ));
        }
        Ok(JointState { states })
    }

    pub fn from_positions(positions: impl IntoIterator<Item = Vec3>) -> Result<Self> {
        Self::new(positions.into_iter().map(AgentState::new).collect())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[AgentState] {
        &self.states
    }

    pub fn position(&self, agent: usize) -> Vec3 {
        self.states[agent].position
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.states.iter().map(|s| s.position)
    }
}

/// A velocity command in m/s.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
#[repr(transparent)]
pub struct Action {
    pub velocity: Vec3,
}

impl Action {
    pub fn new(velocity: Vec3) -> Self {
        Action { velocity }
    }

    pub fn zero() -> Self {
        Action::default()
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

/// Admissible speed interval `[a_min, a_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedLimits {
    pub a_min: f64,
    pub a_max: f64,
}

impl Default for SpeedLimits {
    fn default() -> Self {
        SpeedLimits {
            a_min: 0.0,
            a_max: 1.0,
        }
    }
}

impl SpeedLimits {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_min.is_finite() && self.a_max.is_finite()) {
            return Err(Error::invalid("speed_limits", "bounds must be finite"));
        }
        if self.a_min < 0.0 || self.a_max < self.a_min {
            return Err(Error::invalid(
                "speed_limits",
                format!(
                    "need 0 <= a_min <= a_max, got [{}, {}]",
                    self.a_min, self.a_max
                ),
            ));
        }
        Ok(())
    }

    pub fn check(&self, action: &Action) -> Result<()> {
        let norm = action.speed();
        let slack = SPEED_TOLERANCE * self.a_max.max(1.0);
        if !norm.is_finite() || norm < self.a_min - slack || norm > self.a_max + slack {
            return Err(Error::ActionOutOfRange {
                norm,
                min: self.a_min,
                max: self.a_max,
            });
        }
        Ok(())
    }
}

/// A fixed-length plan of velocity commands for one agent.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ActionSequence {
    actions: Vec<Action>,
}

impl ActionSequence {
    pub fn new(actions: Vec<Action>) -> Self {
        ActionSequence { actions }
    }

    pub fn zeros(horizon: usize) -> Self {
        ActionSequence {
            actions: vec![Action::zero(); horizon],
        }
    }

    pub fn from_velocities(velocities: impl IntoIterator<Item = Vec3>) -> Self {
        ActionSequence {
            actions: velocities.into_iter().map(Action::new).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn first(&self) -> Option<&Action> {
        self.actions.first()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Action> {
        self.actions.iter()
    }
}

impl From<Vec<Action>> for ActionSequence {
    fn from(actions: Vec<Action>) -> Self {
        ActionSequence { actions }
    }
}

/// Axis-aligned box obstacle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
}

impl Obstacle {
    pub fn new(center: [f64; 3], half_extents: [f64; 3]) -> Result<Self> {
        let obstacle = Obstacle {
            center,
            half_extents,
        };
        obstacle.validate()?;
        Ok(obstacle)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("obstacle.center", "must be finite"));
        }
        if !self.half_extents.iter().all(|h| h.is_finite() && *h > 0.0) {
            return Err(Error::invalid(
                "obstacle.half_extents",
                "all half-extents must be positive",
            ));
        }
        Ok(())
    }

    /// Whether `p` lies inside the box grown by `margin` on every side.
    pub fn contains_inflated(&self, p: &Vec3, margin: f64) -> bool {
        (0..3).all(|k| (p[k] - self.center[k]).abs() < self.half_extents[k] + margin)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    pub goal_weight: f64,
    pub collision_penalty: f64,
    pub safety_radius: f64,
    pub obstacle_penalty: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            goal_weight: 1.0,
            collision_penalty: 50.0,
            safety_radius: 0.25,
            obstacle_penalty: 50.0,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("reward.goal_weight", self.goal_weight),
            ("reward.collision_penalty", self.collision_penalty),
            ("reward.obstacle_penalty", self.obstacle_penalty),
        ];
        for (name, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be finite and >= 0, got {value}"),
                ));
            }
        }
        if !(self.safety_radius.is_finite() && self.safety_radius > 0.0) {
            return Err(Error::invalid(
                "reward.safety_radius",
                format!("must be > 0, got {}", self.safety_radius),
            ));
        }
        Ok(())
    }
}

/// Advance every agent by one single-integrator step.
pub fn step(
    joint_state: &JointState,
    joint_action: &[Action],
    dt: f64,
    limits: &SpeedLimits,
) -> Result<JointState> {
    if joint_action.len() != joint_state.len() {
        return Err(Error::DimensionMismatch {
            what: "actions",
            expected: joint_state.len(),
            got: joint_action.len(),
        });
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    let states = joint_state
        .states
        .iter()
        .zip(joint_action)
        .map(|(s, a)| {
            limits.check(a)?;
            Ok(AgentState::new(s.position + a.velocity * dt))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(JointState { states })
}

/// One-step reward for the agent at `position`, given the other agents' positions.
///
/// Shared by [`World::reward`] and [`UtilityEvaluator`] so both produce
/// bit-identical sums.
#[inline]
fn point_reward(
    params: &RewardParams,
    position: &Vec3,
    goal: &Vec3,
    others: impl IntoIterator<Item = Vec3>,
    obstacles: &[Obstacle],
) -> f64 {
    let mut r = -params.goal_weight * (position - goal).norm();
    let radius_sq = params.safety_radius * params.safety_radius;
    if others
        .into_iter()
        .any(|q| (position - q).norm_squared() < radius_sq)
    {
        r -= params.collision_penalty;
    }
    if obstacles
        .iter()
        .any(|o| o.contains_inflated(position, AGENT_HALF_SIZE))
    {
        r -= params.obstacle_penalty;
    }
    r
}

/// The static description of a navigation game: goals, obstacles, reward
/// shape, speed bounds and timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub goals: Vec<Vec3>,
    pub obstacles: Vec<Obstacle>,
    pub reward: RewardParams,
    pub limits: SpeedLimits,
    pub dt: f64,
}

impl World {
    pub fn new(
        goals: Vec<Vec3>,
        obstacles: Vec<Obstacle>,
        reward: RewardParams,
        limits: SpeedLimits,
        dt: f64,
    ) -> Result<Self> {
        reward.validate()?;
        limits.validate()?;
        for o in &obstacles {
            o.validate()?;
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
        }
        if goals.is_empty() {
            return Err(Error::invalid("goals", "at least one agent is required"));
        }
        Ok(World {
            goals,
            obstacles,
            reward,
            limits,
            dt,
        })
    }

    pub fn agent_count(&self) -> usize {
        self.goals.len()
    }

    fn check_agent(&self, agent: usize) -> Result<()> {
        if agent >= self.goals.len() {
            return Err(Error::InvalidAgent {
                index: agent,
                count: self.goals.len(),
            });
        }
        Ok(())
    }

    fn check_state(&self, joint_state: &JointState) -> Result<()> {
        if joint_state.len() != self.goals.len() {
            return Err(Error::DimensionMismatch {
                what: "agent states",
                expected: self.goals.len(),
                got: joint_state.len(),
            });
        }
        Ok(())
    }

    pub fn step(&self, joint_state: &JointState, joint_action: &[Action]) -> Result<JointState> {
        self.check_state(joint_state)?;
        step(joint_state, joint_action, self.dt, &self.limits)
    }

    /// `-w‖p_i - g_i‖ - c·[too close to another agent] - o·[inside an inflated obstacle]`.
    pub fn reward(&self, agent: usize, joint_state: &JointState) -> Result<f64> {
        self.check_agent(agent)?;
        self.check_state(joint_state)?;
        let position = joint_state.position(agent);
        let others = joint_state
            .positions()
            .enumerate()
            .filter(|(j, _)| *j != agent)
            .map(|(_, p)| p);
        Ok(point_reward(
            &self.reward,
            &position,
            &self.goals[agent],
            others,
            &self.obstacles,
        ))
    }

    /// States `0..=H` obtained by executing every agent's plan.
    pub fn rollout(
        &self,
        initial: &JointState,
        plans: &[ActionSequence],
    ) -> Result<Vec<JointState>> {
        self.check_state(initial)?;
        if plans.len() != initial.len() {
            return Err(Error::DimensionMismatch {
                what: "plans",
                expected: initial.len(),
                got: plans.len(),
            });
        }
        let horizon = plans[0].len();
        if let Some(bad) = plans.iter().find(|p| p.len() != horizon) {
            return Err(Error::DimensionMismatch {
                what: "plan steps",
                expected: horizon,
                got: bad.len(),
            });
        }
        let mut trajectory = Vec::with_capacity(horizon + 1);
        trajectory.push(initial.clone());
        let mut joint_action = Vec::with_capacity(plans.len());
        for k in 0..horizon {
            joint_action.clear();
            joint_action.extend(plans.iter().map(|p| p.actions[k]));
            let next = step(&trajectory[k], &joint_action, self.dt, &self.limits)?;
            trajectory.push(next);
        }
        Ok(trajectory)
    }

    /// Sum of the agent's rewards over states `1..=H` of the rollout.
    pub fn utility(
        &self,
        agent: usize,
        initial: &JointState,
        plans: &[ActionSequence],
    ) -> Result<f64> {
        self.check_agent(agent)?;
        let trajectory = self.rollout(initial, plans)?;
        trajectory[1..]
            .iter()
            .try_fold(0.0, |acc, s| Ok(acc + self.reward(agent, s)?))
    }
}

/// Evaluates one agent's utility for many candidate plans while the other
/// agents' plans stay fixed.
///
/// The other agents' trajectories are rolled out once at construction. The
/// result of [`UtilityEvaluator::evaluate`] is bit-identical to
/// [`World::utility`] with the candidate substituted into the profile.
#[derive(Clone, Debug)]
pub struct UtilityEvaluator<'w> {
    world: &'w World,
    start: Vec3,
    goal: Vec3,
    horizon: usize,
    others_per_step: usize,
    /// Positions of the other agents at steps `1..=H`, row-major by step.
    others: Vec<Vec3>,
}

impl<'w> UtilityEvaluator<'w> {
    pub fn new(
        world: &'w World,
        agent: usize,
        initial: &JointState,
        plans: &[ActionSequence],
    ) -> Result<Self> {
        world.check_agent(agent)?;
        let trajectory = world.rollout(initial, plans)?;
        let horizon = plans[agent].len();
        let others_per_step = initial.len() - 1;
        let mut others = Vec::with_capacity(horizon * others_per_step);
        for state in &trajectory[1..] {
            others.extend(
                state
                    .positions()
                    .enumerate()
                    .filter(|(j, _)| *j != agent)
                    .map(|(_, p)| p),
            );
        }
        Ok(UtilityEvaluator {
            world,
            start: initial.position(agent),
            goal: world.goals[agent],
            horizon,
            others_per_step,
            others,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Utility of the candidate plan. `actions.len()` must equal the horizon.
    /// Speed bounds are not re-checked here; callers pass prior samples.
    pub fn evaluate(&self, actions: &[Action]) -> f64 {
        debug_assert_eq!(actions.len(), self.horizon);
        let dt = self.world.dt;
        let mut position = self.start;
        let mut total = 0.0;
        for (k, a) in actions.iter().enumerate() {
            position += a.velocity * dt;
            let row = &self.others[k * self.others_per_step..(k + 1) * self.others_per_step];
            total += point_reward(
                &self.world.reward,
                &position,
                &self.goal,
                row.iter().copied(),
                &self.world.obstacles,
            );
        }
        total
    }
}
