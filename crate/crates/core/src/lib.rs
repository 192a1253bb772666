//! Bounded-rational equilibrium planning for multi-agent navigation games.
//!
//! Each agent's strategy is the softmax posterior `q(a)·exp(β·U(a))` over
//! action sequences drawn from a uniform prior `q`. Best responses are
//! estimated by self-normalised importance sampling and combined into a
//! profile by iterated best response. The [`simulation`] module runs
//! receding-horizon episodes on top of the solver, and [`experiment`] drives
//! parameter sweeps and writes their results to disk.

pub mod error;
pub mod experiment;
pub mod ibr;
pub mod prior;
pub mod sampler;
pub mod scenario;
pub mod simulation;
pub mod world;

pub use error::{Error, Result};
pub use ibr::{convergence_metric, solve, SolverConfig, StrategyProfile};
pub use prior::{SeededGenerator, UniformPrior};
pub use sampler::{best_response, compute_weights, RationalityLevel};
pub use scenario::ScenarioConfig;
pub use simulation::{run_episode, EpisodeResult, Metrics};
pub use world::{
    Action, ActionSequence, AgentState, JointState, Obstacle, RewardParams, Vec3, World,
};
