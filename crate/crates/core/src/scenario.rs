//! Scenario files: a TOML document with `[[agents]]`, optional
//! `[[obstacles]]`, and `[reward]`, `[prior]`, `[solver]`, `[episode]`
//! sections. Every section except `agents` may be omitted and is then filled
//! with defaults.
//!
//! ```toml
//! [[agents]]
//! start = [3.0, 0.0, 1.0]
//! goal = [-3.0, 0.0, 1.0]
//! beta = 0.05
//!
//! [episode]
//! timesteps = 80
//! ```

use crate::error::Error;
use crate::ibr::SolverConfig;
use crate::prior::UniformPrior;
use crate::sampler::RationalityLevel;
use crate::world::{JointState, Obstacle, RewardParams, SpeedLimits, Vec3, World};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub start: [f64; 3],
    pub goal: [f64; 3],
    pub beta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorParams {
    pub a_min: f64,
    pub a_max: f64,
    pub horizon: usize,
}

impl Default for PriorParams {
    fn default() -> Self {
        PriorParams {
            a_min: 0.0,
            a_max: 1.0,
            horizon: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeParams {
    pub timesteps: usize,
    pub dt: f64,
    pub runs: usize,
    pub base_seed: u64,
}

impl Default for EpisodeParams {
    fn default() -> Self {
        EpisodeParams {
            timesteps: 80,
            dt: 0.1,
            runs: 50,
            base_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub reward: RewardParams,
    #[serde(default)]
    pub prior: PriorParams,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub episode: EpisodeParams,
}

/// Everything needed to run an episode, built from a validated config.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub world: World,
    pub initial: JointState,
    pub betas: Vec<RationalityLevel>,
    pub prior: UniformPrior,
    pub solver: SolverConfig,
    pub episode: EpisodeParams,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    Io(String),
    MissingField {
        field: String,
        line: Option<usize>,
    },
    UnknownField {
        field: String,
        line: Option<usize>,
    },
    Syntax {
        message: String,
        line: Option<usize>,
    },
    Invalid {
        key: String,
        reason: String,
        line: Option<usize>,
    },
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (text, line) = match self {
            ScenarioError::Io(msg) => return write!(f, "cannot read scenario: {msg}"),
            ScenarioError::MissingField { field, line } => {
                (format!("missing field: {field}"), line)
            }
            ScenarioError::UnknownField { field, line } => {
                (format!("unknown field: {field}"), line)
            }
            ScenarioError::Syntax { message, line } => (message.clone(), line),
            ScenarioError::Invalid { key, reason, line } => {
                (format!("invalid {key}: {reason}"), line)
            }
        };
        match line {
            Some(n) => write!(f, "{text} (line {n})"),
            None => write!(f, "{text}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn backtick_name(message: &str, prefix: &str) -> Option<String> {
    let rest = message.strip_prefix(prefix)?;
    let rest = rest.strip_prefix('`')?;
    let end = rest.find('`')?;
    Some(rest[..end].to_string())
}

/// Best-effort line lookup for a key such as `reward.safety_radius` or
/// `agents[2].beta`.
fn locate_key(text: &str, key: &str) -> Option<usize> {
    let (section, field) = match key.split_once('.') {
        Some((s, f)) => (s, Some(f)),
        None => (key, None),
    };
    let (name, index) = match section.split_once('[') {
        Some((n, i)) => (n, i.trim_end_matches(']').parse::<usize>().ok()),
        None => (section, None),
    };
    let headers = [format!("[[{name}]]"), format!("[{name}]")];
    let mut seen = 0usize;
    let mut start_line = None;
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if headers.iter().any(|h| trimmed == h) {
            if index.is_none_or(|want| want == seen) {
                start_line = Some(i);
                break;
            }
            seen += 1;
        }
    }
    let start = start_line?;
    let Some(field) = field else {
        return Some(start + 1);
    };
    for (i, line) in text.lines().enumerate().skip(start + 1) {
        let trimmed = line.trim_start();
        if trimmed.starts_with('[') {
            break;
        }
        if let Some(rest) = trimmed.strip_prefix(field) {
            if rest.trim_start().starts_with('=') {
                return Some(i + 1);
            }
        }
    }
    Some(start + 1)
}

impl ScenarioConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| ScenarioError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start));
            let message = e.message().to_string();
            if let Some(field) = backtick_name(&message, "missing field ") {
                ScenarioError::MissingField { field, line }
            } else if let Some(field) = backtick_name(&message, "unknown field ") {
                ScenarioError::UnknownField { field, line }
            } else {
                ScenarioError::Syntax { message, line }
            }
        })?;
        config.validate().map_err(|e| {
            if let ScenarioError::Invalid { key, reason, .. } = e {
                let line = locate_key(text, &key);
                ScenarioError::Invalid { key, reason, line }
            } else {
                e
            }
        })?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |key: String, reason: String| ScenarioError::Invalid {
            key,
            reason,
            line: None,
        };
        let from_error = |e: Error| match e {
            Error::InvalidParameter { name, reason } => invalid(name.to_string(), reason),
            other => invalid("scenario".to_string(), other.to_string()),
        };
        if self.agents.is_empty() {
            return Err(invalid(
                "agents".into(),
                "at least one agent is required".into(),
            ));
        }
        for (i, a) in self.agents.iter().enumerate() {
            if !a.start.iter().chain(&a.goal).all(|c| c.is_finite()) {
                return Err(invalid(
                    format!("agents[{i}].start"),
                    "coordinates must be finite".into(),
                ));
            }
            RationalityLevel::new(a.beta)
                .map_err(|e| invalid(format!("agents[{i}].beta"), e.to_string()))?;
        }
        self.reward.validate().map_err(from_error)?;
        for (i, o) in self.obstacles.iter().enumerate() {
            o.validate()
                .map_err(|e| invalid(format!("obstacles[{i}].half_extents"), e.to_string()))?;
        }
        let radius = self.reward.safety_radius;
        for i in 0..self.agents.len() {
            for j in i + 1..self.agents.len() {
                let d =
                    (Vec3::from(self.agents[i].start) - Vec3::from(self.agents[j].start)).norm();
                if d < radius {
                    return Err(invalid(
                        format!("agents[{j}].start"),
                        format!("agents {i} and {j} start {d:.3} m apart, closer than the safety radius {radius}"),
                    ));
                }
            }
        }
        let limits = SpeedLimits {
            a_min: self.prior.a_min,
            a_max: self.prior.a_max,
        };
        limits
            .validate()
            .map_err(|e| invalid("prior.a_max".into(), e.to_string()))?;
        if self.prior.horizon == 0 {
            return Err(invalid("prior.horizon".into(), "must be >= 1".into()));
        }
        self.solver.validate().map_err(from_error)?;
        if self.episode.timesteps == 0 {
            return Err(invalid("episode.timesteps".into(), "must be >= 1".into()));
        }
        if !(self.episode.dt.is_finite() && self.episode.dt > 0.0) {
            return Err(invalid("episode.dt".into(), "must be > 0".into()));
        }
        if self.episode.runs == 0 {
            return Err(invalid("episode.runs".into(), "must be >= 1".into()));
        }
        Ok(())
    }

    /// The fully resolved config, defaults included.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config is always representable as TOML")
    }

    /// First 16 hex digits of the SHA-256 of the resolved config.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn build(&self) -> crate::Result<Scenario> {
        self.validate()
            .map_err(|e| Error::invalid("scenario", e.to_string()))?;
        let limits = SpeedLimits {
            a_min: self.prior.a_min,
            a_max: self.prior.a_max,
        };
        let world = World::new(
            self.agents.iter().map(|a| Vec3::from(a.goal)).collect(),
            self.obstacles.clone(),
            self.reward,
            limits,
            self.episode.dt,
        )?;
        let initial = JointState::from_positions(self.agents.iter().map(|a| Vec3::from(a.start)))?;
        let betas = self
            .agents
            .iter()
            .map(|a| RationalityLevel::new(a.beta))
            .collect::<crate::Result<Vec<_>>>()?;
        Ok(Scenario {
            world,
            initial,
            betas,
            prior: UniformPrior::new(limits, self.prior.horizon)?,
            solver: self.solver,
            episode: self.episode,
        })
    }
}

/// Agents equally spaced on a horizontal circle of diameter `goal_distance`,
/// each heading for the antipodal start.
pub fn position_swap_scenario(
    n_agents: usize,
    goal_distance: f64,
    altitude: f64,
    beta: f64,
) -> crate::Result<ScenarioConfig> {
    if n_agents < 2 {
        return Err(Error::invalid(
            "n_agents",
            format!("need at least 2, got {n_agents}"),
        ));
    }
    if !(goal_distance.is_finite() && goal_distance > 0.0) {
        return Err(Error::invalid("goal_distance", "must be > 0"));
    }
    let radius = goal_distance / 2.0;
    let agents = (0..n_agents)
        .map(|i| {
            let angle = TAU * i as f64 / n_agents as f64;
            let (s, c) = angle.sin_cos();
            AgentSpec {
                start: [radius * c, radius * s, altitude],
                goal: [-radius * c, -radius * s, altitude],
                beta,
            }
        })
        .collect();
    Ok(ScenarioConfig {
        agents,
        obstacles: Vec::new(),
        reward: RewardParams::default(),
        prior: PriorParams::default(),
        solver: SolverConfig::default(),
        episode: EpisodeParams::default(),
    })
}
