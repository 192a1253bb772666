#![allow(dead_code)]

use bounded_ibr::prior::SampleBatch;
use bounded_ibr::sampler::best_response_on_batch;
use bounded_ibr::world::{
    Action, ActionSequence, AgentState, JointState, RewardParams, SpeedLimits, Vec3, World,
};
use bounded_ibr::{RationalityLevel, ScenarioConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

pub fn scenario(name: &str) -> ScenarioConfig {
    ScenarioConfig::from_file(scenario_path(name)).expect("bundled scenario parses")
}

/// Every file under `dir`, keyed by relative path.
pub fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// A one-agent game along the x axis with three admissible speeds.
pub struct LineGame {
    pub speeds: [f64; 3],
    pub horizon: usize,
    pub goal: f64,
    pub dt: f64,
    pub goal_weight: f64,
    pub beta: f64,
}

impl Default for LineGame {
    fn default() -> Self {
        LineGame {
            speeds: [0.0, 0.5, 1.0],
            horizon: 3,
            goal: 2.0,
            dt: 1.0,
            goal_weight: 1.0,
            beta: 1.0,
        }
    }
}

impl LineGame {
    /// Utility of a speed sequence, written out directly from the reward.
    pub fn utility(&self, speeds: &[f64]) -> f64 {
        let mut x = 0.0;
        let mut u = 0.0;
        for v in speeds {
            x += v * self.dt;
            u -= self.goal_weight * (x - self.goal).abs();
        }
        u
    }

    /// Exact posterior mean speed per step over all 3^H sequences.
    pub fn enumerate(&self) -> Vec<f64> {
        let h = self.horizon;
        let total = 3usize.pow(h as u32);
        let seqs: Vec<Vec<f64>> = (0..total)
            .map(|mut code| {
                (0..h)
                    .map(|_| {
                        let s = self.speeds[code % 3];
                        code /= 3;
                        s
                    })
                    .collect()
            })
            .collect();
        let logits: Vec<f64> = seqs.iter().map(|s| self.beta * self.utility(s)).collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = w.iter().sum();
        (0..h)
            .map(|k| seqs.iter().zip(&w).map(|(s, w)| w * s[k]).sum::<f64>() / z)
            .collect()
    }

    pub fn world(&self) -> World {
        World::new(
            vec![Vec3::new(self.goal, 0.0, 0.0)],
            vec![],
            RewardParams {
                goal_weight: self.goal_weight,
                ..RewardParams::default()
            },
            SpeedLimits {
                a_min: 0.0,
                a_max: 1.0,
            },
            self.dt,
        )
        .unwrap()
    }

    /// Self-normalised estimate from `k` uniform draws, using the library's
    /// utility and weighting.
    pub fn estimate(&self, k: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let seqs: Vec<ActionSequence> = (0..k)
            .map(|_| {
                ActionSequence::new(
                    (0..self.horizon)
                        .map(|_| {
                            let s = self.speeds[rng.random_range(0..3)];
                            Action::new(Vec3::new(s, 0.0, 0.0))
                        })
                        .collect(),
                )
            })
            .collect();
        let batch = SampleBatch::from_sequences(&seqs).unwrap();
        let state = JointState::new(vec![AgentState::new(Vec3::zeros())]).unwrap();
        let plans = vec![ActionSequence::zeros(self.horizon)];
        let br = best_response_on_batch(
            &self.world(),
            0,
            &state,
            &plans,
            &batch,
            RationalityLevel::new(self.beta).unwrap(),
            true,
        )
        .unwrap();
        br.plan.iter().map(|a| a.velocity.x).collect()
    }

    pub fn mean_abs_error(&self, k: usize, seeds: std::ops::Range<u64>) -> f64 {
        let exact = self.enumerate();
        let n = seeds.end - seeds.start;
        seeds
            .map(|seed| {
                let est = self.estimate(k, seed);
                est.iter()
                    .zip(&exact)
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
                    / exact.len() as f64
            })
            .sum::<f64>()
            / n as f64
    }
}
