//! Bounded-rational best response by self-normalised importance sampling.
//!
//! Candidate plans are drawn from the prior, scored by the agent's utility
//! with everyone else's plan held fixed, and weighted by `exp(β·U)`. The best
//! response is the weighted mean plan. All weight arithmetic happens in log
//! space.

use crate::error::{Error, Result};
use crate::prior::{SampleBatch, SeededGenerator, UniformPrior};
use crate::world::{Action, ActionSequence, JointState, UtilityEvaluator, Vec3, World};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Samples per reduction block. Fixed so the summation order, and hence the
/// result, does not depend on the thread count.
const REDUCE_BLOCK: usize = 1024;

/// Inverse temperature of the softmax posterior. `0` recovers the prior.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RationalityLevel(f64);

impl RationalityLevel {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::invalid(
                "beta",
                format!("must be finite and >= 0, got {beta}"),
            ));
        }
        Ok(RationalityLevel(beta))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for RationalityLevel {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        RationalityLevel::new(value)
    }
}

impl From<RationalityLevel> for f64 {
    fn from(beta: RationalityLevel) -> f64 {
        beta.0
    }
}

/// Normalised softmax weights and their logarithms.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    pub log_weights: Vec<f64>,
    pub weights: Vec<f64>,
}

/// A scored proposal batch together with its posterior weights.
#[derive(Clone, Debug)]
pub struct WeightedSamples {
    pub sequences: SampleBatch,
    pub utilities: Vec<f64>,
    pub log_weights: Vec<f64>,
    pub weights: Vec<f64>,
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `w_k = exp(β·U_k - logsumexp(β·U))`.
pub fn compute_weights(utilities: &[f64], beta: RationalityLevel) -> Result<Weights> {
    if utilities.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let beta = beta.value();
    let mut scaled = Vec::with_capacity(utilities.len());
    for (k, u) in utilities.iter().enumerate() {
        let s = beta * u;
        if !u.is_finite() || !s.is_finite() {
            return Err(Error::NonFiniteUtility { sample: k });
        }
        scaled.push(s);
    }
    let lse = log_sum_exp(&scaled);
    let log_weights: Vec<f64> = scaled.iter().map(|s| s - lse).collect();
    let weights = log_weights.iter().map(|l| l.exp()).collect();
    Ok(Weights {
        log_weights,
        weights,
    })
}

/// KL divergence (nats) of the weighted empirical measure from the uniform
/// one: `log K + Σ w log w`.
pub fn kl_from_prior(weights: &[f64]) -> f64 {
    if weights.is_empty() {
        return 0.0;
    }
    let entropy_term: f64 = weights
        .iter()
        .filter(|w| **w > 0.0)
        .map(|w| w * w.ln())
        .sum();
    ((weights.len() as f64).ln() + entropy_term).max(0.0)
}

/// `1 / Σ w²`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

fn accumulate(batch: &SampleBatch, weights: &[f64], range: std::ops::Range<usize>) -> Vec<Vec3> {
    let mut acc = vec![Vec3::zeros(); batch.horizon()];
    for k in range {
        let w = weights[k];
        if w == 0.0 {
            continue;
        }
        for (slot, a) in acc.iter_mut().zip(batch.sequence(k)) {
            *slot += a.velocity * w;
        }
    }
    acc
}

/// Per-step weighted average `Σ_k w_k a_k`.
///
/// With `deterministic` the batch is split into fixed blocks whose partial
/// sums are combined in block order.
pub fn weighted_mean(batch: &SampleBatch, weights: &[f64], deterministic: bool) -> ActionSequence {
    let horizon = batch.horizon();
    let add = |mut a: Vec<Vec3>, b: Vec<Vec3>| {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
        a
    };
    let n = batch.len();
    let total = if deterministic {
        let blocks: Vec<Vec<Vec3>> = (0..n.div_ceil(REDUCE_BLOCK))
            .into_par_iter()
            .map(|b| {
                accumulate(
                    batch,
                    weights,
                    b * REDUCE_BLOCK..((b + 1) * REDUCE_BLOCK).min(n),
                )
            })
            .collect();
        blocks.into_iter().fold(vec![Vec3::zeros(); horizon], add)
    } else {
        (0..n)
            .into_par_iter()
            .fold(
                || vec![Vec3::zeros(); horizon],
                |mut acc, k| {
                    for (slot, a) in acc.iter_mut().zip(batch.sequence(k)) {
                        *slot += a.velocity * weights[k];
                    }
                    acc
                },
            )
            .reduce(|| vec![Vec3::zeros(); horizon], add)
    };
    ActionSequence::from_velocities(total)
}

/// Utility of every sequence in `batch` for `agent`, others' plans fixed.
pub fn score_batch(
    world: &World,
    agent: usize,
    joint_state: &JointState,
    plans: &[ActionSequence],
    batch: &SampleBatch,
) -> Result<Vec<f64>> {
    let evaluator = UtilityEvaluator::new(world, agent, joint_state, plans)?;
    if batch.horizon() != evaluator.horizon() {
        return Err(Error::DimensionMismatch {
            what: "sample horizon",
            expected: evaluator.horizon(),
            got: batch.horizon(),
        });
    }
    Ok((0..batch.len())
        .into_par_iter()
        .with_min_len(64)
        .map(|k| evaluator.evaluate(batch.sequence(k)))
        .collect())
}

/// Scores and weights a given proposal batch.
pub fn weigh_batch(
    world: &World,
    agent: usize,
    joint_state: &JointState,
    plans: &[ActionSequence],
    batch: SampleBatch,
    beta: RationalityLevel,
) -> Result<WeightedSamples> {
    let utilities = score_batch(world, agent, joint_state, plans, &batch)?;
    let Weights {
        log_weights,
        weights,
    } = compute_weights(&utilities, beta)?;
    Ok(WeightedSamples {
        sequences: batch,
        utilities,
        log_weights,
        weights,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestResponse {
    pub plan: ActionSequence,
    /// Realised KL divergence from the prior, nats.
    pub kl: f64,
    pub ess: f64,
}

/// Best response of `agent` computed on an existing proposal batch.
///
/// `plans` is the full profile; the entry for `agent` is ignored.
pub fn best_response_on_batch(
    world: &World,
    agent: usize,
    joint_state: &JointState,
    plans: &[ActionSequence],
    batch: &SampleBatch,
    beta: RationalityLevel,
    deterministic: bool,
) -> Result<BestResponse> {
    let utilities = score_batch(world, agent, joint_state, plans, batch)?;
    let weights = compute_weights(&utilities, beta)?.weights;
    Ok(BestResponse {
        plan: weighted_mean(batch, &weights, deterministic),
        kl: kl_from_prior(&weights),
        ess: effective_sample_size(&weights),
    })
}

/// Draws `samples` proposals from `prior` on `gen` and returns the weighted
/// mean plan of `agent` against the fixed plans of the others.
#[allow(clippy::too_many_arguments)]
pub fn best_response(
    world: &World,
    agent: usize,
    joint_state: &JointState,
    plans: &[ActionSequence],
    prior: &UniformPrior,
    beta: RationalityLevel,
    samples: usize,
    gen: &mut SeededGenerator,
) -> Result<BestResponse> {
    let batch = prior.sample_batch_flat(gen, samples)?;
    best_response_on_batch(world, agent, joint_state, plans, &batch, beta, true)
}

/// Unweighted component-wise mean over a batch.
pub fn sample_mean(batch: &SampleBatch) -> ActionSequence {
    let n = batch.len() as f64;
    let mut acc = vec![Vec3::zeros(); batch.horizon()];
    for k in 0..batch.len() {
        for (slot, a) in acc.iter_mut().zip(batch.sequence(k)) {
            *slot += a.velocity;
        }
    }
    ActionSequence::new(acc.into_iter().map(|v| Action::new(v / n)).collect())
}
