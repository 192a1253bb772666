//! The default policy every agent samples from: i.i.d. velocity commands
//! with uniform speed in `[a_min, a_max]` and uniform direction on the sphere.
//!
//! Sampling is counter-based. Each action consumes exactly
//! [`WORDS_PER_ACTION`] words of a ChaCha stream, so the `k`-th sample of a
//! batch can be generated from any thread by seeking to its offset. Batch
//! content therefore does not depend on how generation is partitioned.

use crate::error::{Error, Result};
use crate::world::{Action, ActionSequence, SpeedLimits, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::TAU;

/// 32-bit words consumed per action: three `f64` draws of one `u64` each.
pub const WORDS_PER_ACTION: u128 = 6;

/// Samples generated per parallel work item.
const CHUNK_SAMPLES: usize = 256;

/// A reproducible random stream identified by `(seed, stream_id)`.
#[derive(Clone, Debug)]
pub struct SeededGenerator {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl SeededGenerator {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        SeededGenerator {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Current offset in actions drawn from this stream.
    pub fn action_offset(&self) -> u128 {
        self.rng.get_word_pos() / WORDS_PER_ACTION
    }

    fn seek_action(&mut self, index: u128) {
        self.rng.set_word_pos(index * WORDS_PER_ACTION);
    }

    fn unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// Substream for one agent's proposals at one planning step.
pub fn stream_id(planning_step: usize, agent: usize) -> u64 {
    ((planning_step as u64) << 20) | (agent as u64 & 0xF_FFFF)
}

/// Seed for one episode, derived from the experiment's base seed.
pub fn run_seed(base_seed: u64, run_index: usize) -> u64 {
    // splitmix64 finaliser
    let mut z = base_seed ^ (run_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformPrior {
    limits: SpeedLimits,
    horizon: usize,
}

impl UniformPrior {
    pub fn new(limits: SpeedLimits, horizon: usize) -> Result<Self> {
        limits.validate()?;
        Ok(UniformPrior { limits, horizon })
    }

    pub fn limits(&self) -> &SpeedLimits {
        &self.limits
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn sample_action(&self, gen: &mut SeededGenerator) -> Action {
        let u = gen.unit();
        let z = gen.unit();
        let phi = gen.unit();
        self.action_from_uniforms(u, z, phi)
    }

    /// Maps three U[0,1) draws to a velocity. The direction uses the
    /// cylinder projection: `z` uniform on [-1, 1] and azimuth uniform on
    /// [0, 2π) give a uniform point on the unit sphere.
    #[inline]
    fn action_from_uniforms(&self, u: f64, z: f64, phi: f64) -> Action {
        let SpeedLimits { a_min, a_max } = self.limits;
        let speed = a_min + (a_max - a_min) * u;
        let cos_theta = 2.0 * z - 1.0;
        let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
        let (sin_phi, cos_phi) = (TAU * phi).sin_cos();
        Action::new(Vec3::new(
            speed * sin_theta * cos_phi,
            speed * sin_theta * sin_phi,
            speed * cos_theta,
        ))
    }

    pub fn sample_sequence(&self, gen: &mut SeededGenerator) -> ActionSequence {
        ActionSequence::new((0..self.horizon).map(|_| self.sample_action(gen)).collect())
    }

    /// `count` sequences, identical to `count` successive
    /// [`UniformPrior::sample_sequence`] calls on `gen`.
    pub fn sample_batch(
        &self,
        gen: &mut SeededGenerator,
        count: usize,
    ) -> Result<Vec<ActionSequence>> {
        let batch = self.sample_batch_flat(gen, count)?;
        Ok((0..batch.len())
            .map(|k| ActionSequence::new(batch.sequence(k).to_vec()))
            .collect())
    }

    /// Same draws as [`UniformPrior::sample_batch`], stored contiguously and
    /// generated in parallel.
    pub fn sample_batch_flat(
        &self,
        gen: &mut SeededGenerator,
        count: usize,
    ) -> Result<SampleBatch> {
        if count == 0 {
            return Err(Error::EmptySampleSet);
        }
        let horizon = self.horizon;
        let start = gen.action_offset();
        let mut actions = vec![Action::zero(); count * horizon];
        if horizon > 0 {
            actions
                .par_chunks_mut(CHUNK_SAMPLES * horizon)
                .enumerate()
                .for_each(|(chunk, out)| {
                    let mut local = gen.clone();
                    local.seek_action(start + (chunk * CHUNK_SAMPLES * horizon) as u128);
                    for slot in out.iter_mut() {
                        *slot = self.sample_action(&mut local);
                    }
                });
        }
        gen.seek_action(start + (count * horizon) as u128);
        Ok(SampleBatch {
            horizon,
            count,
            actions,
        })
    }
}

/// `count` action sequences of length `horizon`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    horizon: usize,
    count: usize,
    actions: Vec<Action>,
}

impl SampleBatch {
    /// Packs externally drawn sequences, e.g. from a discretised proposal.
    pub fn from_sequences(sequences: &[ActionSequence]) -> Result<Self> {
        let first = sequences.first().ok_or(Error::EmptySampleSet)?;
        let horizon = first.len();
        let mut actions = Vec::with_capacity(sequences.len() * horizon);
        for s in sequences {
            if s.len() != horizon {
                return Err(Error::DimensionMismatch {
                    what: "sequence length",
                    expected: horizon,
                    got: s.len(),
                });
            }
            actions.extend_from_slice(s.actions());
        }
        Ok(SampleBatch {
            horizon,
            count: sequences.len(),
            actions,
        })
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn sequence(&self, k: usize) -> &[Action] {
        &self.actions[k * self.horizon..(k + 1) * self.horizon]
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prior(a_min: f64, a_max: f64, horizon: usize) -> UniformPrior {
        UniformPrior::new(SpeedLimits { a_min, a_max }, horizon).unwrap()
    }

    #[test]
    fn degenerate_support_gives_zero_velocity() {
        let p = prior(0.0, 0.0, 4);
        let mut gen = SeededGenerator::new(7, 0);
        for _ in 0..100 {
            assert_eq!(p.sample_action(&mut gen).velocity, Vec3::zeros());
        }
    }

    #[test]
    fn speed_mean_and_direction_moments() {
        let p = prior(0.0, 1.0, 1);
        let mut gen = SeededGenerator::new(11, 3);
        let n = 1_000_000;
        let mut speed_sum = 0.0;
        let mut dir_sum = Vec3::zeros();
        let mut cov = nalgebra::Matrix3::<f64>::zeros();
        for _ in 0..n {
            let a = p.sample_action(&mut gen);
            let s = a.speed();
            speed_sum += s;
            if s > 0.0 {
                let d = a.velocity / s;
                dir_sum += d;
                cov += d * d.transpose();
            }
        }
        let n = n as f64;
        assert!((speed_sum / n - 0.5).abs() < 0.01);
        for k in 0..3 {
            assert!((dir_sum[k] / n).abs() < 0.01, "axis {k}");
        }
        let cov = cov / n;
        for r in 0..3 {
            for c in 0..3 {
                let expected = if r == c { 1.0 / 3.0 } else { 0.0 };
                assert!((cov[(r, c)] - expected).abs() < 0.02, "cov[{r},{c}]");
            }
        }
    }

    #[test]
    fn support_bound_holds() {
        let p = prior(0.2, 0.9, 1);
        let mut gen = SeededGenerator::new(5, 1);
        for _ in 0..100_000 {
            let s = p.sample_action(&mut gen).speed();
            assert!((0.2 - 1e-12..=0.9 + 1e-12).contains(&s));
        }
    }

    #[test]
    fn sequence_lengths_and_determinism() {
        let p = prior(0.0, 1.0, 0);
        assert!(p
            .sample_sequence(&mut SeededGenerator::new(1, 1))
            .is_empty());

        let p = prior(0.0, 1.0, 3);
        let a = p.sample_sequence(&mut SeededGenerator::new(42, 9));
        let b = p.sample_sequence(&mut SeededGenerator::new(42, 9));
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|x| x.speed() <= 1.0 + 1e-12));
        assert_eq!(a, b);
    }

    #[test]
    fn batch_matches_successive_sequences() {
        let p = prior(0.0, 1.0, 5);
        let count = 3 * CHUNK_SAMPLES + 17;
        let mut seq_gen = SeededGenerator::new(99, 4);
        let sequential: Vec<ActionSequence> = (0..count)
            .map(|_| p.sample_sequence(&mut seq_gen))
            .collect();
        let mut batch_gen = SeededGenerator::new(99, 4);
        let batch = p.sample_batch(&mut batch_gen, count).unwrap();
        assert_eq!(batch, sequential);
        // Both generators end at the same position.
        assert_eq!(
            p.sample_action(&mut seq_gen),
            p.sample_action(&mut batch_gen)
        );
    }

    #[test]
    fn singleton_batch_and_empty_batch() {
        let p = prior(0.0, 1.0, 4);
        let first = p.sample_sequence(&mut SeededGenerator::new(3, 2));
        let batch = p.sample_batch(&mut SeededGenerator::new(3, 2), 1).unwrap();
        assert_eq!(batch, vec![first]);
        assert!(matches!(
            p.sample_batch(&mut SeededGenerator::new(3, 2), 0),
            Err(Error::EmptySampleSet)
        ));
    }

    #[test]
    fn distinct_streams_differ() {
        let p = prior(0.0, 1.0, 4);
        let a = p.sample_batch(&mut SeededGenerator::new(3, 0), 10).unwrap();
        let b = p.sample_batch(&mut SeededGenerator::new(3, 1), 10).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x != y));
    }

    #[test]
    fn batch_is_thread_count_invariant() {
        let p = prior(0.0, 1.0, 10);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    p.sample_batch_flat(&mut SeededGenerator::new(8, 8), 5000)
                        .unwrap()
                })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn largest_budget_supported() {
        let p = prior(0.0, 1.0, 10);
        let batch = p
            .sample_batch_flat(&mut SeededGenerator::new(1, 1), 500_000)
            .unwrap();
        assert_eq!(batch.len(), 500_000);
        assert_eq!(batch.actions().len(), 5_000_000);
    }

    #[test]
    fn stream_ids_are_unique_per_step_and_agent() {
        let mut seen = std::collections::HashSet::new();
        for t in 0..200 {
            for i in 0..16 {
                assert!(seen.insert(stream_id(t, i)));
            }
        }
        assert_ne!(run_seed(0, 0), run_seed(0, 1));
    }
}
