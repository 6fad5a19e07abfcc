//! Group-relative policy optimization at desk scale.
//!
//! For each query a group of trajectories is sampled from the current
//! policy, each is scored with the reward, and rewards are z-scored within
//! the group. The policy then takes one REINFORCE step with those relative
//! advantages as weights. There is no critic, no ratio clipping and no KL
//! anchor.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::RewardBreakdown;
use crate::scalar::Real;
use crate::toy_env::{ToyEnvironment, ToyPolicy};

pub const DEFAULT_ADVANTAGE_EPSILON: f64 = 1e-8;

/// A sampled action: `row` selects the query's logit row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionRef {
    pub row: usize,
    pub action: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSample<T> {
    pub query_id: String,
    pub trajectory_id: usize,
    pub action: ActionRef,
    pub logprob: T,
    pub reward: RewardBreakdown<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrpoConfig<T> {
    pub group_size: usize,
    pub learning_rate: T,
    pub advantage_epsilon: T,
    pub iterations: usize,
    pub seed: u64,
}

impl<T: Real> Default for GrpoConfig<T> {
    fn default() -> Self {
        Self {
            group_size: 8,
            learning_rate: T::lit(0.1),
            advantage_epsilon: T::lit(DEFAULT_ADVANTAGE_EPSILON),
            iterations: 200,
            seed: 0,
        }
    }
}

impl<T: Real> GrpoConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(Error::invalid("group_size must be at least 2"));
        }
        if !(self.learning_rate > T::zero()) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(self.advantage_epsilon > T::zero()) {
            return Err(Error::invalid("advantage_epsilon must be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be positive"));
        }
        Ok(())
    }
}

/// `(r_i - mean) / (std + ε)` with the population standard deviation.
/// A group of identical rewards yields exact zeros.
pub fn group_advantages<T: Real>(rewards: &[T], epsilon: T) -> Result<Vec<T>> {
    if rewards.len() < 2 {
        return Err(Error::invalid("a group needs at least two rewards"));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("reward"));
    }
    let first = rewards[0];
    if rewards.iter().all(|&r| r == first) {
        return Ok(vec![T::zero(); rewards.len()]);
    }
    let n = T::lit(rewards.len() as f64);
    let mean = rewards.iter().copied().sum::<T>() / n;
    let var = rewards.iter().map(|&r| (r - mean) * (r - mean)).sum::<T>() / n;
    let denom = var.sqrt() + epsilon;
    Ok(rewards.iter().map(|&r| (r - mean) / denom).collect())
}

/// One REINFORCE step. Every sample contributes
/// `lr · advantage · ∂ log π(action) / ∂ logit` evaluated under the input
/// policy; contributions are summed and applied at once.
pub fn policy_gradient_step<T: Real>(
    policy: &ToyPolicy<T>,
    samples: &[GroupSample<T>],
    advantages: &[T],
    lr: T,
) -> Result<ToyPolicy<T>> {
    if samples.len() != advantages.len() {
        return Err(Error::DimMismatch {
            expected: samples.len(),
            actual: advantages.len(),
        });
    }
    let mut deltas: Vec<Vec<T>> = policy
        .logits()
        .iter()
        .map(|row| vec![T::zero(); row.len()])
        .collect();
    for (sample, &adv) in samples.iter().zip(advantages) {
        let ActionRef { row, action } = sample.action;
        policy.check_action(row, action)?;
        if adv == T::zero() {
            continue;
        }
        let probs = policy.probs(row)?;
        let inv_temp = T::one() / policy.temperature();
        for (j, (d, &p)) in deltas[row].iter_mut().zip(&probs).enumerate() {
            let indicator = if j == action { T::one() } else { T::zero() };
            *d = *d + lr * adv * (indicator - p) * inv_temp;
        }
    }
    let mut updated = policy.clone();
    for (row, delta) in deltas.iter().enumerate() {
        if delta.iter().all(|&d| d == T::zero()) {
            continue;
        }
        updated.add_to_row(row, delta)?;
    }
    Ok(updated)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationStats<T> {
    pub iteration: usize,
    pub mean_reward: T,
    /// Gated samples count as zero.
    pub mean_r_rank: T,
    pub format_violation_rate: T,
}

/// Deterministic per-(seed, iteration, task) stream so groups can be
/// reproduced or run in any order.
pub fn rollout_rng(seed: u64, iteration: usize, task: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((iteration as u64) << 32) | task as u64);
    rng
}

/// Samples one group per task, then applies one update per group.
pub fn grpo_iteration<T: Real>(
    env: &ToyEnvironment<T>,
    policy: &ToyPolicy<T>,
    config: &GrpoConfig<T>,
    iteration: usize,
) -> Result<(IterationStats<T>, ToyPolicy<T>)> {
    config.validate()?;
    env.check_policy(policy)?;
    let mut updated = policy.clone();
    let mut reward_sum = T::zero();
    let mut rank_sum = T::zero();
    let mut violations = 0usize;
    let mut count = 0usize;
    for task in 0..env.tasks().len() {
        let mut rng = rollout_rng(config.seed, iteration, task);
        let samples = env.rollout(policy, task, config.group_size, &mut rng)?;
        let rewards: Vec<T> = samples.iter().map(|s| s.reward.r_total).collect();
        let advantages = group_advantages(&rewards, config.advantage_epsilon)?;
        updated = policy_gradient_step(&updated, &samples, &advantages, config.learning_rate)?;
        for s in &samples {
            reward_sum = reward_sum + s.reward.r_total;
            rank_sum = rank_sum + s.reward.rank_or_zero();
            if s.reward.r_format < T::zero() || s.reward.gated {
                violations += 1;
            }
            count += 1;
        }
    }
    let n = T::lit(count as f64);
    let stats = IterationStats {
        iteration,
        mean_reward: reward_sum / n,
        mean_r_rank: rank_sum / n,
        format_violation_rate: T::lit(violations as f64) / n,
    };
    Ok((stats, updated))
}

#[derive(Debug, Clone)]
pub struct TrainingRun<T> {
    pub policy: ToyPolicy<T>,
    pub history: Vec<IterationStats<T>>,
}

pub fn train<T: Real>(
    env: &ToyEnvironment<T>,
    initial: ToyPolicy<T>,
    config: &GrpoConfig<T>,
) -> Result<TrainingRun<T>> {
    config.validate()?;
    let mut policy = initial;
    let mut history = Vec::with_capacity(config.iterations);
    for it in 0..config.iterations {
        let (stats, next) = grpo_iteration(env, &policy, config, it)?;
        history.push(stats);
        policy = next;
    }
    Ok(TrainingRun { policy, history })
}
