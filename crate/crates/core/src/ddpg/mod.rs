//! Adaptive curriculum weighting with three DDPG agents (flow, pose, rotation).
//!
//! Each agent observes `[progress, component loss]`, picks a scalar action in
//! `[0, 1]` and that action is interpolated into a loss weight. Rewards are
//! the negated component loss seen one step later.

mod agent;
mod buffer;
mod scheduler;

pub use agent::*;
pub use buffer::ReplayBuffer;
pub use scheduler::*;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::curriculum::WeightBounds;

/// Agent input: normalized training progress and a component loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub progress: f64,
    pub loss: f64,
}

impl AgentState {
    pub fn to_array(&self) -> [f64; 2] {
        [self.progress, self.loss]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: AgentState,
    pub action: f64,
    pub reward: f64,
    pub next_state: AgentState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentHyperparams {
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub noise_scale: f64,
    pub update_every: u64,
    pub iterations: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub hidden: [usize; 2],
}

impl Default for AgentHyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            tau: 0.005,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            noise_scale: 0.1,
            update_every: 50,
            iterations: 10,
            batch_size: 64,
            buffer_capacity: ReplayBuffer::DEFAULT_CAPACITY,
            hidden: [64, 64],
        }
    }
}

impl AgentHyperparams {
    /// Every violated constraint, one message each.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(0.0..1.0).contains(&self.gamma) {
            out.push(format!("gamma must be in [0, 1), got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            out.push(format!("tau must be in (0, 1], got {}", self.tau));
        }
        if !(self.actor_lr > 0.0 && self.actor_lr.is_finite()) {
            out.push(format!("actor_lr must be positive, got {}", self.actor_lr));
        }
        if !(self.critic_lr > 0.0 && self.critic_lr.is_finite()) {
            out.push(format!("critic_lr must be positive, got {}", self.critic_lr));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            out.push(format!("noise_scale must be >= 0, got {}", self.noise_scale));
        }
        if self.update_every == 0 {
            out.push("update_every must be positive".into());
        }
        if self.batch_size == 0 {
            out.push("batch_size must be positive".into());
        }
        if self.buffer_capacity < self.batch_size {
            out.push(format!(
                "buffer_capacity {} is smaller than batch_size {}",
                self.buffer_capacity, self.batch_size
            ));
        }
        if self.hidden.iter().any(|h| *h == 0 || *h > 64) {
            out.push(format!("hidden widths must be in 1..=64, got {:?}", self.hidden));
        }
        out
    }
}

/// Gaussian perturbation with std `scale * 2 * min(a, 1 - a)`, clipped to `[0, 1]`.
pub fn exploration_noise<R: Rng>(a: f64, scale: f64, rng: &mut R) -> f64 {
    let std = scale * 2.0 * a.min(1.0 - a);
    if std <= 0.0 {
        return a.clamp(0.0, 1.0);
    }
    let n = Normal::new(0.0, std).expect("finite positive std");
    (a + n.sample(rng)).clamp(0.0, 1.0)
}

pub fn adaptive_weight(a: f64, bounds: &WeightBounds) -> f64 {
    bounds.interpolate(a)
}

/// `p = min(i / N, 1)`.
pub fn build_state(step: u64, budget: u64, loss: f64) -> AgentState {
    assert!(budget > 0, "progress budget must be positive");
    AgentState {
        progress: (step as f64 / budget as f64).min(1.0),
        loss,
    }
}

pub fn reward(loss: f64) -> f64 {
    -loss.abs()
}
