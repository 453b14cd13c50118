//! MADDPG rebalancing policy: one actor and one critic shared by all
//! vehicles, trained from a common replay buffer.

mod agent;
mod buffer;
pub mod nn;
mod obs;

use serde::{Deserialize, Serialize};

pub use agent::{
    act, argmax_allowed, actor_gradient, actor_objective, critic_input, critic_loss, Checkpoint, CurveRow, Maddpg,
    CHECKPOINT_FORMAT,
};
pub use buffer::{Experience, ReplayBuffer};
pub use obs::{observation_dim, raw_observation, GlobalFeatures, Normalizer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarlConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub tau: f64,
    pub gamma: f64,
    pub buffer_capacity: usize,
    /// Train after this many insertions.
    pub update_every: usize,
    pub batch_size: usize,
    pub recent_batches: usize,
    pub random_batches: usize,
    /// Recent batches draw from this many newest experiences.
    pub recent_window: usize,
    pub reward_scale: f64,
    /// Sigmoid slope per minute of vacant time.
    pub reward_slope_per_min: f64,
    pub threshold_s: f64,
    pub noise_start: f64,
    pub noise_end: f64,
    /// Critic also sees the mean action of co-acting agents.
    pub joint_critic: bool,
    pub local_radius_m: f64,
}

impl Default for MarlConfig {
    fn default() -> Self {
        MarlConfig {
            hidden: vec![64, 64],
            lr: 0.01,
            tau: 0.01,
            gamma: 0.99,
            buffer_capacity: 1_000_000,
            update_every: 10,
            batch_size: 500,
            recent_batches: 5,
            random_batches: 5,
            recent_window: 500,
            reward_scale: 20.0,
            reward_slope_per_min: 0.3,
            threshold_s: 300.0,
            noise_start: 0.3,
            noise_end: 0.05,
            joint_critic: false,
            local_radius_m: 500.0,
        }
    }
}

impl MarlConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            errs.push("marl.hidden must list positive layer widths".into());
        }
        if !(0.0..=1.0).contains(&self.tau) {
            errs.push("marl.tau must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            errs.push("marl.gamma must lie in [0, 1]".into());
        }
        if !(self.lr > 0.0) {
            errs.push("marl.lr must be positive".into());
        }
        if self.batch_size == 0 || self.update_every == 0 || self.buffer_capacity == 0 {
            errs.push("marl.batch_size, update_every and buffer_capacity must be positive".into());
        }
        if !(self.noise_start >= 0.0 && self.noise_end >= 0.0) {
            errs.push("marl exploration noise must be nonnegative".into());
        }
        errs
    }

    /// Exploration σ for a session, decaying linearly over `total` sessions.
    pub fn noise_for(&self, session: usize, total: usize) -> f64 {
        if total <= 1 {
            return self.noise_end;
        }
        let f = (session as f64 / (total - 1) as f64).min(1.0);
        self.noise_start + (self.noise_end - self.noise_start) * f
    }

    pub fn reward(&self, vacant_s: f64) -> f64 {
        reward(vacant_s, self.threshold_s, self.reward_slope_per_min, self.reward_scale)
    }
}

/// `scale · (2 / (1 + exp(slope · (t − t_h) / 60)) − 1)`, times in seconds.
pub fn reward(vacant_s: f64, threshold_s: f64, slope_per_min: f64, scale: f64) -> f64 {
    let z = slope_per_min * (vacant_s - threshold_s) / 60.0;
    // tanh form of the same sigmoid avoids overflow for large z
    -scale * (z / 2.0).tanh()
}
