use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::buffer::{Experience, ReplayBuffer};
use super::nn::{soft_update, Activation, Adam, Mlp};
use super::obs::Normalizer;
use super::MarlConfig;
use crate::error::{Error, Result};

pub fn critic_input(s: &[f64], a: &[f64], co: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(s.len() + a.len() + co.len());
    x.extend_from_slice(s);
    x.extend_from_slice(a);
    x.extend_from_slice(co);
    x
}

/// Mean squared TD error against the target networks and its gradient with
/// respect to the eval critic's parameters.
pub fn critic_loss(
    batch: &[&Experience],
    critic: &Mlp,
    critic_target: &Mlp,
    actor_target: &Mlp,
    gamma: f64,
) -> Result<(f64, Vec<f64>)> {
    let mut grads = vec![0.0; critic.param_count()];
    if batch.is_empty() {
        return Ok((0.0, grads));
    }
    let s = batch.len() as f64;
    let mut loss = 0.0;
    for e in batch {
        let a2 = actor_target.forward(&e.s2)?;
        let q2 = critic_target.forward(&critic_input(&e.s2, &a2, &e.co2))?[0];
        let y = e.r + gamma * q2;
        let tr = critic.trace(&critic_input(&e.s, &e.a, &e.co))?;
        let err = tr.output()[0] - y;
        loss += err * err / s;
        critic.backward(&tr, &[2.0 * err / s], &mut grads)?;
    }
    Ok((loss, grads))
}

/// `(1/S) Σ Q(s, μ(s))` on the batch.
pub fn actor_objective(batch: &[&Experience], actor: &Mlp, critic: &Mlp) -> Result<f64> {
    let mut total = 0.0;
    for e in batch {
        let a = actor.forward(&e.s)?;
        total += critic.forward(&critic_input(&e.s, &a, &e.co))?[0];
    }
    Ok(total / batch.len().max(1) as f64)
}

/// Sampled deterministic policy gradient: the ascent direction of
/// [`actor_objective`] with respect to the actor's parameters.
pub fn actor_gradient(batch: &[&Experience], actor: &Mlp, critic: &Mlp) -> Result<Vec<f64>> {
    let mut grads = vec![0.0; actor.param_count()];
    if batch.is_empty() {
        return Ok(grads);
    }
    let s = batch.len() as f64;
    let mut scratch = vec![0.0; critic.param_count()];
    for e in batch {
        let ta = actor.trace(&e.s)?;
        let a = ta.output();
        let tc = critic.trace(&critic_input(&e.s, a, &e.co))?;
        let dx = critic.backward(&tc, &[1.0 / s], &mut scratch)?;
        let da = &dx[e.s.len()..e.s.len() + a.len()];
        actor.backward(&ta, da, &mut grads)?;
    }
    Ok(grads)
}

/// Action scores `μ(s) + N(0, σ²)` and the executed option (argmax; 0 = stay).
pub fn act(actor: &Mlp, obs: &[f64], sigma: f64, rng: &mut impl Rng) -> Result<(Vec<f64>, usize)> {
    let mut a = actor.forward(obs)?;
    if sigma > 0.0 {
        let n = Normal::new(0.0, sigma).map_err(|_| Error::NonPositiveSigma(sigma))?;
        for x in &mut a {
            *x += n.sample(rng);
        }
    }
    let best = argmax_allowed(&a, |_| true);
    Ok((a, best))
}

/// Highest-scoring action among the allowed ones; index 0 (stay) is always
/// allowed and ties go to the lower index.
pub fn argmax_allowed(a: &[f64], allowed: impl Fn(usize) -> bool) -> usize {
    let mut best = 0;
    for (i, &x) in a.iter().enumerate().skip(1) {
        if allowed(i) && x > a[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub session: usize,
    pub mean_reward: f64,
    pub mean_wait_s: f64,
}

pub struct Maddpg {
    pub cfg: MarlConfig,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critic: Mlp,
    pub critic_target: Mlp,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
    pub norm: Normalizer,
    pub buffer: ReplayBuffer,
    pub updates: u64,
}

impl Maddpg {
    pub fn new(cfg: MarlConfig, obs_dim: usize, actions: usize, rng: &mut impl Rng) -> Result<Self> {
        let mut a_sizes = vec![obs_dim];
        a_sizes.extend(&cfg.hidden);
        a_sizes.push(actions);
        let co = if cfg.joint_critic { actions } else { 0 };
        let mut c_sizes = vec![obs_dim + actions + co];
        c_sizes.extend(&cfg.hidden);
        c_sizes.push(1);
        let actor = Mlp::new(&a_sizes, Activation::Relu, Activation::Tanh, rng)?;
        let critic = Mlp::new(&c_sizes, Activation::Relu, Activation::Identity, rng)?;
        Ok(Maddpg {
            actor_opt: Adam::new(cfg.lr, actor.param_count()),
            critic_opt: Adam::new(cfg.lr, critic.param_count()),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            norm: Normalizer::new(obs_dim),
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            updates: 0,
            cfg,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn actions(&self) -> usize {
        self.actor.output_dim()
    }

    /// Critic step, actor step, then both soft target updates.
    pub fn train_on(&mut self, batch: &[&Experience]) -> Result<f64> {
        let (loss, g) = critic_loss(batch, &self.critic, &self.critic_target, &self.actor_target, self.cfg.gamma)?;
        self.critic_opt.step(&mut self.critic.params, &g);
        let mut ga = actor_gradient(batch, &self.actor, &self.critic)?;
        for x in &mut ga {
            *x = -*x;
        }
        self.actor_opt.step(&mut self.actor.params, &ga);
        soft_update(&mut self.critic_target.params, &self.critic.params, self.cfg.tau)?;
        soft_update(&mut self.actor_target.params, &self.actor.params, self.cfg.tau)?;
        self.updates += 1;
        Ok(loss)
    }

    /// Stores an experience and, on every `update_every`-th insertion once the
    /// buffer holds a full batch, trains on recent and uniform batches.
    pub fn remember(&mut self, e: Experience, rng: &mut impl Rng) -> Result<bool> {
        self.buffer.push(e);
        let due = self.buffer.inserted() % self.cfg.update_every as u64 == 0;
        if !due || self.buffer.len() < self.cfg.batch_size {
            return Ok(false);
        }
        for k in 0..self.cfg.recent_batches + self.cfg.random_batches {
            let batch: Vec<Experience> = if k < self.cfg.recent_batches {
                self.buffer.sample_recent(self.cfg.batch_size, self.cfg.recent_window, rng)
            } else {
                self.buffer.sample(self.cfg.batch_size, rng)
            }
            .into_iter()
            .cloned()
            .collect();
            let refs: Vec<&Experience> = batch.iter().collect();
            self.train_on(&refs)?;
        }
        Ok(true)
    }

    pub fn checkpoint(&self, sessions: usize, curve: &[CurveRow]) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT,
            cfg: self.cfg.clone(),
            actor: self.actor.clone(),
            actor_target: self.actor_target.clone(),
            critic: self.critic.clone(),
            critic_target: self.critic_target.clone(),
            actor_opt: self.actor_opt.clone(),
            critic_opt: self.critic_opt.clone(),
            norm: self.norm.clone(),
            updates: self.updates,
            sessions,
            curve: curve.to_vec(),
        }
    }

    pub fn from_checkpoint(c: Checkpoint) -> Result<Self> {
        if c.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported checkpoint format {}", c.format)));
        }
        if c.actor.sizes != c.actor_target.sizes
            || c.critic.sizes != c.critic_target.sizes
            || c.actor_opt.m.len() != c.actor.param_count()
            || c.critic_opt.m.len() != c.critic.param_count()
            || c.norm.min.len() != c.actor.input_dim()
        {
            return Err(Error::Checkpoint("inconsistent shapes".into()));
        }
        Ok(Maddpg {
            buffer: ReplayBuffer::new(c.cfg.buffer_capacity),
            cfg: c.cfg,
            actor: c.actor,
            actor_target: c.actor_target,
            critic: c.critic,
            critic_target: c.critic_target,
            actor_opt: c.actor_opt,
            critic_opt: c.critic_opt,
            norm: c.norm,
            updates: c.updates,
        })
    }
}

pub const CHECKPOINT_FORMAT: u32 = 1;

/// Everything needed to resume training: networks, optimizer moments,
/// normalization statistics and the reward curve so far.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub cfg: MarlConfig,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critic: Mlp,
    pub critic_target: Mlp,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
    pub norm: Normalizer,
    pub updates: u64,
    pub sessions: usize,
    pub curve: Vec<CurveRow>,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}
