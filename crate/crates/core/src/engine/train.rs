use crate::demand::generate_demand;
use crate::error::{Error, Result};
use crate::marl::{observation_dim, Checkpoint, CurveRow, Maddpg};
use crate::network::build_manhattan_grid;
use crate::rng::{stream, Stream};
use crate::strategies::StrategyKind;

use super::config::ScenarioConfig;
use super::sim::{mean, Learner, Simulation};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOptions {
    /// Total sessions, counting those already in a resumed checkpoint.
    pub sessions: usize,
    pub checkpoint_every: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { sessions: 600, checkpoint_every: 50 }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub curve: Vec<CurveRow>,
}

/// Freshly initialized policy for the scenario's depot count.
pub fn initial_policy(cfg: &ScenarioConfig) -> Result<Checkpoint> {
    let g = build_manhattan_grid(&cfg.grid)?;
    let d = g.depots.len();
    let mut rng = stream(cfg.seed, Stream::Init);
    let agent = Maddpg::new(cfg.marl.clone(), observation_dim(d), d + 1, &mut rng)?;
    Ok(agent.checkpoint(0, &[]))
}

/// Trains on repeated undisrupted sessions; session `i` uses seed
/// `cfg.seed + i`. `on_checkpoint` sees a checkpoint every
/// `checkpoint_every` sessions and at the end.
pub fn train(
    cfg: &ScenarioConfig,
    opts: TrainOptions,
    resume: Option<Checkpoint>,
    mut on_checkpoint: impl FnMut(&Checkpoint) -> Result<()>,
) -> Result<TrainOutcome> {
    let mut scenario = cfg.nominal();
    scenario.strategy = StrategyKind::Marl;
    let errs = scenario.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let g = build_manhattan_grid(&scenario.grid)?;
    let start = match resume {
        Some(c) => c,
        None => initial_policy(&scenario)?,
    };
    let first = start.sessions;
    let mut curve = start.curve.clone();
    let mut agent = Maddpg::from_checkpoint(start)?;
    for session in first..opts.sessions {
        let mut c = scenario.clone();
        c.seed = cfg.seed.wrapping_add(session as u64);
        let trips = generate_demand(&c.demand, &g, c.seed)?;
        let mut sim = Simulation::with_parts(c, g.clone(), trips)?;
        let sigma = scenario.marl.noise_for(session, opts.sessions);
        sim.set_learner(Learner { agent, sigma, learn: true })?;
        sim.run_to_end()?;
        let (_, summary, learner) = sim.finish();
        agent = learner.expect("learner survives the session").agent;
        curve.push(CurveRow {
            session,
            mean_reward: mean(&summary.rewards).unwrap_or(0.0),
            mean_wait_s: summary.mean_wait_s.unwrap_or(f64::NAN),
        });
        let done = session + 1;
        if opts.checkpoint_every > 0 && done % opts.checkpoint_every == 0 && done < opts.sessions {
            on_checkpoint(&agent.checkpoint(done, &curve))?;
        }
    }
    let checkpoint = agent.checkpoint(opts.sessions.max(first), &curve);
    on_checkpoint(&checkpoint)?;
    Ok(TrainOutcome { checkpoint, curve })
}

/// Mean wait of a fixed policy (no exploration, no learning) on the
/// undisrupted scenario, one value per seed.
pub fn evaluate_policy(cfg: &ScenarioConfig, policy: &Checkpoint, seeds: &[u64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut c = cfg.nominal();
        c.strategy = StrategyKind::Marl;
        c.seed = seed;
        let mut sim = Simulation::new(c)?;
        sim.set_learner(Learner { agent: Maddpg::from_checkpoint(policy.clone())?, sigma: 0.0, learn: false })?;
        sim.run_to_end()?;
        let (_, s, _) = sim.finish();
        out.push(s.mean_wait_s.unwrap_or(f64::NAN));
    }
    Ok(out)
}
