use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marl::{Checkpoint, Maddpg};
use crate::resilience::{resilience_indicators, KeyTimes, PerformanceCurve, ResilienceReport};
use crate::strategies::StrategyKind;

use super::config::ScenarioConfig;
use super::records::{PerformanceRow, Records};
use super::sim::{Learner, Simulation, Summary};

/// Reference levels taken from the undisrupted run with exact prediction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    /// Mean travel time of users completing after warm-up, seconds.
    pub f_bar: f64,
    /// Mean ride-hailing wait signal after warm-up, seconds.
    pub w_bar: f64,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub records: Records,
    pub summary: Summary,
    pub baseline: Baseline,
    pub performance: Vec<PerformanceRow>,
    pub resilience: Option<ResilienceReport>,
}

fn simulate(cfg: ScenarioConfig, policy: Option<&Checkpoint>) -> Result<(Records, Summary)> {
    let marl = cfg.strategy == StrategyKind::Marl;
    let mut sim = Simulation::new(cfg)?;
    if marl {
        let Some(c) = policy else {
            return Err(Error::Config(vec!["strategy `marl` needs a policy checkpoint".into()]));
        };
        let agent = Maddpg::from_checkpoint(c.clone())?;
        sim.set_learner(Learner { agent, sigma: 0.0, learn: false })?;
    }
    sim.run_to_end()?;
    let (records, summary, _) = sim.finish();
    Ok((records, summary))
}

/// Baseline scenario: no disruption, exact prediction, no response lag.
pub fn baseline_config(cfg: &ScenarioConfig) -> ScenarioConfig {
    let mut c = cfg.nominal();
    c.operator.noise = 0.0;
    c.operator.response_delay_s = 0.0;
    c
}

pub fn baseline(cfg: &ScenarioConfig, policy: Option<&Checkpoint>) -> Result<Baseline> {
    let (_, s) = simulate(baseline_config(cfg), policy)?;
    let f_bar = s
        .mean_travel_time_s
        .ok_or_else(|| Error::Config(vec!["baseline run completed no trips after warm-up".into()]))?;
    Ok(Baseline { f_bar, w_bar: s.mean_wait_signal_s.unwrap_or(0.0) })
}

/// `F(t) = F̄ − (W(t) − W̄)`; steps without any wait sample sit at `F̄`.
pub fn performance_curve(records: &Records, b: Baseline) -> Vec<PerformanceRow> {
    records
        .wait_signal
        .iter()
        .map(|&(t, w)| {
            let w = w.unwrap_or(b.w_bar);
            PerformanceRow { t, f: b.f_bar - (w - b.w_bar), w }
        })
        .collect()
}

/// Runs the scenario against its own baseline.
pub fn run(cfg: &ScenarioConfig, policy: Option<&Checkpoint>) -> Result<RunReport> {
    let b = baseline(cfg, policy)?;
    run_with_baseline(cfg, policy, b)
}

pub fn run_with_baseline(cfg: &ScenarioConfig, policy: Option<&Checkpoint>, b: Baseline) -> Result<RunReport> {
    let (records, summary) = simulate(cfg.clone(), policy)?;
    let performance = performance_curve(&records, b);
    let resilience = cfg.disruption.as_ref().map(|d| {
        let (t, f): (Vec<f64>, Vec<f64>) =
            performance.iter().filter(|p| p.t >= cfg.warmup_s).map(|p| (p.t, p.f)).unzip();
        let curve = PerformanceCurve { t, f, f_bar: b.f_bar, f0: None };
        resilience_indicators(&curve, KeyTimes { t0: d.start_s, td: None, tr: None }, &cfg.resilience)
    });
    Ok(RunReport { records, summary, baseline: b, performance, resilience })
}
