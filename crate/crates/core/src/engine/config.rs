use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::demand::DemandConfig;
use crate::error::{Error, Result};
use crate::marl::MarlConfig;
use crate::mfd::MfdParams;
use crate::network::GridConfig;
use crate::resilience::ResilienceConfig;
use crate::ridehail::{EconomicsConfig, OperatorConfig};
use crate::strategies::StrategyKind;
use crate::transit::{DisruptionSpec, StopRef, TransitConfig};

/// Where ride-hailing vehicles are at the start of a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FleetStart {
    /// Round-robin over depots, respecting capacity.
    Depots,
    /// Intersections drawn from the trip destination weights, as if each
    /// vehicle had just dropped someone off.
    #[default]
    Destinations,
}

/// Everything a run depends on. Serialized as one JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub dt_s: f64,
    pub horizon_s: f64,
    pub warmup_s: f64,
    pub fleet_size: usize,
    pub fleet_start: FleetStart,
    pub strategy: StrategyKind,
    pub grid: GridConfig,
    pub demand: DemandConfig,
    pub mfd: MfdParams,
    pub transit: TransitConfig,
    pub operator: OperatorConfig,
    pub economics: EconomicsConfig,
    pub resilience: ResilienceConfig,
    pub marl: MarlConfig,
    pub disruption: Option<DisruptionSpec>,
    /// Trailing window for the ride-hailing wait behind the performance curve.
    pub performance_window_s: f64,
    /// Policy checkpoint used by the `marl` strategy.
    pub marl_checkpoint: Option<String>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::full()
    }
}

fn train_closure(stops: std::ops::RangeInclusive<usize>, start_s: f64, end_s: f64) -> DisruptionSpec {
    DisruptionSpec {
        closed: stops.map(|stop| StopRef { line: "T1".into(), stop }).collect(),
        start_s,
        end_s,
    }
}

impl ScenarioConfig {
    /// 30 km grid, 5729 users, 600 vehicles over 4 h; seven train stations
    /// close from 1.5 h to 2.5 h.
    pub fn full() -> Self {
        ScenarioConfig {
            name: "full".into(),
            seed: 1,
            dt_s: 30.0,
            horizon_s: 4.0 * 3600.0,
            warmup_s: 3600.0,
            fleet_size: 600,
            fleet_start: FleetStart::Destinations,
            strategy: StrategyKind::None,
            grid: GridConfig::full_scale(),
            demand: DemandConfig::default(),
            mfd: MfdParams::default(),
            transit: TransitConfig::default(),
            operator: OperatorConfig::default(),
            economics: EconomicsConfig::default(),
            resilience: ResilienceConfig::default(),
            marl: MarlConfig::default(),
            disruption: Some(train_closure(1..=7, 1.5 * 3600.0, 2.5 * 3600.0)),
            performance_window_s: 600.0,
            marl_checkpoint: None,
        }
    }

    /// 12 km grid, 1000 users, 100 vehicles over 2 h; three train stations
    /// close from 1 h to 1.5 h.
    pub fn desk() -> Self {
        let mut c = ScenarioConfig::full();
        c.name = "desk".into();
        c.horizon_s = 2.0 * 3600.0;
        c.warmup_s = 1800.0;
        c.fleet_size = 100;
        c.grid = GridConfig::desk_scale();
        c.demand.total_users = 1000;
        c.demand.active_window_s = c.horizon_s;
        c.demand.max_walk_m = 2000.0;
        c.mfd.background_cars = [40, 20, 8];
        c.marl.lr = 0.001;
        c.marl.tau = 0.05;
        c.marl.gamma = 0.9;
        c.marl.threshold_s = 900.0;
        c.marl.batch_size = 64;
        c.marl.recent_window = 64;
        c.marl.recent_batches = 1;
        c.marl.random_batches = 1;
        c.disruption = Some(train_closure(1..=3, 3600.0, 5400.0));
        c
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "full" => Some(ScenarioConfig::full()),
            "desk" => Some(ScenarioConfig::desk()),
            _ => None,
        }
    }

    /// Every problem found, not just the first.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.dt_s > 0.0) {
            errs.push("dt_s must be positive".into());
        }
        if !(self.horizon_s > 0.0) {
            errs.push("horizon_s must be positive".into());
        }
        if !(self.warmup_s >= 0.0 && self.warmup_s < self.horizon_s) {
            errs.push("warmup_s must lie in [0, horizon_s)".into());
        }
        if !(self.performance_window_s > 0.0) {
            errs.push("performance_window_s must be positive".into());
        }
        if self.grid.depots.is_empty() && self.fleet_size > 0 {
            errs.push("a fleet needs at least one depot".into());
        }
        errs.extend(self.demand.validate());
        errs.extend(self.mfd.validate());
        errs.extend(self.transit.validate());
        errs.extend(self.operator.validate());
        errs.extend(self.marl.validate());
        if self.resilience.weights.iter().any(|w| *w < 0.0) {
            errs.push("resilience.weights must be nonnegative".into());
        }
        if let Some(d) = &self.disruption {
            errs.extend(d.validate(self.horizon_s));
        }
        errs
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        let errs = cfg.validate();
        if errs.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).unwrap_or_default();
        hex_digest(text.as_bytes())
    }

    /// The same scenario without the disruption.
    pub fn nominal(&self) -> Self {
        ScenarioConfig { disruption: None, ..self.clone() }
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
