use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::demand::csv_err;
use crate::error::Result;
use crate::resilience::ResilienceReport;

use super::config::{hex_digest, ScenarioConfig};
use super::run::{Baseline, RunReport};

pub const OUTPUT_FILES: [&str; 9] = [
    "users.csv",
    "fleet_states.csv",
    "matches.csv",
    "performance.csv",
    "resilience.json",
    "region_traffic.csv",
    "stranded.csv",
    "decisions.csv",
    "config.json",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub strategy: String,
    pub crate_version: String,
    /// SHA-256 of every output file.
    pub files: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ResilienceFile {
    strategy: String,
    seed: u64,
    noise: f64,
    response_delay_s: f64,
    baseline: Baseline,
    mean_wait_s: Option<f64>,
    indicators: Option<ResilienceReport>,
}

fn csv_bytes<T: Serialize>(rows: &[T], header: &str) -> Result<Vec<u8>> {
    if rows.is_empty() {
        return Ok(format!("{header}\n").into_bytes());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| std::io::Error::other(e.to_string()).into())
}

/// Writes every output file plus `manifest.json` into `dir`.
pub fn write_run(dir: &Path, cfg: &ScenarioConfig, report: &RunReport) -> Result<Manifest> {
    let r = &report.records;
    let resilience = ResilienceFile {
        strategy: cfg.strategy.name().into(),
        seed: cfg.seed,
        noise: cfg.operator.noise,
        response_delay_s: cfg.operator.response_delay_s,
        baseline: report.baseline,
        mean_wait_s: report.summary.mean_wait_s,
        indicators: report.resilience.clone(),
    };
    let contents: Vec<(&str, Vec<u8>)> = vec![
        ("users.csv", csv_bytes(&r.users, "user_id,total_time_s,total_dist_m,transfers,waits_s,modes,completed")?),
        ("fleet_states.csv", csv_bytes(&r.fleet, "t,idle,relocating,pickup,serving")?),
        ("matches.csv", csv_bytes(&r.matches, "t,user_id,veh_id,wait_s,pickup_dist_m")?),
        ("performance.csv", csv_bytes(&report.performance, "t,F,W")?),
        ("resilience.json", serde_json::to_vec_pretty(&resilience)?),
        ("region_traffic.csv", csv_bytes(&r.traffic, "region,t,n_car,n_bus,n_rh,v_car,v_bus")?),
        ("stranded.csv", csv_bytes(&r.stranded, "t,user_id,station_id,cause")?),
        ("decisions.csv", csv_bytes(&r.decisions, "t,veh_id,depot_id,strategy,utility")?),
        ("config.json", cfg.to_json()?.into_bytes()),
    ];
    fs::create_dir_all(dir)?;
    let mut files = BTreeMap::new();
    for (name, bytes) in contents {
        files.insert(name.to_string(), hex_digest(&bytes));
        fs::write(dir.join(name), bytes)?;
    }
    let manifest = Manifest {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        strategy: cfg.strategy.name().into(),
        crate_version: env!("CARGO_PKG_VERSION").into(),
        files,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}
