use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::Result;
use rhsim_core::engine::{baseline, run_with_baseline, Baseline, ScenarioConfig};
use rhsim_core::marl::Checkpoint;
use rhsim_core::strategies::StrategyKind;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub strategies: Vec<StrategyKind>,
    pub noise: Vec<f64>,
    /// Minutes.
    pub delays: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl SweepSpec {
    /// Strategy-major, then noise, delay and seed.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &strategy in &self.strategies {
            for &p in &self.noise {
                for &delay in &self.delays {
                    for &seed in &self.seeds {
                        out.push(Cell { strategy, p, delay, seed });
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub strategy: StrategyKind,
    pub p: f64,
    pub delay: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub strategy: String,
    pub p: f64,
    pub delay: f64,
    pub seed: u64,
    #[serde(rename = "R1")]
    pub r1: Option<f64>,
    #[serde(rename = "R2")]
    pub r2: Option<f64>,
    #[serde(rename = "R3")]
    pub r3: Option<f64>,
    #[serde(rename = "R4")]
    pub r4: Option<f64>,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub mean_wait_s: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub strategy: String,
    pub p: f64,
    pub delay: f64,
    pub seed: u64,
    pub error: String,
}

pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<Failure>,
}

/// Runs `f` on every item with `workers` threads; results keep input order.
pub fn pool<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.max(1).min(items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap_or_else(|e| e.into_inner()).into_iter().map(|r| r.expect("every slot filled")).collect()
}

fn cell_config(base: &ScenarioConfig, c: &Cell) -> ScenarioConfig {
    let mut cfg = base.clone();
    cfg.strategy = c.strategy;
    cfg.seed = c.seed;
    cfg.operator.noise = c.p;
    cfg.operator.response_delay_s = c.delay * 60.0;
    cfg
}

/// Baselines do not depend on noise or delay, so each (strategy, seed)
/// pair is simulated once.
pub fn run_sweep(base: &ScenarioConfig, spec: &SweepSpec, policy: Option<&Checkpoint>, workers: usize) -> SweepResult {
    let cells = spec.cells();
    let mut keys: Vec<(StrategyKind, u64)> = cells.iter().map(|c| (c.strategy, c.seed)).collect();
    keys.sort_by_key(|k| (k.0.name(), k.1));
    keys.dedup();
    let baselines: BTreeMap<(&str, u64), Result<Baseline, String>> = keys
        .iter()
        .zip(pool(&keys, workers, |&(strategy, seed)| {
            let c = cell_config(base, &Cell { strategy, p: 0.0, delay: 0.0, seed });
            baseline(&c, policy).map_err(|e| e.to_string())
        }))
        .map(|(k, b)| ((k.0.name(), k.1), b))
        .collect();
    let outcomes = pool(&cells, workers, |c| {
        let cfg = cell_config(base, c);
        let b = baselines[&(c.strategy.name(), c.seed)].clone()?;
        let rep = run_with_baseline(&cfg, policy, b).map_err(|e| e.to_string())?;
        let ind = rep.resilience.as_ref();
        Ok::<_, String>(SweepRow {
            strategy: c.strategy.name().into(),
            p: c.p,
            delay: c.delay,
            seed: c.seed,
            r1: ind.map(|r| r.r1),
            r2: ind.map(|r| r.r2),
            r3: ind.map(|r| r.r3),
            r4: ind.map(|r| r.r4),
            r: ind.map(|r| r.r),
            mean_wait_s: rep.summary.mean_wait_s,
        })
    });
    let mut result = SweepResult { rows: Vec::new(), failures: Vec::new() };
    for (c, o) in cells.iter().zip(outcomes) {
        match o {
            Ok(row) => result.rows.push(row),
            Err(error) => result.failures.push(Failure {
                strategy: c.strategy.name().into(),
                p: c.p,
                delay: c.delay,
                seed: c.seed,
                error,
            }),
        }
    }
    result
}

/// Mean of each indicator over seeds, per (strategy, p, delay).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatrixRow {
    pub strategy: String,
    pub p: f64,
    pub delay: f64,
    pub runs: usize,
    #[serde(rename = "R1")]
    pub r1: Option<f64>,
    #[serde(rename = "R2")]
    pub r2: Option<f64>,
    #[serde(rename = "R3")]
    pub r3: Option<f64>,
    #[serde(rename = "R4")]
    pub r4: Option<f64>,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub mean_wait_s: Option<f64>,
}

fn mean(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().filter(|x| x.is_finite()).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Groups in first-seen order.
pub fn aggregate(rows: &[SweepRow]) -> Vec<MatrixRow> {
    let mut order: Vec<(String, u64, u64)> = Vec::new();
    for r in rows {
        let k = (r.strategy.clone(), r.p.to_bits(), r.delay.to_bits());
        if !order.contains(&k) {
            order.push(k);
        }
    }
    order
        .into_iter()
        .map(|(s, p, d)| {
            let g: Vec<&SweepRow> =
                rows.iter().filter(|r| r.strategy == s && r.p.to_bits() == p && r.delay.to_bits() == d).collect();
            MatrixRow {
                strategy: s,
                p: f64::from_bits(p),
                delay: f64::from_bits(d),
                runs: g.len(),
                r1: mean(g.iter().map(|r| r.r1)),
                r2: mean(g.iter().map(|r| r.r2)),
                r3: mean(g.iter().map(|r| r.r3)),
                r4: mean(g.iter().map(|r| r.r4)),
                r: mean(g.iter().map(|r| r.r)),
                mean_wait_s: mean(g.iter().map(|r| r.mean_wait_s)),
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, header: &str, rows: &[T]) -> Result<()> {
    if rows.is_empty() {
        std::fs::write(path, format!("{header}\n"))?;
        return Ok(());
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const SWEEP_HEADER: &str = "strategy,p,delay,seed,R1,R2,R3,R4,R,mean_wait_s";
pub const MATRIX_HEADER: &str = "strategy,p,delay,runs,R1,R2,R3,R4,R,mean_wait_s";
