mod config;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use rhsim_core::engine::{evaluate_policy, initial_policy, run, train, write_run, ScenarioConfig, TrainOptions};
use rhsim_core::marl::Checkpoint;
use rhsim_core::strategies::StrategyKind;
use serde_json::Value;

use config::ConfigError;
use sweep::{aggregate, run_sweep, write_csv, SweepRow, SweepSpec, MATRIX_HEADER, SWEEP_HEADER};

/// Multi-modal ride-hailing simulator.
///
/// Exit codes: 0 success, 2 configuration error, 3 runtime invariant
/// violation, 4 sweep finished with failed cells, 1 anything else.
#[derive(Parser)]
#[command(name = "rhsim", version)]
struct Cli {
    /// Root directory for outputs that are not given an explicit path.
    #[arg(long, env = "RHSIM_OUT_ROOT", default_value = "runs", global = true)]
    out_root: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Scenario {
    /// Starting preset: `desk` or `full`.
    #[arg(long, default_value = "desk")]
    preset: String,
    /// JSON config; its keys replace the preset's.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set operator.noise=0.1`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    strategy: Option<StrategyKind>,
}

impl Scenario {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        if let Some(s) = self.strategy {
            overrides.push(format!("strategy=\"{s}\""));
        }
        config::load(&self.preset, self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write its output directory.
    Run {
        #[command(flatten)]
        scenario: Scenario,
        /// Policy checkpoint for the `marl` strategy; defaults to the
        /// config's `marl_checkpoint`.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Output directory; defaults to a name under the output root.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the rebalancing policy on undisrupted sessions.
    Train {
        #[command(flatten)]
        scenario: Scenario,
        /// Total sessions, including any already in a resumed checkpoint.
        #[arg(long, default_value_t = 600)]
        sessions: usize,
        #[arg(long, default_value_t = 50)]
        checkpoint_every: usize,
        /// Continue from `checkpoint.json` in the output directory.
        #[arg(long)]
        resume: bool,
        /// Held-out seeds on which trained and untrained policies are
        /// compared afterwards.
        #[arg(long, value_delimiter = ',')]
        eval_seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every strategy × noise × delay × seed cell.
    Sweep {
        #[command(flatten)]
        scenario: Scenario,
        #[arg(long, value_delimiter = ',', default_value = "none,random,centralized,decentralized")]
        strategies: Vec<StrategyKind>,
        /// Prediction noise levels p.
        #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.15,0.2")]
        noise: Vec<f64>,
        /// Response delays in minutes.
        #[arg(long, value_delimiter = ',', default_value = "0,10,20,30")]
        delays: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        /// Worker threads; results do not depend on this.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seed-averaged indicator table from run directories or sweep CSVs.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn read_policy(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    Ok(Checkpoint::from_json(&text)?)
}

fn policy_for(cfg: &ScenarioConfig, flag: Option<&Path>) -> Result<Option<Checkpoint>> {
    match flag.map(Path::to_path_buf).or_else(|| cfg.marl_checkpoint.as_ref().map(PathBuf::from)) {
        Some(p) => Ok(Some(read_policy(&p)?)),
        None => Ok(None),
    }
}

fn cmd_run(root: &Path, scenario: &Scenario, policy: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let cfg = scenario.load()?;
    let policy = policy_for(&cfg, policy)?;
    let report = run(&cfg, policy.as_ref())?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| {
        root.join(format!("{}-{}-s{}-{}", cfg.name, cfg.strategy, cfg.seed, &cfg.hash()[..8]))
    });
    let manifest = write_run(&dir, &cfg, &report)?;
    let s = &report.summary;
    println!("{}", dir.display());
    println!(
        "users {} completed {} abandoned {} mean wait {} R {}",
        s.users,
        s.completed,
        s.abandoned,
        fmt_opt(s.mean_wait_s),
        fmt_opt(report.resilience.as_ref().map(|r| r.r)),
    );
    println!("config {}", manifest.config_hash);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    root: &Path,
    scenario: &Scenario,
    sessions: usize,
    checkpoint_every: usize,
    resume: bool,
    eval_seeds: &[u64],
    out: Option<&Path>,
) -> Result<()> {
    let mut cfg = scenario.load()?;
    cfg.strategy = StrategyKind::Marl;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| root.join(format!("{}-train-s{}", cfg.name, cfg.seed)));
    std::fs::create_dir_all(&dir)?;
    let latest = dir.join("checkpoint.json");
    let start = if resume && latest.exists() { Some(read_policy(&latest)?) } else { None };
    let save = |c: &Checkpoint| -> rhsim_core::Result<()> {
        let text = c.to_json()?;
        std::fs::write(dir.join(format!("checkpoint_{:04}.json", c.sessions)), &text)?;
        std::fs::write(&latest, &text)?;
        Ok(())
    };
    let outcome = train(&cfg, TrainOptions { sessions, checkpoint_every }, start, save)?;
    write_csv(&dir.join("training_curve.csv"), "session,mean_reward,mean_wait_s", &outcome.curve)?;
    println!("{}", dir.display());
    println!("sessions {}", outcome.checkpoint.sessions);
    if !eval_seeds.is_empty() {
        let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
        let trained = mean(evaluate_policy(&cfg, &outcome.checkpoint, eval_seeds)?);
        let untrained = mean(evaluate_policy(&cfg, &initial_policy(&cfg)?, eval_seeds)?);
        println!("mean wait trained {trained:.1} s untrained {untrained:.1} s");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    root: &Path,
    scenario: &Scenario,
    spec: SweepSpec,
    workers: Option<usize>,
    policy: Option<&Path>,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let cfg = scenario.load()?;
    let policy = policy_for(&cfg, policy)?;
    if spec.strategies.contains(&StrategyKind::Marl) && policy.is_none() {
        return Err(ConfigError("sweeping `marl` needs --policy".into()).into());
    }
    let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| root.join(format!("{}-sweep", cfg.name)));
    std::fs::create_dir_all(&dir)?;
    let result = run_sweep(&cfg, &spec, policy.as_ref(), workers);
    write_csv(&dir.join("sweep.csv"), SWEEP_HEADER, &result.rows)?;
    write_csv(&dir.join("r_matrix.csv"), MATRIX_HEADER, &aggregate(&result.rows))?;
    println!("{}", dir.display());
    println!("{} rows, {} failed", result.rows.len(), result.failures.len());
    if result.failures.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    write_csv(&dir.join("failures.csv"), "strategy,p,delay,seed,error", &result.failures)?;
    for f in &result.failures {
        eprintln!("failed: {} p={} delay={} seed={}: {}", f.strategy, f.p, f.delay, f.seed, f.error);
    }
    Ok(ExitCode::from(4))
}

fn run_dir_row(dir: &Path) -> Result<SweepRow> {
    let path = dir.join("resilience.json");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).with_context(|| path.display().to_string())?)?;
    let ind = |k: &str| v["indicators"][k].as_f64();
    Ok(SweepRow {
        strategy: v["strategy"].as_str().unwrap_or("?").into(),
        p: v["noise"].as_f64().unwrap_or(0.0),
        delay: v["response_delay_s"].as_f64().unwrap_or(0.0) / 60.0,
        seed: v["seed"].as_u64().unwrap_or(0),
        r1: ind("R1"),
        r2: ind("R2"),
        r3: ind("R3"),
        r4: ind("R4"),
        r: ind("R"),
        mean_wait_s: v["mean_wait_s"].as_f64(),
    })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.3}"))
}

fn cmd_report(inputs: &[PathBuf], csv_out: Option<&Path>) -> Result<()> {
    let mut rows = Vec::new();
    for p in inputs {
        if p.is_dir() {
            rows.push(run_dir_row(p)?);
        } else {
            let mut r = csv::Reader::from_path(p).with_context(|| p.display().to_string())?;
            for row in r.deserialize() {
                rows.push(row?);
            }
        }
    }
    let table = aggregate(&rows);
    println!("{:<14} {:>5} {:>6} {:>4} {:>7} {:>7} {:>7} {:>7} {:>7} {:>9}", "strategy", "p", "delay", "n", "R1", "R2", "R3", "R4", "R", "wait_s");
    for m in &table {
        println!(
            "{:<14} {:>5} {:>6} {:>4} {:>7} {:>7} {:>7} {:>7} {:>7} {:>9}",
            m.strategy,
            m.p,
            m.delay,
            m.runs,
            fmt_opt(m.r1),
            fmt_opt(m.r2),
            fmt_opt(m.r3),
            fmt_opt(m.r4),
            fmt_opt(m.r),
            m.mean_wait_s.map_or("-".into(), |w| format!("{w:.1}")),
        );
    }
    if let Some(path) = csv_out {
        write_csv(path, MATRIX_HEADER, &table)?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    let root = &cli.out_root;
    match cli.cmd {
        Cmd::Run { scenario, policy, out } => cmd_run(root, &scenario, policy.as_deref(), out.as_deref())?,
        Cmd::Train { scenario, sessions, checkpoint_every, resume, eval_seeds, out } => {
            cmd_train(root, &scenario, sessions, checkpoint_every, resume, &eval_seeds, out.as_deref())?
        }
        Cmd::Sweep { scenario, strategies, noise, delays, seeds, workers, policy, out } => {
            let spec = SweepSpec { strategies, noise, delays, seeds };
            return cmd_sweep(root, &scenario, spec, workers, policy.as_deref(), out.as_deref());
        }
        Cmd::Report { inputs, csv } => cmd_report(&inputs, csv.as_deref())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<rhsim_core::Error>() {
        Some(rhsim_core::Error::Config(_)) => 2,
        Some(rhsim_core::Error::Invariant { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let keys = config::key_table();
    let matches = Cli::command()
        .after_long_help(keys.clone())
        .mut_subcommands(|c| c.after_long_help(keys.clone()))
        .get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
