use std::ffi::OsStr;
use std::path::Path;
use std::process::{Command, Output};

use rhsim_core::engine::{initial_policy, ScenarioConfig, OUTPUT_FILES};
use rhsim_core::marl::Checkpoint;

fn rhsim<S: AsRef<OsStr>>(root: &Path, args: &[S]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rhsim"))
        .args(args)
        .env("RHSIM_OUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

// short sessions keep the tests quick
const SHORT: [&str; 4] = ["--set", "horizon_s=1800", "--set", "warmup_s=600"];

fn with(args: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    v.extend(SHORT.map(String::from));
    v.extend(["--set", "disruption=null", "--set", "demand.total_users=250"].map(String::from));
    v
}

#[test]
fn run_writes_every_output_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(&rhsim(tmp.path(), &["run", "--strategy", "none"]));
    let dir = Path::new(out.lines().next().unwrap());
    assert!(dir.starts_with(tmp.path()));
    for f in OUTPUT_FILES.iter().chain(&["manifest.json"]) {
        assert!(dir.join(f).is_file(), "{f}");
    }
}

#[test]
fn same_seed_gives_the_same_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        ok(&rhsim(tmp.path(), &["run", "--seed", "7", "--out", d.to_str().unwrap()]));
    }
    let read = |d: &Path| std::fs::read(d.join("manifest.json")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn config_file_keys_replace_the_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, r#"{"seed": 11, "operator": {"noise": 0.1}}"#).unwrap();
    let dir = tmp.path().join("r");
    ok(&rhsim(tmp.path(), &["run", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]));
    let used = ScenarioConfig::from_json(&std::fs::read_to_string(dir.join("config.json")).unwrap()).unwrap();
    assert_eq!(used.seed, 11);
    assert_eq!(used.operator.noise, 0.1);
    assert_eq!(used.fleet_size, ScenarioConfig::desk().fleet_size);
}

#[test]
fn configuration_errors_exit_with_two_and_write_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("never");
    let d = dir.to_str().unwrap();
    for args in [
        vec!["run", "--config", "/definitely/missing.json", "--out", d],
        vec!["run", "--set", "no_such_key=1", "--out", d],
        vec!["run", "--set", "dt_s=-1", "--out", d],
        vec!["run", "--preset", "huge", "--out", d],
        vec!["run", "--strategy", "marl", "--out", d],
    ] {
        let o = rhsim(tmp.path(), &args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!dir.exists(), "{args:?}");
    }
}

#[test]
fn help_lists_config_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let help = ok(&rhsim(tmp.path(), &["run", "--help"]));
    for key in ["operator.noise", "operator.response_delay_s", "marl.lr", "fleet_size", "demand.rh_market_share"] {
        assert!(help.contains(key), "{key}");
    }
}

#[test]
fn zero_training_sessions_keep_the_initial_policy() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("t");
    ok(&rhsim(tmp.path(), &["train", "--sessions", "0", "--out", dir.to_str().unwrap()]));
    let c = Checkpoint::from_json(&std::fs::read_to_string(dir.join("checkpoint.json")).unwrap()).unwrap();
    assert_eq!(c, initial_policy(&ScenarioConfig::desk()).unwrap());
}

#[test]
fn training_resumes_with_a_continuous_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("t");
    let d = dir.to_str().unwrap();
    let args = |n: &str, resume: bool| {
        let mut a = with(&["train", "--sessions", n, "--checkpoint-every", "2", "--out", d]);
        if resume {
            a.push("--resume".into());
        }
        a
    };
    ok(&rhsim(tmp.path(), &args("2", false)));
    let first = std::fs::read_to_string(dir.join("training_curve.csv")).unwrap();
    ok(&rhsim(tmp.path(), &args("3", true)));
    let resumed = std::fs::read_to_string(dir.join("training_curve.csv")).unwrap();
    assert!(resumed.starts_with(&first));
    let sessions: Vec<&str> = resumed.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(sessions, ["0", "1", "2"]);
    assert!(dir.join("checkpoint_0002.json").is_file());
    assert!(dir.join("checkpoint_0003.json").is_file());
}

#[test]
fn single_cell_sweep_has_one_row_and_is_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| {
        let dir = tmp.path().join(name);
        let d = dir.to_str().unwrap();
        let args = ["sweep", "--strategies", "random", "--noise", "0.1", "--delays", "0", "--seeds", "3"];
        ok(&rhsim(tmp.path(), &[&args[..], &["--workers", workers, "--out", d]].concat()));
        std::fs::read_to_string(dir.join("sweep.csv")).unwrap()
    };
    let a = run("a", "1");
    assert_eq!(a.lines().count(), 2);
    assert!(a.starts_with("strategy,p,delay,seed,R1,R2,R3,R4,R,mean_wait_s\nrandom,0.1,0.0,3,"));
    assert_eq!(run("b", "3"), a);
}

#[test]
fn sweep_rows_follow_the_cartesian_product() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("s");
    let d = dir.to_str().unwrap();
    let args = with(&[
        "sweep", "--strategies", "none,random", "--noise", "0,0.2", "--delays", "0,10", "--seeds", "1,2", "--out", d,
    ]);
    // short runs without a disruption have no indicators, only waits
    ok(&rhsim(tmp.path(), &args));
    let csv = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2 * 2);
    let matrix = std::fs::read_to_string(dir.join("r_matrix.csv")).unwrap();
    assert_eq!(matrix.lines().count(), 1 + 2 * 2 * 2);
    let report = ok(&rhsim(tmp.path(), &["report", dir.join("sweep.csv").to_str().unwrap()]));
    assert_eq!(report.lines().count(), 1 + 8);
    assert!(!dir.join("failures.csv").exists());
}

#[test]
fn sweeping_marl_without_a_policy_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rhsim(tmp.path(), &["sweep", "--strategies", "marl", "--seeds", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_reads_run_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let mut dirs = Vec::new();
    for seed in ["1", "2"] {
        let out = ok(&rhsim(tmp.path(), &["run", "--strategy", "centralized", "--seed", seed]));
        dirs.push(out.lines().next().unwrap().to_string());
    }
    let csv = tmp.path().join("table.csv");
    let mut args = vec!["report", "--csv", csv.to_str().unwrap()];
    args.extend(dirs.iter().map(String::as_str));
    let text = ok(&rhsim(tmp.path(), &args));
    assert!(text.lines().nth(1).unwrap().starts_with("centralized"));
    let table = std::fs::read_to_string(csv).unwrap();
    let row: Vec<&str> = table.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[..4], ["centralized", "0.0", "0.0", "2"]);
}
