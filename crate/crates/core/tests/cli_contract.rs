//! The shipped binary's observable contract: exit codes, the files a run
//! leaves behind, their headers and fixed number formatting, and the
//! `JOBMOVER_SIM_LOG` switch.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_jobmover-sim");

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary should spawn")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("farm.conf");
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

const SMALL_FARM: &str = "num_servers = 4\n\
                          cores_per_server = 4\n\
                          horizon = 172800\n\
                          placement = spread\n\
                          workload = random\n";

#[test]
fn run_succeeds_and_writes_the_documented_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_FARM);
    let out_dir = dir.path().join("results");
    let out = run(
        &["run", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--seed", "5"],
        &[],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    for csv in ["baseline.csv", "mover.csv"] {
        let text = std::fs::read_to_string(out_dir.join(csv)).unwrap();
        assert!(
            text.starts_with(
                "time_s,used_cores,installed_cores,powered_on_cores,queued_jobs,cumulative_core_seconds\n"
            ),
            "{csv} header"
        );
    }

    let summary = std::fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    assert_eq!(summary, String::from_utf8_lossy(&out.stdout));
    assert!(summary.contains("seed: 5"));
    for key in ["efficiency_improvement: ", "moved_fraction: ", "exploitation_baseline: "] {
        let line = summary
            .lines()
            .find(|l| l.starts_with(key))
            .unwrap_or_else(|| panic!("summary lacks {key}"));
        let value = line.strip_prefix(key).unwrap().strip_suffix('%').unwrap();
        let (int, frac) = value.split_once('.').expect("fixed-point percentage");
        assert!(!int.is_empty() && frac.len() == 1, "one decimal in {line:?}");
    }
}

#[test]
fn algorithm_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_FARM);
    let out_dir = dir.path().join("results");
    let out = run(
        &[
            "run",
            "--config",
            &cfg,
            "--out",
            out_dir.to_str().unwrap(),
            "--algorithm",
            "ffd-repack",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let summary = std::fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    assert!(summary.contains("algorithm: ffd-repack"));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();

    let out = run(&["run", "--config", "/nonexistent/farm.conf"], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));

    let bad_key = write_config(dir.path(), "num_servers = 2\ncores_per_server = 2\nturbo = yes\n");
    let out = run(&["run", "--config", &bad_key], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("turbo"));
}

#[test]
fn trace_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // A 9-core job cannot run on 4-core servers.
    let trace = dir.path().join("bad.trace");
    std::fs::write(&trace, "0 9 3600 0\n").unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            "num_servers = 2\ncores_per_server = 4\nhorizon = 7200\nworkload = trace\ntrace_file = {}\n",
            trace.display()
        ),
    );
    let out = run(&["run", "--config", &cfg], &[]);
    assert_equals_one(&out);
}

fn assert_equals_one(out: &Output) {
    assert_eq!(
        out.status.code(),
        Some(1),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn usage_errors_exit_two() {
    // clap reports misuse (unknown flags, missing subcommand) on its own
    // exit code, distinct from config errors.
    let out = run(&["run"], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_then_trace_run_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_FARM);
    let trace_path = dir.path().join("jobs.trace");
    let out = run(
        &["gen", "--config", &cfg, "--out", trace_path.to_str().unwrap(), "--seed", "9"],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&trace_path).unwrap();
    assert!(text.starts_with("# submit_time_s cores runtime_s priority\n"));
    assert!(text.lines().count() > 1);

    // Re-running the same workload from the written trace gives the same
    // summary as generating it in-process.
    let direct_out = dir.path().join("direct");
    let out = run(
        &["run", "--config", &cfg, "--out", direct_out.to_str().unwrap(), "--seed", "9"],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));

    let replay_cfg = write_config(
        &dir.path().join("."),
        &format!(
            "num_servers = 4\ncores_per_server = 4\nhorizon = 172800\nplacement = spread\n\
             rng_seed = 9\nworkload = trace\ntrace_file = {}\n",
            trace_path.display()
        ),
    );
    let trace_out = dir.path().join("from_trace");
    let out = run(
        &["run", "--config", &replay_cfg, "--out", trace_out.to_str().unwrap()],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        std::fs::read_to_string(direct_out.join("summary.txt")).unwrap(),
        std::fs::read_to_string(trace_out.join("summary.txt")).unwrap()
    );
}

#[test]
fn sweep_emits_the_documented_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_FARM);
    let out_dir = dir.path().join("sweep");
    let out = run(
        &[
            "sweep",
            "--config",
            &cfg,
            "--axis",
            "servers",
            "--values",
            "2,3",
            "--seeds",
            "1,2",
            "--out",
            out_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "axis_value,seed,improvement_pct,moved_pct,exploitation_base,exploitation_mover"
    );
    assert_eq!(lines.len(), 5, "one row per (value, seed)");
    assert!(lines[1].starts_with("2,1,"));
    assert!(lines[4].starts_with("3,2,"));
}

#[test]
fn log_env_var_controls_verbosity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "num_servers = 1\ncores_per_server = 1\nhorizon = 7200\nworkload = worstcase\n",
    );
    let out_dir = dir.path().join("out");

    let quiet = run(
        &["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()],
        &[],
    );
    assert_eq!(quiet.status.code(), Some(0));
    assert!(quiet.stderr.is_empty(), "silent by default");

    let traced = run(
        &["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()],
        &[("JOBMOVER_SIM_LOG", "trace")],
    );
    assert_eq!(traced.status.code(), Some(0));
    let stderr = String::from_utf8_lossy(&traced.stderr);
    assert!(stderr.contains("TRACE"), "event log should appear: {stderr}");
}
