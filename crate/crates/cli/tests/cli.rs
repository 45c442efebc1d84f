use std::path::Path;
use std::process::{Command, Output};

fn bee(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bee"))
        .args(args)
        .env("BEE_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, agent: &str) -> String {
    let text = format!(
        r#"{{
  "env": {{"kind": "point_mass", "horizon": 40, "reward_mode": "dense"}},
  "agent": {agent},
  "run": {{"seeds": [0, 1], "total_steps": 200, "eval_every": 100, "eval_episodes": 1}},
  "output_dir": "{name}"
}}"#
    );
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL_AGENT: &str = r#"{"type": "bac", "hidden_sizes": [8, 8], "batch_size": 8, "warmup_transitions": 20}"#;

#[test]
fn run_writes_csvs_and_manifest_under_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "basic", SMALL_AGENT);
    let out = bee(dir.path(), &["run", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run_dir = dir.path().join("basic");
    for f in ["seed_0.csv", "seed_1.csv", "manifest.json", "config.json"] {
        assert!(run_dir.join(f).exists(), "missing {f}");
    }
    let csv = std::fs::read_to_string(run_dir.join("seed_0.csv")).unwrap();
    assert!(csv.starts_with("step,episode_return,success,"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let cfg = write_config(d.path(), "rep", SMALL_AGENT);
        assert!(bee(d.path(), &["run", "--config", &cfg]).status.success());
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("rep/seed_1.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn seed_offset_shifts_every_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "shard", SMALL_AGENT);
    let out = bee(dir.path(), &["--seed-offset", "10", "run", "--config", &cfg]);
    assert!(out.status.success());
    assert!(dir.path().join("shard/seed_10.csv").exists());
    assert!(dir.path().join("shard/seed_11.csv").exists());
    assert!(!dir.path().join("shard/seed_0.csv").exists());
}

#[test]
fn invalid_config_reports_every_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"env": {"kind": "point_mass", "horizon": 40, "reward_mode": "dense"},
            "agent": {"type": "bac", "lambda": 3.0, "gamma": 2.0},
            "run": {"seeds": [], "total_steps": 10, "eval_every": 100},
            "output_dir": "bad"}"#,
    )
    .unwrap();
    let out = bee(dir.path(), &["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for field in ["lambda", "gamma", "seeds", "total_steps"] {
        assert!(err.contains(field), "{field} not reported: {err}");
    }
}

#[test]
fn numeric_failure_exits_nonzero_and_keeps_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let agent = r#"{"type": "bac", "hidden_sizes": [8, 8], "batch_size": 8, "warmup_transitions": 20,
                    "init_alpha": 1e300, "auto_alpha": false}"#;
    let cfg = write_config(dir.path(), "boom", agent);
    let out = bee(dir.path(), &["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let csv = std::fs::read_to_string(dir.path().join("boom/seed_0.csv")).unwrap();
    assert!(csv.starts_with("step,"));
    let manifest = std::fs::read_to_string(dir.path().join("boom/manifest.json")).unwrap();
    assert!(manifest.contains("numeric"), "{manifest}");
}

#[test]
fn tabular_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bee(dir.path(), &["tabular-suite"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.lines().count() >= 5);
    assert!(text.lines().all(|l| l.starts_with("[PASS]")), "{text}");
}

#[test]
fn grid_compare_writes_table_and_heatmaps() {
    let dir = tempfile::tempdir().unwrap();
    let out = bee(dir.path(), &["grid-compare", "--lambda", "0,0.5", "--seeds", "2"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("lambda 0.5:"));
    let grid = dir.path().join("grid_compare");
    let table = std::fs::read_to_string(grid.join("grid_compare.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(grid.join("grid_lambda0.5_seed1.pgm").exists());
    assert!(grid.join("grid_lambda0_seed0.csv").exists());
}

#[test]
fn grid_compare_rejects_lambda_outside_unit_interval() {
    let dir = tempfile::tempdir().unwrap();
    let out = bee(dir.path(), &["grid-compare", "--lambda", "0,1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn particle_compare_writes_a_heatmap_pair_per_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = bee(
        dir.path(),
        &["particle-compare", "--operators", "bee,standard", "--checkpoints", "5,10", "--seeds", "1"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let pc = dir.path().join("particle_compare");
    for op in ["bee", "standard"] {
        for it in [5, 10] {
            for ext in ["csv", "pgm"] {
                assert!(pc.join(format!("{op}_seed0_iter{it}.{ext}")).exists());
            }
        }
    }
    assert!(pc.join("oracle.pgm").exists());
    let table = std::fs::read_to_string(pc.join("particle_compare.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
}

#[test]
fn particle_compare_rejects_unknown_operator() {
    let dir = tempfile::tempdir().unwrap();
    let out = bee(dir.path(), &["particle-compare", "--operators", "bee,greedy"]);
    assert!(!out.status.success());
}

#[test]
fn report_summarizes_a_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "rep", SMALL_AGENT);
    assert!(bee(dir.path(), &["run", "--config", &cfg]).status.success());
    let out = bee(dir.path(), &["report", "--dir", dir.path().join("rep").to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("seed_0.csv") && text.contains("seed_1.csv"));
    assert!(text.contains("over 2 runs"));
}

#[test]
fn report_on_empty_directory_says_so() {
    let dir = tempfile::tempdir().unwrap();
    let out = bee(dir.path(), &["report", "--dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("no run CSVs found"));
}
