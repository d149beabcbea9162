//! End-to-end checks of the binary: reproducible artifacts, replay, and the
//! error surface a user actually sees.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_selfwiring"))
}

fn small_config() -> &'static str {
    r#"{
  "version": 1,
  "half_length": 1.5,
  "spacing": 0.25,
  "dt": 0.001,
  "horizon": 0.01,
  "species": [
    { "diffusion": 1.0, "decay": 1.0 },
    { "diffusion": 1.0, "decay": 1.0 },
    { "diffusion": 1.0, "decay": 1.0 }
  ],
  "epsilon": 0.05,
  "sigma": 0.2,
  "beta": 15.0,
  "gamma": 10.0,
  "soma_layout": { "layout": "explicit", "positions": [[0.2, -0.3]] },
  "cones_per_soma": 1,
  "seed": 11,
  "snapshot_every": 5
}"#
}

fn run_dir(root: &Path) -> PathBuf {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with("run-"))
        .collect();
    assert_eq!(dirs.len(), 1, "expected exactly one run directory in {root:?}");
    dirs.pop().unwrap()
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn identical_runs_emit_identical_bytes() {
    let work = TempDir::new().unwrap();
    let config = work.path().join("config.json");
    fs::write(&config, small_config()).unwrap();

    let roots = [work.path().join("a"), work.path().join("b")];
    for root in &roots {
        let out = bin()
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(root)
            .output()
            .unwrap();
        assert_success(&out);
    }

    let (da, db) = (run_dir(&roots[0]), run_dir(&roots[1]));
    assert_eq!(da.file_name(), db.file_name(), "config hash keyed directories diverged");
    let expected = [
        "config.json",
        "trajectory.csv",
        "contacts.jsonl",
        "summary.json",
        "fields.json",
        "fields.bin",
        "trajectory.svg",
        "manifest.json",
    ];
    for name in expected {
        let (fa, fb) = (da.join(name), db.join(name));
        assert!(fa.exists(), "{name} missing");
        if name == "manifest.json" {
            // wall-clock stamps are the only permitted difference
            let mut ma: serde_json::Value =
                serde_json::from_slice(&fs::read(&fa).unwrap()).unwrap();
            let mut mb: serde_json::Value =
                serde_json::from_slice(&fs::read(&fb).unwrap()).unwrap();
            for m in [&mut ma, &mut mb] {
                m["started_unix_ms"] = 0.into();
                m["finished_unix_ms"] = 0.into();
            }
            assert_eq!(ma, mb);
        } else {
            assert_eq!(fs::read(&fa).unwrap(), fs::read(&fb).unwrap(), "{name} differs");
        }
    }

    // 1 soma + 1 cone, 10 steps plus the recorded initial state
    let csv = fs::read_to_string(da.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "step,time,walker_id,kind,x,y,active");
    assert_eq!(lines.count(), 2 * 11);

    // every manifest entry matches the bytes on disk
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(da.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), expected.len() - 1);
    for record in files {
        let body = fs::read(da.join(record["name"].as_str().unwrap())).unwrap();
        assert_eq!(body.len() as u64, record["bytes"].as_u64().unwrap());
    }
}

#[test]
fn replay_plot_reproduces_the_svg() {
    let work = TempDir::new().unwrap();
    let config = work.path().join("config.json");
    fs::write(&config, small_config()).unwrap();
    let root = work.path().join("out");
    let out = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&root)
        .output()
        .unwrap();
    assert_success(&out);

    let dir = run_dir(&root);
    let replay = work.path().join("replay.svg");
    let out = bin()
        .arg("replay-plot")
        .arg(&dir)
        .arg("--output")
        .arg(&replay)
        .output()
        .unwrap();
    assert_success(&out);
    assert_eq!(
        fs::read(dir.join("trajectory.svg")).unwrap(),
        fs::read(&replay).unwrap(),
        "replay from the CSV drew a different picture"
    );
}

#[test]
fn env_var_sets_the_output_root() {
    let work = TempDir::new().unwrap();
    let config = work.path().join("config.json");
    fs::write(&config, small_config()).unwrap();
    let root = work.path().join("from-env");
    let out = bin()
        .args(["run", "--config"])
        .arg(&config)
        .env("SELFWIRING_OUT", &root)
        .output()
        .unwrap();
    assert_success(&out);
    run_dir(&root);
}

#[test]
fn quiet_run_prints_nothing() {
    let work = TempDir::new().unwrap();
    let config = work.path().join("config.json");
    fs::write(&config, small_config()).unwrap();
    let out = bin()
        .args(["run", "--quiet", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(work.path().join("out"))
        .output()
        .unwrap();
    assert_success(&out);
    assert!(out.stdout.is_empty());
}

#[test]
fn bad_configs_fail_with_pointed_messages() {
    let work = TempDir::new().unwrap();

    let cases = [
        (r#"{"experiment": 9}"#, "1..=4"),
        (r#"{"experiment": 3, "epsilon": -0.5}"#, "epsilon"),
        (&small_config().replace("\"dt\": 0.001", "\"dt\": -1.0"), "dt"),
        ("{\n  \"version\": 1,\n  oops\n}", "line 3"),
    ];
    for (i, (body, needle)) in cases.iter().enumerate() {
        let path = work.path().join(format!("bad{i}.json"));
        fs::write(&path, body).unwrap();
        let out = bin()
            .args(["run", "--config"])
            .arg(&path)
            .arg("--out")
            .arg(work.path().join("out"))
            .output()
            .unwrap();
        assert!(!out.status.success(), "case {i} unexpectedly succeeded");
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(
            stderr.contains(needle),
            "case {i}: expected {needle:?} in stderr, got:\n{stderr}"
        );
    }
}

#[test]
fn sweep_emits_table_and_plot() {
    let work = TempDir::new().unwrap();
    let out = bin()
        .args(["epsilon-sweep", "--epsilons", "0.04,0.05", "--out"])
        .arg(work.path())
        .output()
        .unwrap();
    assert_success(&out);
    let dirs: Vec<PathBuf> = fs::read_dir(work.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with("sweep-"))
        .collect();
    assert_eq!(dirs.len(), 1);
    let csv = fs::read_to_string(dirs[0].join("sweep.csv")).unwrap();
    assert!(csv.starts_with("epsilon,v_eps,residual,iterations,integral,quadrature_rel_diff"));
    assert_eq!(csv.lines().count(), 3);
    for name in ["sweep.json", "sweep.svg", "manifest.json"] {
        assert!(dirs[0].join(name).exists(), "{name} missing");
    }
}

#[test]
fn validate_exits_cleanly() {
    let out = bin().arg("validate").output().unwrap();
    assert_success(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("all checks passed"), "unexpected output:\n{stdout}");
}
