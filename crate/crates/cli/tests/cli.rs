use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

use swarm_lattice::config;

const BIN: &str = env!("CARGO_BIN_EXE_swarm-lattice");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A small, fast square-lattice scenario.
fn small_config(dir: &Path) -> PathBuf {
    let text = fs::read_to_string(configs().join("square.toml")).unwrap();
    let text = text
        .replace("N = 100", "N = 16")
        .replace("r = 2.0", "r = 0.8")
        .replace("t_max = 200.0", "t_max = 25.0");
    let path = dir.join("small.toml");
    fs::write(&path, text).unwrap();
    path
}

fn simulate(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn manifest(dir: &Path) -> toml::Table {
    fs::read_to_string(dir.join("manifest.toml")).unwrap().parse().unwrap()
}

fn assert_digests_match(dir: &Path) {
    let m = manifest(dir);
    let outputs = m["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for o in outputs {
        let name = o["path"].as_str().unwrap();
        let bytes = fs::read(dir.join(name)).unwrap();
        assert_eq!(o["bytes"].as_integer().unwrap() as usize, bytes.len(), "{name}");
        assert_eq!(o["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)), "{name}");
    }
}

#[test]
fn simulate_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let config = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let ra = simulate(&config, &a, &["--seed", "42"]);
    let rb = simulate(&config, &b, &["--seed", "42"]);
    assert!(matches!(ra.status.code(), Some(0 | 2)), "{}", stderr(&ra));
    assert_eq!(ra.status.code(), rb.status.code());
    for name in ["trace.csv", "snapshots.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert_eq!(ra.stdout, rb.stdout);
    assert_digests_match(&a);

    let trace = fs::read_to_string(a.join("trace.csv")).unwrap();
    assert!(trace.lines().next().unwrap().starts_with("t,"));
    assert!(trace.lines().count() > 10);
}

#[test]
fn manifest_echoes_the_resolved_scenario() {
    let tmp = TempDir::new().unwrap();
    let config = small_config(tmp.path());
    let out = tmp.path().join("run");
    let r = simulate(&config, &out, &["--seed", "7", "--set", "L=6", "--set", "G_r=22", "--set", "G_n=1"]);
    assert!(matches!(r.status.code(), Some(0 | 2)), "{}", stderr(&r));

    let m = manifest(&out);
    assert_eq!(m["master_seed"].as_integer(), Some(7));
    assert_eq!(m["command"].as_str(), Some("simulate"));
    let echoed = config::from_table(m["config"].as_table().unwrap()).unwrap();
    let expected = config::load(&config, &["L=6".into(), "G_r=22".into(), "G_n=1".into(), "seed=7".into()]).unwrap();
    assert_eq!(echoed, expected);
    assert_eq!(echoed.control.lattice.links(), 6);
    assert!(m["phases"].as_array().is_some_and(|p| !p.is_empty()));
}

#[test]
fn missing_required_key_is_reported() {
    let tmp = TempDir::new().unwrap();
    let text = fs::read_to_string(configs().join("square.toml")).unwrap();
    let text: String = text.lines().filter(|l| !l.starts_with("R_min")).map(|l| format!("{l}\n")).collect();
    let path = tmp.path().join("broken.toml");
    fs::write(&path, text).unwrap();
    let r = simulate(&path, &tmp.path().join("out"), &[]);
    assert_eq!(r.status.code(), Some(1));
    let msg = stderr(&r);
    assert!(msg.contains("R_min") && msg.contains("real > 0"), "{msg}");
}

#[test]
fn usage_errors_exit_with_one() {
    let config = configs().join("square.toml");
    let r = run(&["suite", "bogus", "--config", config.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
    let r = run(&["simulate", "--config", config.to_str().unwrap(), "--set", "nonsense=1"]);
    assert_eq!(r.status.code(), Some(1));
    assert!(stderr(&r).contains("nonsense"));
    let r = run(&["--help"]);
    assert_eq!(r.status.code(), Some(0));
}

#[test]
fn tune_suite_writes_tables_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let config = small_config(tmp.path());
    let out = tmp.path().join("tune");
    let r = run(&[
        "suite",
        "tune",
        "--config",
        config.to_str().unwrap(),
        "--trials",
        "2",
        "--jobs",
        "2",
        "--grid",
        "G_r=10,15",
        "G_n=8",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", stderr(&r));
    assert_digests_match(&out);

    let trials = fs::read_to_string(out.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 1 + 2 * 2);
    let aggregates = fs::read_to_string(out.join("aggregates.csv")).unwrap();
    assert_eq!(aggregates.lines().count(), 1 + 2);
    assert!(out.join("figures.csv").exists());
    let m = manifest(&out);
    assert_eq!(m["master_seed"].as_integer(), Some(1));
}

fn write_snapshots(dir: &Path, rows: &[(f64, f64)]) -> PathBuf {
    let mut text = String::from("trial_id,t,agent_id,x,y,G_n_i\n");
    for (k, (x, y)) in rows.iter().enumerate() {
        text.push_str(&format!("0,0,{k},{x},{y},0\n"));
    }
    let path = dir.join("snap.csv");
    fs::write(&path, text).unwrap();
    path
}

fn metrics_row(path: &Path) -> Vec<String> {
    let r = run(&["metrics", path.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", stderr(&r));
    let text = String::from_utf8(r.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("trial_id,t,num_agents,num_links,e_theta,e_L"));
    lines.next().unwrap().split(',').map(str::to_string).collect()
}

#[test]
fn metrics_of_a_perfect_grid() {
    let tmp = TempDir::new().unwrap();
    let grid: Vec<(f64, f64)> = (0..3).flat_map(|i| (0..3).map(move |j| (i as f64, j as f64))).collect();
    let row = metrics_row(&write_snapshots(tmp.path(), &grid));
    assert_eq!(row[2], "9");
    assert_eq!(row[3], "12");
    assert_eq!(row[4].parse::<f64>().unwrap(), 0.0);
    assert!((row[5].parse::<f64>().unwrap() - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn metrics_of_a_lone_agent() {
    let tmp = TempDir::new().unwrap();
    let row = metrics_row(&write_snapshots(tmp.path(), &[(0.0, 0.0)]));
    assert_eq!(row[4].parse::<f64>().unwrap(), 1.0);
    assert_eq!(row[5].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn metrics_rejects_bad_input() {
    let tmp = TempDir::new().unwrap();
    let empty = write_snapshots(tmp.path(), &[]);
    let r = run(&["metrics", empty.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "trial_id,t,agent_id,x,y,G_n_i\n0,0,0,0,0,0\n0,0,1,oops,0,0\n").unwrap();
    let r = run(&["metrics", bad.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
    assert!(stderr(&r).contains("bad.csv:3:"), "{}", stderr(&r));
}
