use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use reach_avoid::env::{EnvironmentSpec, State};
use reach_avoid::io::{read_grid_csv, Artifact, ArtifactFile, Contour};
use reach_avoid::tabular::{Grid, Lookup, ValueGrid};
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_reach-avoid"));
    cmd.env_remove("REACH_AVOID_OUT_DIR").env("RUST_LOG", "warn");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    if !out.status.success() {
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const PARTICLE_VI: &str = "seed = 1\nsolver = \"value-iteration\"\n[environment]\npreset = \"particle\"\n[grid]\ncounts = [21, 61]\n[certify]\nprobe_counts = [11, 31]\n";

fn train_vi(tmp: &TempDir, name: &str) -> PathBuf {
    let cfg = write_config(tmp.path(), "vi.toml", PARTICLE_VI);
    let out = tmp.path().join(name);
    let status = run(bin().args(["train", "--config"]).arg(&cfg).arg("--out").arg(&out)).status;
    assert!(status.success());
    out
}

fn load_value_grid(path: &Path) -> ValueGrid {
    match ArtifactFile::load(path).unwrap().artifact {
        Artifact::ValueGrid(vg) => vg,
        other => panic!("expected a value grid, got {other:?}"),
    }
}

#[test]
fn value_iteration_writes_artifacts_deterministically() {
    let tmp = TempDir::new().unwrap();
    let a = train_vi(&tmp, "a");
    let b = train_vi(&tmp, "b");
    for file in ["value_grid.json", "value_grid.csv", "value_grid.contour.json", "residuals.jsonl", "resolved_config.toml", "summary.json"] {
        assert!(a.join(file).exists(), "{file} missing");
    }
    assert_eq!(fs::read(a.join("value_grid.json")).unwrap(), fs::read(b.join("value_grid.json")).unwrap());
    let residuals = fs::read_to_string(a.join("residuals.jsonl")).unwrap();
    let last: serde_json::Value = serde_json::from_str(residuals.lines().last().unwrap()).unwrap();
    assert!(last["residual"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn resolved_config_reruns_identically() {
    let tmp = TempDir::new().unwrap();
    let a = train_vi(&tmp, "a");
    let rerun = tmp.path().join("rerun");
    let status = run(bin().args(["train", "--config"]).arg(a.join("resolved_config.toml")).arg("--out").arg(&rerun)).status;
    assert!(status.success());
    assert_eq!(fs::read(a.join("value_grid.json")).unwrap(), fs::read(rerun.join("value_grid.json")).unwrap());
    assert_eq!(fs::read(a.join("resolved_config.toml")).unwrap(), fs::read(rerun.join("resolved_config.toml")).unwrap());
}

#[test]
fn config_errors_exit_with_status_two() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        ("solver.toml", "solver = \"simplex\"\n[environment]\npreset = \"particle\"\n", "simplex"),
        ("field.toml", "solver = \"ddqn\"\n[environment]\npreset = \"particle\"\n[train]\nbatchsize = 3\n", "train.batchsize"),
        ("syntax.toml", "solver = \"ddqn\"\n[environment\n", "line 2"),
    ];
    for (name, text, needle) in cases {
        let cfg = write_config(tmp.path(), name, text);
        let out = run(bin().args(["train", "--config"]).arg(&cfg).arg("--out").arg(tmp.path().join("x")));
        assert_eq!(out.status.code(), Some(2), "{name}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(needle), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let missing = run(bin().args(["train", "--config"]).arg(tmp.path().join("absent.toml")));
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn identity_slice_round_trips_through_csv() {
    let tmp = TempDir::new().unwrap();
    let dir = train_vi(&tmp, "vi");
    let vg = load_value_grid(&dir.join("value_grid.json"));
    let out = tmp.path().join("export");
    let status = run(bin().args(["export-grid", "--artifact"]).arg(dir.join("value_grid.json")).arg("--out").arg(&out)).status;
    assert!(status.success());
    let slice = read_grid_csv(&fs::read_to_string(out.join("slice.csv")).unwrap()).unwrap();
    assert_eq!(slice.counts, [21, 61]);
    assert_eq!(slice.lower, [vg.grid.lower()[0], vg.grid.lower()[1]]);
    for (a, b) in slice.values.iter().zip(&vg.values) {
        assert!((a - b).abs() <= 5e-9 * b.abs(), "{a} vs {b}");
        assert_eq!(*a <= 0.0, *b <= 0.0);
    }
    let contour: Contour = serde_json::from_str(&fs::read_to_string(out.join("slice.contour.json")).unwrap()).unwrap();
    assert!(!contour.polylines.is_empty());
}

#[test]
fn dubins_slice_matches_grid_layer() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "dubins.toml",
        "solver = \"value-iteration\"\n[environment]\npreset = \"dubins-high\"\n[grid]\ncounts = [15, 15, 12]\n[value_iteration]\ngamma = 0.99\n",
    );
    let dir = tmp.path().join("dubins");
    assert!(run(bin().args(["train", "--config"]).arg(&cfg).arg("--out").arg(&dir)).status.success());
    assert!(!dir.join("value_grid.csv").exists());
    let out = tmp.path().join("slice");
    let status = run(bin().args(["export-grid", "--slice", "*,*,0", "--artifact"]).arg(dir.join("value_grid.json")).arg("--out").arg(&out)).status;
    assert!(status.success());
    let vg = load_value_grid(&dir.join("value_grid.json"));
    let slice = read_grid_csv(&fs::read_to_string(out.join("slice.csv")).unwrap()).unwrap();
    let theta = vg.grid.axis_center(2, 0);
    assert_eq!(slice.fixed, vec![(2, theta)]);
    for i in 0..15 {
        for j in 0..15 {
            let direct = vg.value_at(&[vg.grid.axis_center(0, i), vg.grid.axis_center(1, j), theta], Lookup::Snap);
            assert!((slice.get(i, j) - direct).abs() <= 5e-9 * direct.abs());
        }
    }
    let bad = run(bin().args(["export-grid", "--slice", "*,*", "--artifact"]).arg(dir.join("value_grid.json")).arg("--out").arg(&out));
    assert!(!bad.status.success());
}

#[test]
fn empty_level_set_gives_empty_sidecar() {
    let tmp = TempDir::new().unwrap();
    let env = EnvironmentSpec::particle();
    let grid = Grid::for_env(&env, vec![5, 7]).unwrap();
    let file = ArtifactFile { env: env.name.clone(), artifact: Artifact::ValueGrid(ValueGrid::new(grid, vec![2.0; 35]).unwrap()) };
    let path = tmp.path().join("positive.json");
    file.save(&path).unwrap();
    assert!(run(bin().args(["export-grid", "--artifact"]).arg(&path)).status.success());
    let contour: Contour = serde_json::from_str(&fs::read_to_string(tmp.path().join("slice.contour.json")).unwrap()).unwrap();
    assert!(contour.polylines.is_empty());
    assert!(read_grid_csv(&fs::read_to_string(tmp.path().join("slice.csv")).unwrap()).is_ok());
}

#[test]
fn evaluate_reports_confusion_masks_and_nesting() {
    let tmp = TempDir::new().unwrap();
    let dir = train_vi(&tmp, "vi");
    let cfg = dir.join("resolved_config.toml");
    let out = tmp.path().join("eval");
    let status = run(bin()
        .args(["evaluate", "--config"])
        .arg(&cfg)
        .arg("--artifact")
        .arg(dir.join("value_grid.json"))
        .arg("--out")
        .arg(&out)
        .args(["--gamma-ladder", "0.5,0.9,0.99"]))
    .status;
    assert!(status.success());
    let confusion: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("confusion.json")).unwrap()).unwrap();
    assert_eq!(confusion["rollout_predictor"]["fsr"].as_f64(), Some(0.0));
    assert_eq!(confusion["probes"].as_u64(), Some(11 * 31));
    let nesting: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("nesting.json")).unwrap()).unwrap();
    assert_eq!(nesting["nested"].as_bool(), Some(true));
    assert!(out.join("ra_mask.json").exists() && out.join("ra_mask.csv").exists());

    let other = write_config(tmp.path(), "dubins.toml", "solver = \"value-iteration\"\n[environment]\npreset = \"dubins-high\"\n");
    let mismatch = run(bin().args(["evaluate", "--config"]).arg(&other).arg("--artifact").arg(dir.join("value_grid.json")).arg("--out").arg(&out));
    assert!(!mismatch.status.success());
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("does not match"));
}

#[test]
fn rollout_command_follows_value_policy() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "fine.toml", &PARTICLE_VI.replace("[21, 61]", "[81, 241]"));
    let dir = tmp.path().join("fine");
    assert!(run(bin().args(["train", "--config"]).arg(&cfg).arg("--out").arg(&dir)).status.success());
    let out = run(bin()
        .args(["rollout", "--config"])
        .arg(dir.join("resolved_config.toml"))
        .arg("--artifact")
        .arg(dir.join("value_grid.json"))
        .args(["--state", "0.0,6.0"]));
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("Success"));
    let record: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("rollout.json")).unwrap()).unwrap();
    assert_eq!(record["outcome"], "success");
}

const TINY_DDQN: &str = "solver = \"ddqn\"\n[environment]\npreset = \"particle\"\n[train]\nupdates = 300\nhidden = [8]\nbatch_size = 16\nbuffer_capacity = 200\neval_every = 100\n[certify]\nvalidation_counts = [3, 5]\nprobe_counts = [3, 5]\n";

#[test]
fn ddqn_run_streams_metrics_and_saves_networks() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "ddqn.toml", TINY_DDQN);
    let out = tmp.path().join("from-env");
    let status = run(bin().args(["train", "--config"]).arg(&cfg).env("REACH_AVOID_OUT_DIR", &out)).status;
    assert!(status.success());
    let metrics = fs::read_to_string(out.join("metrics.jsonl")).unwrap();
    let updates: Vec<u64> = metrics.lines().map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["update"].as_u64().unwrap()).collect();
    assert_eq!(updates, vec![0, 100, 200, 300]);
    assert!(out.join("network.json").exists() && out.join("target_network.json").exists());
    let export = tmp.path().join("slice");
    assert!(run(bin().args(["export-grid", "--artifact"]).arg(out.join("network.json")).arg("--out").arg(&export)).status.success());
    assert_eq!(read_grid_csv(&fs::read_to_string(export.join("slice.csv")).unwrap()).unwrap().counts, [101, 101]);
    let eval = tmp.path().join("eval");
    let status = run(bin().args(["evaluate", "--config"]).arg(&cfg).arg("--artifact").arg(out.join("network.json")).arg("--out").arg(&eval)).status;
    assert!(status.success());
    let confusion: serde_json::Value = serde_json::from_str(&fs::read_to_string(eval.join("confusion.json")).unwrap()).unwrap();
    assert_eq!(confusion["rollout_predictor"]["fsr"].as_f64(), Some(0.0));
}

#[test]
fn divergence_exits_with_status_three_and_keeps_metrics() {
    let tmp = TempDir::new().unwrap();
    let text = TINY_DDQN.replace("eval_every = 100\n", "eval_every = 100\ndivergence_threshold = 1e-300\n");
    let cfg = write_config(tmp.path(), "diverge.toml", &text);
    let out = tmp.path().join("run");
    let result = run(bin().args(["train", "--config"]).arg(&cfg).arg("--out").arg(&out));
    assert_eq!(result.status.code(), Some(3), "{}", String::from_utf8_lossy(&result.stderr));
    assert!(fs::read_to_string(out.join("metrics.jsonl")).unwrap().lines().count() >= 1);
    assert!(!out.join("network.json").exists());
}

#[test]
fn exhaustive_validation_of_a_minimax_network() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "game.toml",
        "solver = \"minimax-ddqn\"\n[environment]\npreset = \"attack-defense\"\n[train]\nupdates = 100\nhidden = [8]\nbatch_size = 16\nbuffer_capacity = 100\neval_every = 100\ninit = \"random\"\n[certify]\nvalidation_counts = [2, 2, 2, 2, 2, 2]\n[certify.exhaustive]\nintervals = 2\nsteps_per_interval = 3\nrounds = 1\n",
    );
    let dir = tmp.path().join("game");
    assert!(run(bin().args(["train", "--config"]).arg(&cfg).arg("--out").arg(&dir)).status.success());
    let out = run(bin()
        .args(["validate-exhaustive", "--config"])
        .arg(&cfg)
        .arg("--artifact")
        .arg(dir.join("network.json"))
        .args(["--state", "0.9,0.0,3.14,-0.5,0.0,0.0"]));
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("exhaustive.json")).unwrap()).unwrap();
    assert_eq!(report["rounds"][0]["enumerated"].as_u64(), Some(9));
    let start: Vec<f64> = report["worst"]["states"][0].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(State::new(&start), State::new(&[0.9, 0.0, 3.14, -0.5, 0.0, 0.0]));
}
