use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const SMALL: [&str; 6] = [
    "--set",
    "simulate.scene_width=12",
    "--set",
    "simulate.scene_height=12",
    "--set",
    "simulate.objects_per_scene=3",
];

fn reefscan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reefscan"))
        .args(args)
        .env_remove("REEFSCAN_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn primary_map(dir: &Path) -> Option<f64> {
    let text = std::fs::read_to_string(dir.join("eval_report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["results"][0]["map"].as_f64()
}

fn simulate_small(dir: &Path, n: &str) {
    let mut args = vec!["simulate", "--out", p(dir), "-n", n, "--seed", "4"];
    args.extend(SMALL);
    let o = reefscan(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn bad_settings_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = reefscan(&["simulate", "--out", p(&out), "--set", "simulate.objekts=3"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("objekts"), "{}", stderr(&o));
    let o = reefscan(&["simulate", "--out", p(&out), "--set", "detect.seabed.clearance=0"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let o = reefscan(&["simulate", "--out", p(&out), "--threads", "0"]);
    assert_eq!(code(&o), 2);
    let o = reefscan(&["frobnicate"]);
    assert_eq!(code(&o), 2);
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[simulate]\nscene_width = \"wide\"\n").unwrap();
    let o = reefscan(&["simulate", "--out", p(&out), "--config", p(&cfg)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("simulate.scene_width"), "{}", stderr(&o));
}

#[test]
fn missing_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let o = reefscan(&["detect", "--scenes", p(&empty), "--out", p(&dir.path().join("d"))]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("no scenes matched"), "{}", stderr(&o));
    let o = reefscan(&["noise-char", "--cloud", p(&dir.path().join("nope.ply")), "--out", p(&empty)]);
    assert_eq!(code(&o), 3);
}

#[test]
fn ground_truth_scores_itself_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt");
    simulate_small(&gt, "2");
    assert!(gt.join("scene_0000.ply").is_file());
    assert!(gt.join("run_manifest.json").is_file());
    let out = dir.path().join("eval");
    let o = reefscan(&["evaluate", "--pred", p(&gt), "--gt", p(&gt), "--out", p(&out), "--gate", "0.99"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(primary_map(&out), Some(1.0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("mAP"));
    assert!(out.join("eval_report.txt").is_file());
}

#[test]
fn gate_and_scene_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt");
    simulate_small(&gt, "2");
    let pred = dir.path().join("pred");
    std::fs::create_dir(&pred).unwrap();
    for stem in ["scene_0000", "scene_0001"] {
        std::fs::write(pred.join(format!("{stem}.json")), "[]").unwrap();
    }
    let o = reefscan(&["evaluate", "--pred", p(&pred), "--gt", p(&gt), "--gate", "0.5"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert_eq!(primary_map(&pred), Some(0.0));
    let o = reefscan(&["evaluate", "--pred", p(&pred), "--gt", p(&gt), "--multi-threshold"]);
    assert_eq!(code(&o), 0);

    std::fs::remove_file(pred.join("scene_0001.json")).unwrap();
    let o = reefscan(&["evaluate", "--pred", p(&pred), "--gt", p(&gt)]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("scene_0001"), "{}", stderr(&o));
}

#[test]
fn saved_templates_drive_detection() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt");
    simulate_small(&gt, "1");
    let lib = dir.path().join("lib");
    let o = reefscan(&["templates", "--out", p(&lib)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let det = dir.path().join("det");
    let o = reefscan(&["detect", "--scenes", p(&gt), "--templates", p(&lib), "--out", p(&det)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(det.join("scene_0000.json").is_file());
    let o = reefscan(&["evaluate", "--pred", p(&det), "--gt", p(&gt)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(primary_map(&det).unwrap() > 0.5);
}

#[test]
fn noise_characterization_writes_stats_and_histograms() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut text = String::new();
    for i in 0..4000 {
        let (x, y) = ((i % 80) as f64 * 0.1, (i / 80) as f64 * 0.1);
        let z = 0.02 * x - 0.01 * y + 1.0 + noise.sample(&mut rng);
        text.push_str(&format!("{x} {y} {z}\n"));
    }
    let cloud = dir.path().join("patch.xyz");
    std::fs::write(&cloud, text).unwrap();
    let out = dir.path().join("noise");
    let o = reefscan(&["noise-char", "--cloud", p(&cloud), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("noise_stats.json")).unwrap()).unwrap();
    let sigma = stats["raw"]["sigma"].as_f64().unwrap();
    assert!((sigma - 0.01).abs() < 0.001, "{sigma}");
    for name in ["histogram_raw.csv", "histogram_trimmed.csv"] {
        let csv = std::fs::read_to_string(out.join(name)).unwrap();
        assert!(csv.starts_with("bin_left,bin_right,count"));
    }
}

#[test]
fn empty_simulation_is_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("none");
    let o = reefscan(&["simulate", "--out", p(&out), "-n", "0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("manifest.json").is_file());
}
