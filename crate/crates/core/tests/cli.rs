use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

const CATALOG: &str = "\
primitive | cos(X) + cos(Y) + cos(Z) | LE
gyroid | sin(X)*cos(Y) + sin(Y)*cos(Z) + sin(Z)*cos(X) | LE
rods | cos(X) + cos(Y) | LE
primitive-x4 | 4*(cos(X) + cos(Y) + cos(Z)) | LE
";

const PLANAR: &str = "\
square | cos(X) + cos(Y) | LE
cross | sin(X) * sin(Y) | SQ
stripes | cos(X) + 0.3 * cos(2 * Y) | LE
";

fn metaset(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metaset"))
        .args(args)
        .env_remove("METASET_THREADS")
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn assert_ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn write_config(dir: &Path, out: &str) -> PathBuf {
    fs::write(dir.join("catalog.txt"), CATALOG).unwrap();
    let cfg = dir.join("pipeline.json");
    let json = serde_json::json!({
        "catalog": "catalog.txt",
        "resolution": 16,
        "samples": 4,
        "points": 128,
        "metric": "H-H",
        "weights": [0.0, 0.5, 1.0],
        "subset_sizes": [2],
        "seed": 3,
        "baseline_trials": 50,
        "out": out,
    });
    fs::write(&cfg, json.to_string()).unwrap();
    cfg
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn expr_eval_prints_value() {
    let out = metaset(&["expr", "eval", "--expr", "cos(X) + cos(Y)", "--point", "0,0"]);
    assert_ok(&out);
    let v: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert_eq!(v, 2.0);
}

#[test]
fn validation_errors_exit_2() {
    assert_eq!(metaset(&["expr", "eval", "--expr", "cos(", "--point", "0,0,0"]).status.code(), Some(2));
    assert_eq!(metaset(&["no-such-command"]).status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_metaset"))
        .args(["expr", "eval", "--expr", "X", "--point", "0,0,0"])
        .env("METASET_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("METASET_THREADS"));
}

#[test]
fn pipeline_is_deterministic_and_hashed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run-a");
    assert_ok(&metaset(&["pipeline", "--config", p(&cfg)]));
    let b = dir.path().join("run-b");
    assert_ok(&metaset(&["pipeline", "--config", p(&cfg), "--out", p(&b)]));

    let a = dir.path().join("run-a");
    let sa = fs::read(a.join("summary.json")).unwrap();
    let sb = fs::read(b.join("summary.json")).unwrap();
    assert_eq!(sa, sb);

    let summary = read_json(&a.join("summary.json"));
    let artifacts = summary["artifacts"].as_array().unwrap();
    assert!(!artifacts.is_empty());
    for art in artifacts {
        let bytes = fs::read(a.join(art["path"].as_str().unwrap())).unwrap();
        let hex: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(art["sha256"].as_str().unwrap(), hex);
    }
    assert_eq!(summary["selections"], 3);
    assert!(a.join("kernels/shape.kmat").exists());
    assert!(a.join("reports/tradeoff.csv").exists());

    let seeded = dir.path().join("run-c");
    assert_ok(&metaset(&["pipeline", "--config", p(&cfg), "--out", p(&seeded), "--seed", "4"]));
    assert_eq!(read_json(&seeded.join("summary.json"))["seed"], 4);
}

#[test]
fn select_sweep_and_report_on_pipeline_kernels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run");
    assert_ok(&metaset(&["pipeline", "--config", p(&cfg)]));
    let k = dir.path().join("run/kernels");
    let (lp, ls) = (k.join("property.kmat"), k.join("shape.kmat"));

    let sel = dir.path().join("sel.json");
    assert_ok(&metaset(&["select", "--lp", p(&lp), "--ls", p(&ls), "--w", "1", "--k", "2", "--out", p(&sel)]));
    let rec = read_json(&sel);
    assert_eq!(rec["indices"].as_array().unwrap().len(), 2);
    assert_eq!(rec["w"], 1.0);

    let sweep = dir.path().join("sweep.json");
    let csv = dir.path().join("sweep.csv");
    assert_ok(&metaset(&[
        "select", "sweep", "--lp", p(&lp), "--ls", p(&ls), "--weights", "0,1", "--k", "2", "--out", p(&sweep), "--csv", p(&csv),
    ]));
    assert_eq!(read_json(&sweep).as_array().unwrap().len(), 2);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 3);

    let out = metaset(&["report", "--selection", p(&sel), "--lp", p(&lp), "--ls", p(&ls), "--trials", "20"]);
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).lines().count() >= 2);

    // distance matrices are not kernels
    let dist = k.join("shape_distance.kmat");
    let bad = metaset(&["select", "--lp", p(&lp), "--ls", p(&dist), "--w", "1", "--k", "2", "--out", p(&sel)]);
    assert_eq!(bad.status.code(), Some(2));
    // k larger than the ground set
    let bad = metaset(&["select", "--lp", p(&lp), "--ls", p(&ls), "--w", "1", "--k", "99", "--out", p(&sel)]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn planar_ground_set_to_design() {
    let dir = tempfile::tempdir().unwrap();
    let cat = dir.path().join("planar.txt");
    fs::write(&cat, PLANAR).unwrap();
    let data = dir.path().join("data");
    assert_ok(&metaset(&["isogen", "planar", "--catalog", p(&cat), "--out", p(&data), "--count", "6", "--res", "16"]));
    let manifest = data.join("manifest.json");
    assert!(manifest.exists());

    let ls = dir.path().join("ls.kmat");
    let lp = dir.path().join("lp.kmat");
    assert_ok(&metaset(&["metrics", "kernel", "--manifest", p(&manifest), "--space", "shape2d", "--out", p(&ls)]));
    assert_ok(&metaset(&["metrics", "kernel", "--manifest", p(&manifest), "--space", "property", "--out", p(&lp)]));
    assert!(ls.with_extension("csv").exists());

    let sel = dir.path().join("sel.json");
    assert_ok(&metaset(&["select", "--lp", p(&lp), "--ls", p(&ls), "--w", "0.5", "--k", "3", "--out", p(&sel)]));

    let problem = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/mbb_half_2x2.json");
    let report = dir.path().join("design.csv");
    let args = [
        "design", "ga", "--problem", p(&problem), "--manifest", p(&manifest), "--subset", p(&sel), "--runs", "2",
        "--generations", "5", "--population", "10", "--out", p(&report),
    ];
    assert_ok(&metaset(&args));
    let first = fs::read_to_string(&report).unwrap();
    assert_eq!(first.lines().count(), 3);
    assert_ok(&metaset(&args));
    assert_eq!(fs::read_to_string(&report).unwrap(), first);
}
