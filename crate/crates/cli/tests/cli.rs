use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn slog(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slog"))
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

const TINY: [&str; 17] = [
    "gen-data", "--graph", "er", "--n", "10", "--p-edge", "0.4", "--theta", "0.15", "--filter-order", "3",
    "--ntrain", "120", "--batch", "40", "--out", "d",
];

#[test]
fn gen_data_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = slog(
        dir.path(),
        &[
            "gen-data", "--graph", "er", "--n", "20", "--p-edge", "0.3", "--theta", "0.15", "--filter-order", "5",
            "--phi", "1", "--ntrain", "800", "--batch", "400", "--seed", "1", "--out", "d/", "--quiet",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for split in ["", "val", "test"] {
        let d = dir.path().join("d").join(split);
        for f in ["manifest.json", "X.f64le", "Y.f64le", "H.f64le", "graph.edges"] {
            assert!(d.join(f).exists(), "{}", d.join(f).display());
        }
    }
    let manifest = read_json(&dir.path().join("d/manifest.json"));
    assert_eq!(manifest["n_batches"], 2);
    assert_eq!(manifest["seed"], 1);
    let cfg = read_json(&dir.path().join("d/config.json"));
    assert_eq!(cfg["command"], "gen-data");
    assert_eq!(cfg["args"]["graph-seed"], 1);
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = slog(dir.path(), &["gen-data", "--n", "20"]);
    assert_eq!(code(&missing), 1);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("--out"));
    assert_eq!(code(&slog(dir.path(), &["gen-data", "--bogus", "1", "--out", "x"])), 1);
    assert_eq!(code(&slog(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&slog(dir.path(), &["gen-data", "--graph", "lattice", "--out", "x"])), 1);
    assert_eq!(code(&slog(dir.path(), &["gen-data", "--n", "many", "--out", "x"])), 1);
    assert_eq!(code(&slog(dir.path(), &["--config", "absent.json", "gen-data", "--out", "x"])), 1);
    assert_eq!(code(&slog(dir.path(), &["--help"])), 0);
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = slog(dir.path(), &["solve-admm", "--data", "nowhere", "--out", "r.json"]);
    assert_eq!(code(&out), 2);
    assert!(!dir.path().join("r.json").exists());
    // 7 signals do not split into batches of 3.
    let out = slog(dir.path(), &["gen-data", "--ntrain", "7", "--batch", "3", "--out", "d", "--quiet"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn config_file_fills_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"n": 12, "theta": 0.3, "ntrain": 80, "batch": 40, "seed": 5, "filter_order": 3}"#,
    )
    .unwrap();
    let out = slog(dir.path(), &["--config", "c.json", "gen-data", "--theta", "0.2", "--out", "d", "--quiet"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m = read_json(&dir.path().join("d/manifest.json"));
    assert_eq!(m["n"], 12);
    assert_eq!(m["theta"], 0.2);
    assert_eq!(m["filter_order"], 3);
    assert_eq!(m["seed"], 5);
    let cfg = read_json(&dir.path().join("d/config.json"));
    assert_eq!(cfg["config_file"], "c.json");
    assert_eq!(cfg["args"]["ntrain"], 80);
}

#[test]
fn pipeline_produces_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    let mut gen = TINY.to_vec();
    gen.push("--quiet");
    assert_eq!(code(&slog(cwd, &gen)), 0);

    let out = slog(
        cwd,
        &["solve-admm", "--data", "d/test", "--rho-lambda", "50", "--rho-mu", "50", "--max-iters", "500", "--out", "admm.json"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let admm = read_json(&cwd.join("admm.json"));
    assert_eq!(admm["g_hat"].as_array().unwrap().len(), 10);
    assert!(admm["iterations"].as_u64().unwrap() <= 500);
    assert!(admm["seconds"].as_f64().unwrap() > 0.0);
    assert!(admm["metrics"]["re_x"].as_f64().is_some());
    assert_eq!(admm["config"]["args"]["rho-lambda"], 50.0);

    let out = slog(cwd, &["train", "--data", "d", "--layers", "2", "--epochs", "2", "--val-every", "1", "--seed", "3", "--out", "ck"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let header = read_json(&cwd.join("ck/model.json"));
    assert_eq!(header["k"], 2);
    assert_eq!(header["n_params"], 2 * (9 + 10 * 2 + 2));
    assert_eq!(header["meta"]["context"]["config"]["args"]["layers"], 2);
    let log = read_json(&cwd.join("ck/train_log.json"));
    assert_eq!(log["steps"].as_array().unwrap().len(), 6);
    assert!(log.get("seconds").is_none());
    assert!(read_json(&cwd.join("ck/train_timing.json"))["seconds"].as_f64().unwrap() > 0.0);

    let out = slog(cwd, &["infer", "--model", "ck", "--data", "d/test", "--seed", "3", "--out", "r/report.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&cwd.join("r/report.json"));
    assert_eq!(report["batches"].as_array().unwrap().len(), 1);
    assert!(report.to_string().find("seconds").is_none());
    let timing = read_json(&cwd.join("r/report.timing.json"));
    assert_eq!(timing["seconds"].as_array().unwrap().len(), 1);

    let out = slog(
        cwd,
        &[
            "bench", "--data", "d", "--model", "ck", "--eta-sweep", "0:0.05:0.1", "--trials", "2", "--max-iters", "200",
            "--jobs", "2", "--out", "res",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(cwd.join("res/bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2 * 2);
    assert!(csv.starts_with("method,graph,N,P,theta,L,phi,eta,seed,re_x,re_g,acc,kappa,seconds,iters"));

    let out = slog(cwd, &["report", "--in", "res", "--out", "s.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&cwd.join("s.json"));
    assert_eq!(summary["rows"], 12);
    let groups = summary["summary"].as_array().unwrap();
    assert_eq!(groups.len(), 6);
    assert!(groups.iter().all(|g| g["count"] == 2));
}

#[test]
fn repeated_pipeline_is_bit_identical() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let cwd = dir.path();
        let mut gen = TINY.to_vec();
        gen.extend(["--seed", "4", "--quiet"]);
        assert_eq!(code(&slog(cwd, &gen)), 0);
        let train = ["train", "--data", "d", "--layers", "2", "--epochs", "3", "--seed", "7", "--out", "ck", "--quiet"];
        assert_eq!(code(&slog(cwd, &train)), 0);
        let infer = ["infer", "--model", "ck", "--data", "d/test", "--seed", "7", "--out", "report.json", "--quiet"];
        assert_eq!(code(&slog(cwd, &infer)), 0);
        let read = |p: &str| fs::read(cwd.join(p)).unwrap();
        (read("report.json"), read("ck/params.f64le"), read("ck/train_log.json"))
    };
    let (a, pa, la) = run();
    let (b, pb, lb) = run();
    assert_eq!(pa, pb);
    assert_eq!(la, lb);
    assert_eq!(a, b);
}
