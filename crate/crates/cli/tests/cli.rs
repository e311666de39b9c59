use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kpo-qml"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn small_kpo_config() -> Value {
    json!({
        "schema_version": 1,
        "model": {
            "variant": "single-kpo",
            "chi": 0.1, "cutoff": 12, "alpha": 1.0, "t_d": 0.7, "tau": 0.7, "depth": 2
        },
        "optimizer": {
            "reflection": 1.0, "expansion": 2.0, "contraction": 0.5, "shrink": 0.5,
            "x_tolerance": 1e-4, "f_tolerance": 1e-4, "max_iterations": 20
        },
        "dataset": { "target": { "kind": "gaussian" }, "num_samples": 15, "seed": 3 },
        "analysis": { "fit_points": 41, "test_points": 50 }
    })
}

fn baseline_config(qubits: usize) -> Value {
    json!({
        "schema_version": 1,
        "model": { "variant": "qubit-baseline", "num_qubits": qubits, "depth": 2, "tau": 10.0, "seed": 1 },
        "optimizer": {
            "reflection": 1.0, "expansion": 2.0, "contraction": 0.5, "shrink": 0.5,
            "x_tolerance": 1e-4, "f_tolerance": 1e-4, "max_iterations": 10
        },
        "dataset": { "target": { "kind": "abs" }, "num_samples": 10 },
        "analysis": { "fit_points": 21, "test_points": 20, "spectrum": false }
    })
}

fn write_config(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_str().unwrap().to_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn train_writes_record_fit_and_spectrum() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &small_kpo_config());
    let out = tmp.path().join("out");
    let o = run(&["train", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in ["record.json", "fit.csv", "spectrum.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let fit = fs::read_to_string(out.join("fit.csv")).unwrap();
    assert!(fit.starts_with("x,f\n-1,"));
    assert_eq!(fit.lines().count(), 42);
    assert!(fs::read_to_string(out.join("spectrum.csv"))
        .unwrap()
        .starts_with("nu,abs_F,phase\n0,"));
    let rec = read_json(&out.join("record.json"));
    assert_eq!(rec["trace"]["theta"].as_array().unwrap().len(), 6);
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 40);
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&[
        "train",
        "--config",
        tmp.path().join("missing.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));

    let mut c = small_kpo_config();
    c["theta_init"] = json!({ "theta": [0.0, 0.0, 0.0] });
    let cfg = write_config(tmp.path(), "bad.json", &c);
    let o = run(&[
        "train",
        "--config",
        &cfg,
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("theta_init.theta"));

    let cfg = write_config(tmp.path(), "garbage.json", &json!({ "schema_version": 1 }));
    assert_eq!(run(&["train", "--config", &cfg]).status.code(), Some(2));

    let cfg = write_config(tmp.path(), "ok.json", &small_kpo_config());
    let o = run(&["sweep", "--config", &cfg, "--axis", "beta"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_alpha_makes_one_directory_per_point() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = small_kpo_config();
    c["optimizer"]["max_iterations"] = json!(2);
    c["analysis"]["test_points"] = json!(10);
    let cfg = write_config(tmp.path(), "c.json", &c);
    let out = tmp.path().join("sweep");
    let o = run(&[
        "sweep",
        "--config",
        &cfg,
        "--axis",
        "alpha",
        "--values",
        "1,3",
        "--jobs",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for sub in ["alpha-1", "alpha-3"] {
        assert!(out.join(sub).join("record.json").exists());
    }
    let rec = read_json(&out.join("alpha-3").join("record.json"));
    assert_eq!(rec["config"]["model"]["cutoff"], 25);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("value,final_cost,test_mse,iterations,evaluations\n"));
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn sweep_nsamples_uses_given_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = small_kpo_config();
    c["optimizer"]["max_iterations"] = json!(1);
    let cfg = write_config(tmp.path(), "c.json", &c);
    let out = tmp.path().join("sweep");
    let o = run(&[
        "sweep",
        "--config",
        &cfg,
        "--axis",
        "nsamples",
        "--values",
        "10,30",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let rec = read_json(&out.join("n-30").join("record.json"));
    assert_eq!(rec["config"]["dataset"]["num_samples"], 30);
    let o = run(&[
        "sweep",
        "--config",
        &cfg,
        "--axis",
        "nsamples",
        "--values",
        "2.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn prepare_writes_fidelity_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("prep");
    let o = run(&[
        "prepare",
        "--chi",
        "0.1",
        "--p",
        "0.4",
        "--r",
        "-0.01",
        "--steps",
        "800",
        "--time",
        "400",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = fs::read_to_string(out.join("fidelity.csv")).unwrap();
    assert!(csv.starts_with("t,fidelity\n"));
    let last: f64 = csv
        .lines()
        .last()
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!(last >= 0.99, "{last}");
    assert!(out.join("manifest.json").exists());

    let bad = |extra: &[&str]| {
        let mut args = vec![
            "prepare", "--chi", "0.1", "--p", "0.4", "--r", "-0.01", "--time", "10",
        ];
        args.extend_from_slice(extra);
        args.extend_from_slice(&["--out", out.to_str().unwrap()]);
        run(&args).status.code()
    };
    assert_eq!(bad(&["--steps", "0"]), Some(2));
    assert_eq!(bad(&["--steps", "10", "--delta0", "0.05"]), Some(2));
}

#[test]
fn baseline_is_reproducible_and_guards_register_size() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "b.json", &baseline_config(6));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["baseline", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let (ra, rb) = (
        read_json(&a.join("record.json")),
        read_json(&b.join("record.json")),
    );
    assert_eq!(ra, rb);
    assert_eq!(ra["trace"]["theta"].as_array().unwrap().len(), 36);

    let cfg = write_config(tmp.path(), "big.json", &baseline_config(13));
    assert_eq!(run(&["baseline", "--config", &cfg]).status.code(), Some(2));

    let kpo = write_config(tmp.path(), "kpo.json", &small_kpo_config());
    assert_eq!(run(&["baseline", "--config", &kpo]).status.code(), Some(2));
}

#[test]
fn seed_override_changes_the_start() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = small_kpo_config();
    c["optimizer"]["max_iterations"] = json!(1);
    let cfg = write_config(tmp.path(), "c.json", &c);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run(&["train", "--config", &cfg, "--out", a.to_str().unwrap()]);
    let o = run(&[
        "train",
        "--config",
        &cfg,
        "--seed-override",
        "9",
        "--out",
        b.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let (ra, rb) = (
        read_json(&a.join("record.json")),
        read_json(&b.join("record.json")),
    );
    assert_eq!(rb["config"]["theta_init"]["seed"], 9);
    assert_ne!(ra["trace"]["theta"], rb["trace"]["theta"]);
    assert_eq!(read_json(&b.join("manifest.json"))["seed_override"], 9);
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args([
            "prepare", "--chi", "0.1", "--p", "0.4", "--r", "-0.01", "--steps", "4", "--time", "1",
        ])
        .env("KPO_QML_OUT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(tmp.path().join("prepare").join("fidelity.csv").exists());
}
