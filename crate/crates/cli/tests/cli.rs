use std::path::Path;
use std::process::{Command, Output};

use dasgd_cli::commands::{self, PerfRequest, PerfSource};
use dasgd_cli::{ExperimentConfig, OUT_DIR_ENV};
use dasgd_core::objectives::{NoisyQuadratic, Objective, ObjectiveSpec};

fn dasgd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dasgd"))
        .args(args)
        .current_dir(cwd)
        .env_remove(OUT_DIR_ENV)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

const BASELINE: &str = r#"{
  "algorithm": "dasgd",
  "tau": 4, "delay": 1, "xi": 0.25, "workers": 8, "local_batch": 32, "steps": 300,
  "objective": {"kind": "quadratic", "dim": 10, "noise_sigma": 0.1}
}"#;

#[test]
fn train_baseline_writes_deterministic_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", BASELINE);
    let out = dasgd(&["train", &cfg, "--output-dir", "a"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv_a = std::fs::read(dir.path().join("a/trajectory.csv")).unwrap();
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("a/summary.json")).unwrap()).unwrap();
    for k in ["algorithm", "params", "final_loss", "avg_grad_norm_sq", "steps"] {
        assert!(summary.get(k).is_some(), "missing {k}");
    }
    assert_eq!(summary["steps"], 300);
    assert!(csv_a.starts_with(b"step,loss,grad_norm_sq,dispersion,lr\n"));
    assert_eq!(csv_a.iter().filter(|&&b| b == b'\n').count(), 301);

    let out = dasgd(&["train", &cfg, "--output-dir", "b", "--threads", "4"], dir.path());
    assert!(out.status.success());
    assert_eq!(csv_a, std::fs::read(dir.path().join("b/trajectory.csv")).unwrap());
    let out = dasgd(&["train", &cfg, "--output-dir", "a"], dir.path());
    assert!(out.status.success());
    assert_eq!(csv_a, std::fs::read(dir.path().join("a/trajectory.csv")).unwrap());
}

#[test]
fn baseline_settings_with_32_workers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dasgd(
        &["train", "--tau", "4", "--delay", "1", "--xi", "0.25", "--workers", "32", "--local-batch", "32", "--steps", "50"],
        dir.path(),
    );
    assert!(out.status.success());
    assert!(dir.path().join("out/trajectory.csv").exists());
    assert!(dir.path().join("out/summary.json").exists());
}

#[test]
fn delay_not_below_tau_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dasgd(&["train", "--tau", "2", "--delay", "2"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("delay") && err.contains("tau"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"tua": 4}"#);
    let out = dasgd(&["train", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tua"));
}

#[test]
fn divergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dasgd(&["train", "--eta", "1000", "--steps", "500"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step"));
}

#[test]
fn flags_beat_environment_beats_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"steps": 20, "output_dir": "from_file"}"#);
    let run = |extra: &[&str], env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_dasgd"));
        c.arg("train").arg(&cfg).args(extra).current_dir(dir.path()).env_remove(OUT_DIR_ENV);
        if let Some(v) = env {
            c.env(OUT_DIR_ENV, v);
        }
        assert!(c.output().unwrap().status.success());
    };
    run(&[], None);
    assert!(dir.path().join("from_file/trajectory.csv").exists());
    run(&[], Some("from_env"));
    assert!(dir.path().join("from_env/trajectory.csv").exists());
    run(&["--output-dir", "from_flag"], Some("from_env"));
    assert!(dir.path().join("from_flag/trajectory.csv").exists());
}

fn compare_columns(csv: &str) -> std::collections::BTreeMap<String, Vec<Vec<f64>>> {
    let mut m = std::collections::BTreeMap::<String, Vec<Vec<f64>>>::new();
    for line in csv.lines().skip(1) {
        let mut it = line.split(',');
        let alg = it.next().unwrap().to_string();
        m.entry(alg).or_default().push(it.map(|v| v.parse().unwrap()).collect());
    }
    m
}

#[test]
fn compare_identities() {
    let dir = tempfile::tempdir().unwrap();
    // d = 0, xi = 0: dasgd is local SGD
    let cfg = ExperimentConfig::from_json(r#"{"tau": 3, "delay": 0, "xi": 0.0, "steps": 90, "workers": 4,
        "objective": {"kind": "logistic"}}"#)
    .unwrap();
    let flags = ExperimentConfig { output_dir: Some(dir.path().join("c1")), ..Default::default() };
    let r = ExperimentConfig::resolve(cfg, flags, None).unwrap();
    let out = commands::compare(&r).unwrap();
    let cols = compare_columns(&std::fs::read_to_string(out.csv).unwrap());
    assert_eq!(cols["local"], cols["dasgd"]);
    assert_eq!(cols["minibatch"].len(), 90);

    // tau = 1: local SGD is minibatch SGD
    let cfg = ExperimentConfig::from_json(r#"{"tau": 1, "delay": 0, "steps": 90, "workers": 4,
        "objective": {"kind": "logistic"}}"#)
    .unwrap();
    let flags = ExperimentConfig { output_dir: Some(dir.path().join("c2")), ..Default::default() };
    let r = ExperimentConfig::resolve(cfg, flags, None).unwrap();
    let out = commands::compare(&r).unwrap();
    let cols = compare_columns(&std::fs::read_to_string(out.csv).unwrap());
    for (a, b) in cols["local"].iter().zip(&cols["minibatch"]) {
        // loss and grad_norm_sq columns
        for i in 1..3 {
            assert!((a[i] - b[i]).abs() <= 1e-12 * a[i].abs().max(b[i].abs()).max(1e-300), "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn compare_reaches_noise_floor() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{"kind": "quadratic", "dim": 10, "noise_sigma": 0.5, "seed": 3}"#;
    let cfg = ExperimentConfig::from_json(&format!(
        r#"{{"tau": 4, "delay": 1, "xi": 0.25, "eta": 0.05, "workers": 4, "local_batch": 4, "steps": 2000, "objective": {spec}}}"#
    ))
    .unwrap();
    let flags = ExperimentConfig { output_dir: Some(dir.path().to_path_buf()), ..Default::default() };
    let r = ExperimentConfig::resolve(cfg, flags, None).unwrap();
    let out = commands::compare(&r).unwrap();
    let spec: ObjectiveSpec = serde_json::from_str(spec).unwrap();
    let q = NoisyQuadratic::with_spectrum(10, spec.l_min.unwrap_or(0.5), spec.l_max.unwrap_or(2.0), 0.5, 3).unwrap();
    let c = q.analytic_constants(4).unwrap();
    let floor = 10.0 * c.sigma_sq * 0.05 * c.lipschitz;
    let cols = compare_columns(&std::fs::read_to_string(out.csv).unwrap());
    for (alg, rows) in &cols {
        let best = rows.iter().map(|r| r[2]).fold(f64::INFINITY, f64::min);
        assert!(best < floor, "{alg}: {best} >= {floor}");
    }
}

#[test]
fn bound_rejects_unit_xi() {
    let dir = tempfile::tempdir().unwrap();
    let out = dasgd(&["bound", "--xi", "1", "--steps", "40"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("xi"));
}

#[test]
fn bound_report_at_cap() {
    let dir = tempfile::tempdir().unwrap();
    let seeds: Vec<String> = (0..16).map(|s| s.to_string()).collect();
    let out = dasgd(&["bound", "--at-cap", "--steps", "200", "--seeds", &seeds.join(",")], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("out/bound.json")).unwrap()).unwrap();
    for k in ["params", "assumption_params", "eta", "eta_max", "empirical", "bound", "satisfied", "seeds"] {
        assert!(v.get(k).is_some(), "missing {k}");
    }
    assert_eq!(v["satisfied"], true);
    assert_eq!(v["eta"], v["eta_max"]);
    assert_eq!(v["seeds"].as_array().unwrap().len(), 16);
}

#[test]
fn bound_with_few_seeds_warns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dasgd(&["bound", "--steps", "40", "--eta", "0.001"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn bound_needs_estimates_for_logistic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dasgd(&["bound", "--objective", "logistic", "--steps", "40"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = dasgd(
        &["bound", "--objective", "logistic", "--steps", "40", "--assumptions", "estimated", "--at-cap"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn perf_catalog_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dasgd(&["perf", "resnet50", "titan", "tree", "--output-dir", "r"], dir.path());
    assert!(out.status.success());
    let rec: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("r/recommendation.json")).unwrap()).unwrap();
    assert_eq!((rec["d"].as_u64(), rec["tau"].as_u64()), (Some(1), Some(2)));
    for k in ["model", "hardware", "scheme", "feasible", "slack"] {
        assert!(rec.get(k).is_some());
    }
    let csv = std::fs::read_to_string(dir.path().join("r/perf.csv")).unwrap();
    assert!(csv.starts_with("m,algorithm,t_compute,t_comm_exposed,t_total,speedup,comm_fraction\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 9);

    let out = dasgd(&["perf", "resnext50", "k80", "tree", "--output-dir", "x"], dir.path());
    assert!(out.status.success());
    let rec: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("x/recommendation.json")).unwrap()).unwrap();
    assert_eq!((rec["d"].as_u64(), rec["tau"].as_u64()), (Some(4), Some(5)));
}

#[test]
fn perf_single_worker_speedup_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let req = PerfRequest {
        source: PerfSource::Catalog { model: "vgg19".into(), hardware: "k80".into(), scheme: "butterfly".into() },
        m_values: vec![1],
        tau: None,
        delay: None,
        output_dir: dir.path().to_path_buf(),
    };
    let out = commands::perf(&req).unwrap();
    assert_eq!(out.rows.len(), 3);
    assert!(out.rows.iter().all(|r| r.speedup == 1.0));
}

#[test]
fn perf_unknown_model_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dasgd(&["perf", "alexnet", "titan"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn perf_from_inputs_file() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = write(
        dir.path(),
        "net.json",
        r#"{"n_params": 2.5e7, "workers": 16, "local_batch": 64, "dataset_size": 1.28e6,
            "compute": {"kind": "flops", "flop_per_sample": 8e9, "flops_peak": 1e13, "t_local": 0.001},
            "comm": {"kind": "bandwidth", "bandwidth": 2.5e9}, "scheme": "butterfly"}"#,
    );
    let out = dasgd(&["perf", "--inputs", &inputs, "--m", "1,16", "--output-dir", "p"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("p/recommendation.json")).unwrap()).unwrap();
    assert_eq!(rec["model"], "net");
    assert_eq!(rec["hardware"], "custom");
    // t_iter = 64·8e9/1e13 + 1e-3 = 0.0522; t_comm = 4·1e8/2.5e9 = 0.16 → d = 4
    assert_eq!(rec["d"], 4);
}

#[test]
fn sweep_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", r#"{"steps": 40, "sweep": {"xi": [0, 0.25, 0.5]}}"#);
    let out = dasgd(&["sweep", &cfg, "--grid", "tau=2,4", "--seeds", "0,1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.ends_with(",ok")));
    let again = dasgd(&["sweep", &cfg, "--grid", "tau=2,4", "--seeds", "0,1", "--output-dir", "b"], dir.path());
    assert!(again.status.success());
    assert_eq!(csv, std::fs::read_to_string(dir.path().join("b/sweep.csv")).unwrap());
}

#[test]
fn sweep_marks_invalid_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = dasgd(&["sweep", "--steps", "20", "--grid", "delay=1,4"], dir.path());
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert!(csv.lines().nth(2).unwrap().ends_with(",invalid"), "{csv}");
    let out = dasgd(&["sweep", "--grid", "gamma=1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
