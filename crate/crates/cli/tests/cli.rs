// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn lrsm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrsm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_is_deterministic_and_round_trips() {
    let dir = TempDir::new().unwrap();
    for out in ["a.csv", "b.csv"] {
        let o = lrsm(
            dir.path(),
            &[
                "simulate", "--model", "B1", "--n", "2000", "--seed", "7", "--out", out,
            ],
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x");
    assert_eq!(lines.len(), 2001);
    assert!(lines[1..].iter().all(|l| l.parse::<u64>().is_ok()));

    let truth = json(&dir.path().join("a.csv.truth.json"));
    assert_eq!(truth["schema_version"], 1);
    assert_eq!(truth["model"], "B1");
    assert_eq!(truth["seed"], 7);
    assert_eq!(truth["n"], 2000);
    assert_eq!(truth["taus"], serde_json::json!([1000]));

    let o = lrsm(
        dir.path(),
        &[
            "simulate", "--model", "B1", "--n", "2000", "--seed", "8", "--out", "c.csv",
        ],
    );
    assert!(o.status.success());
    assert_ne!(
        text.as_bytes(),
        std::fs::read(dir.path().join("c.csv")).unwrap().as_slice()
    );
}

#[test]
fn unknown_model_exits_2_naming_valid_models() {
    let dir = TempDir::new().unwrap();
    let o = lrsm(
        dir.path(),
        &["simulate", "--model", "X9", "--n", "100", "--out", "x.csv"],
    );
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(
        msg.contains("X9") && msg.contains("A1") && msg.contains("B1") && msg.contains("C9"),
        "{msg}"
    );
}

#[test]
fn malformed_input_exits_2() {
    let dir = TempDir::new().unwrap();
    for (name, body) in [
        ("neg.csv", "x\n1\n2\n-3\n4\n"),
        ("float.csv", "1\n2.5\n"),
        ("text.csv", "1\nabc\n"),
    ] {
        std::fs::write(dir.path().join(name), body).unwrap();
        let o = lrsm(dir.path(), &["detect", "--in", name]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", stderr(&o));
    }
    let o = lrsm(dir.path(), &["detect", "--in", "neg.csv"]);
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
    let o = lrsm(dir.path(), &["detect", "--in", "missing.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn short_series_exits_3() {
    let dir = TempDir::new().unwrap();
    let body: String = (0..50).map(|i| format!("{}\n", i % 4)).collect();
    std::fs::write(dir.path().join("s.csv"), body).unwrap();
    let o = lrsm(dir.path(), &["detect", "--in", "s.csv", "--h", "40"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = lrsm(dir.path(), &["ci", "--in", "s.csv", "--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn unknown_experiment_exits_2() {
    let dir = TempDir::new().unwrap();
    let o = lrsm(dir.path(), &["bench", "--exp", "table9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("table1"), "{}", stderr(&o));
}

fn homogeneous_spec(dir: &Path) {
    let o = lrsm(
        dir,
        &[
            "simulate", "--model", "B1", "--n", "1200", "--out", "b1.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let truth = json(&dir.join("b1.csv.truth.json"));
    let mut spec = truth["spec"].clone();
    spec["segments"].as_array_mut().unwrap().truncate(1);
    spec["taus"]["taus"] = serde_json::json!([]);
    std::fs::write(dir.join("spec.json"), spec.to_string()).unwrap();
}

#[test]
fn homogeneous_series_has_no_change_point() {
    let dir = TempDir::new().unwrap();
    homogeneous_spec(dir.path());
    let o = lrsm(
        dir.path(),
        &[
            "simulate",
            "--spec",
            "spec.json",
            "--seed",
            "3",
            "--out",
            "h.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = lrsm(
        dir.path(),
        &["detect", "--in", "h.csv", "--h", "80", "--out", "rep.json"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rep = json(&dir.path().join("rep.json"));
    assert_eq!(rep["schema_version"], 1);
    assert_eq!(rep["m_hat"], 0);
    assert_eq!(rep["segments"].as_array().unwrap().len(), 1);

    let o = lrsm(
        dir.path(),
        &[
            "ci",
            "--in",
            "h.csv",
            "--estimate",
            "rep.json",
            "--out",
            "ci.json",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let ci = json(&dir.path().join("ci.json"));
    assert_eq!(ci["methods"].as_array().unwrap().len(), 3);
    assert!(ci["methods"][0]["error"].is_string());
}

#[test]
fn detect_report_and_intervals() {
    let dir = TempDir::new().unwrap();
    let o = lrsm(
        dir.path(),
        &[
            "simulate", "--model", "B1", "--n", "1200", "--seed", "11", "--out", "b1.csv",
        ],
    );
    assert!(o.status.success());
    let o = lrsm(
        dir.path(),
        &[
            "detect",
            "--in",
            "b1.csv",
            "--h",
            "80",
            "--p-max",
            "5",
            "--out",
            "rep.json",
            "--plot-data",
            "plot.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rep = json(&dir.path().join("rep.json"));
    assert_eq!(rep["schema_version"], 1);
    assert_eq!(rep["n"], 1200);
    assert_eq!(rep["m_hat"], 1);
    let tau = rep["taus"][0].as_u64().unwrap();
    assert!((560..=640).contains(&tau), "{tau}");
    assert_eq!(rep["orders"].as_array().unwrap().len(), 2);
    assert_eq!(
        rep["diagnostics"]["ljung_box"].as_array().unwrap().len(),
        10
    );
    assert!(rep["diagnostics"]["rms"].as_f64().unwrap() > 0.0);
    for key in ["pearson_mean", "pearson_variance"] {
        assert!(rep["diagnostics"][key].is_f64(), "{key}");
    }
    assert!(!rep["stage_trace"]["candidates"]
        .as_array()
        .unwrap()
        .is_empty());
    for seg in rep["segments"].as_array().unwrap() {
        let p = seg["order"].as_u64().unwrap() as usize;
        assert_eq!(seg["betas"].as_array().unwrap().len(), p);
        assert_eq!(seg["std_errors"].as_array().unwrap().len(), p + 1);
    }

    let plot = std::fs::read_to_string(dir.path().join("plot.csv")).unwrap();
    let mut lines = plot.lines();
    assert_eq!(lines.next(), Some("t,score,h"));
    assert_eq!(lines.count(), 1200 - 2 * 80 + 1);

    let args = [
        "ci",
        "--in",
        "b1.csv",
        "--estimate",
        "rep.json",
        "--method",
        "all",
        "--B",
        "50",
        "--nb",
        "adaptive",
        "--seed",
        "5",
    ];
    let o1 = lrsm(dir.path(), &args);
    let o2 = lrsm(dir.path(), &args);
    assert!(o1.status.success(), "{}", stderr(&o1));
    assert_eq!(o1.stdout, o2.stdout);
    let ci: Value = serde_json::from_slice(&o1.stdout).unwrap();
    assert_eq!(ci["schema_version"], 1);
    let methods = ci["methods"].as_array().unwrap();
    let names: Vec<&str> = methods
        .iter()
        .map(|m| m["method"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["approx", "pba", "bba"]);
    for m in methods {
        assert!(m["error"].is_null(), "{m}");
        let c = &m["simultaneous"][0];
        let (lo, hi) = (c["lower"].as_u64().unwrap(), c["upper"].as_u64().unwrap());
        assert!(lo <= tau && tau <= hi, "{c}");
    }
    assert!(methods[2]["pointwise"][0]["meta"]["n_b"].is_u64());
    assert_eq!(
        methods[0]["pointwise"][0]["meta"]["quantile"]
            .as_f64()
            .map(|q| (q * 1e3).round()),
        Some(7687.0)
    );

    let o = lrsm(
        dir.path(),
        &[
            "ci",
            "--in",
            "b1.csv",
            "--estimate",
            "rep.json",
            "--nb",
            "wide",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = TempDir::new().unwrap();
    let o = lrsm(
        dir.path(),
        &[
            "simulate", "--model", "B1", "--n", "1200", "--seed", "11", "--out", "b1.csv",
        ],
    );
    assert!(o.status.success());
    std::fs::write(
        dir.path().join("cfg.toml"),
        "threads = 1\n[detect]\nh = 80\np-max = 2\nm-max = 5\n",
    )
    .unwrap();
    let o = lrsm(
        dir.path(),
        &[
            "--config", "cfg.toml", "detect", "--in", "b1.csv", "--p-max", "3",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["config"]["radii"], serde_json::json!([80]));
    assert_eq!(rep["config"]["p_max"], 3);
    assert_eq!(rep["config"]["m_max"], 5);

    std::fs::write(dir.path().join("bad.toml"), "[detect]\nh = \"wide\"\n").unwrap();
    let o = lrsm(
        dir.path(),
        &["--config", "bad.toml", "detect", "--in", "b1.csv"],
    );
    assert_eq!(o.status.code(), Some(2));
}
