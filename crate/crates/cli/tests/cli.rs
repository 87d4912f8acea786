use std::path::PathBuf;
use std::process::{Command, Output};

fn rgl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rgl")).args(args).output().expect("run rgl")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rgl-cli-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn theory_bernoulli_half() {
    let v = json(&rgl(&["theory", "--dist", "bernoulli:p=0.5"]));
    assert!((v["x_weq"].as_f64().unwrap() - 0.2271).abs() < 5e-4);
    assert_eq!(v["config"]["dist"], "bernoulli:p=0.5");
    assert_eq!(v["alpha"], 0.5);
}

#[test]
fn theory_high_p_saturates() {
    for q in ["0.5", "0.6", "0.75", "0.9"] {
        let v = json(&rgl(&["theory", "--dist", &format!("bernoulli:p={q}")]));
        assert_eq!(v["x_opt"].as_f64(), Some(1.0), "q={q}");
        assert_eq!(v["x_beq"].as_f64(), Some(1.0), "q={q}");
    }
}

#[test]
fn theory_marks_infinite_price_of_anarchy() {
    let v = json(&rgl(&["theory", "--dist", "bernoulli:p=0.2"]));
    assert_eq!(v["x_weq"].as_f64(), Some(0.0));
    assert_eq!(v["price_of_anarchy"], "infinite");
    assert!(v["price_of_stability"].is_number());
}

#[test]
fn theory_csv() {
    let out = rgl(&["theory", "--dist", "uniform:a=0,b=1", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# config: "));
    assert_eq!(lines[1], "quantity,value");
    assert!(lines.iter().any(|l| l.starts_with("x_typ,0.666666666666")));
}

#[test]
fn simulate_is_reproducible() {
    let dir = scratch("sim");
    let (a, b) = (dir.join("a"), dir.join("b"));
    for (d, w) in [(&a, "1"), (&b, "2")] {
        let out = rgl(&[
            "simulate",
            "--dist",
            "uniform:a=0,b=1",
            "--n",
            "12",
            "--reps",
            "100",
            "--seed",
            "1",
            "--workers",
            w,
            "--out-dir",
            d.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["results.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.join("results.csv")).unwrap();
    assert!(csv.starts_with("# config: {\"dist\":\"uniform:a=0,b=1\""));
    assert_eq!(csv.lines().count(), 102);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn simulate_from_config_file() {
    let dir = scratch("cfg");
    let cfg = dir.join("run.json");
    std::fs::write(&cfg, r#"{"dist":"bernoulli:p=0.5","n":[4,5],"replications":20,"seed":3,"epsilons":[0.1]}"#)
        .unwrap();
    let v = json(&rgl(&["simulate", "--config", cfg.to_str().unwrap(), "--out-dir", dir.to_str().unwrap()]));
    assert_eq!(v["cells"].as_array().unwrap().len(), 2);
    assert_eq!(v["config"]["seed"], 3);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn brute_two_players() {
    let v = json(&rgl(&["brute", "--p", "0.5", "--n", "2", "--thresholds", "1"]));
    assert_eq!(v["result"]["ne"]["mean"], 2.25);
    assert_eq!(v["result"]["thresholds"][0]["z_plus"]["mean"], 1.0);
}

#[test]
fn figures_embed_config() {
    let out = rgl(&["figures", "--which", "1", "--grid", "9"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# config: {\"which\":1,\"grid\":9}"));
    assert_eq!(lines[1], "p,x_opt,x_beq,x_weq,x_typ");
    assert_eq!(lines.len(), 11);
    assert!(lines[6].starts_with("0.5,1,1,0.2270"), "{}", lines[6]);
    let out = rgl(&["figures", "--which", "2", "--p", "0.5", "--grid", "3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# level_eq: 0.4054651081081"));
    assert!(text.contains("\nx,h_p,h_p_tilde\n0,"));
}

#[test]
fn sweep_over_p_grid() {
    let dir = scratch("sweep");
    let v = json(&rgl(&[
        "sweep",
        "--p-grid",
        "0.3,0.5",
        "--n-range",
        "3:5:2",
        "--reps",
        "10",
        "--seed",
        "2",
        "--out-dir",
        dir.to_str().unwrap(),
    ]));
    let runs = v.as_array().unwrap();
    assert_eq!(runs.len(), 2);
    assert_eq!(runs[1]["config"]["n"], serde_json::json!([3, 5]));
    assert!(dir.join("run_001").join("results.csv").exists());
    assert!(dir.join("sweep.json").exists());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn validation_errors_exit_two() {
    for args in [
        vec!["theory", "--dist", "cauchy:x0=0,gamma=1"],
        vec!["theory", "--dist", "bernoulli:p=1.5"],
        vec!["theory", "--dist", "bernoulli:p=0.5", "--bogus"],
        vec!["simulate", "--dist", "bernoulli:p=0.5", "--n", "4", "--reps", "0", "--seed", "1"],
        vec!["simulate", "--dist", "bernoulli:p=0.5", "--n", "4", "--reps", "3"],
        vec!["brute", "--p", "0.5", "--n", "4"],
        vec!["figures", "--which", "3"],
    ] {
        let out = rgl(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn capacity_errors_exit_three() {
    let dir = scratch("cap");
    let out = rgl(&[
        "simulate",
        "--dist",
        "uniform:a=0,b=1",
        "--n",
        "3,18",
        "--reps",
        "2",
        "--seed",
        "1",
        "--mem-cap",
        "100000",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--mem-cap"), "{stderr}");
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["cells"][0]["completed"], 2);
    assert!(summary["cells"][1]["error"].is_string());

    let out = Command::new(env!("CARGO_BIN_EXE_rgl"))
        .args(["simulate", "--dist", "bernoulli:p=0.5", "--n", "20", "--reps", "1", "--seed", "1"])
        .args(["--out-dir", dir.to_str().unwrap()])
        .env("RGL_MEM_CAP_BYTES", "1024")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let _ = std::fs::remove_dir_all(&dir);
}
