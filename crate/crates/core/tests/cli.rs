use std::process::Command;

fn rrcluster(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rrcluster")).args(args).env_remove("RRCLUSTER_WORKERS").output().unwrap()
}

#[test]
fn run_preset_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = rrcluster(&[
        "run",
        "preset:balanced4",
        "--set",
        "rounds=2",
        "--set",
        "seeds=[0]",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("seed,round,method,B,eps_dp"));
    assert!(out.with_extension("json").exists());
}

#[test]
fn bad_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"k": 1}"#).unwrap();
    let o = rrcluster(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = rrcluster(&["run", "preset:balanced4", "--set", "b=100"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("b = 100"));
}

#[test]
fn account_and_calibrate_print_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    std::fs::write(
        &path,
        r#"{"c_theta": 1, "c_s": 0.1, "sigma_theta": 4, "sigma_s": 4, "q": 0.1, "rounds": 200,
            "delta": 0.001, "alpha_grid": [2, 3, 4, 5, 6, 8, 16, 32, 64]}"#,
    )
    .unwrap();
    let o = rrcluster(&["account", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["eps"].as_f64().unwrap() - 5.1744284442615).abs() < 1e-9);

    let req = dir.path().join("c.json");
    std::fs::write(&req, r#"{"target_eps": 4, "q": 0.1, "rounds": 200}"#).unwrap();
    let o = rrcluster(&["calibrate", req.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = rrcluster(&["calibrate", req.to_str().unwrap(), "--set", "target_eps=2"]);
    assert_eq!(o.status.code(), Some(3));
}
