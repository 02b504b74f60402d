use std::fs;
use std::process::{Command, Output};

fn thzlink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thzlink")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn storage_bound() {
    let o = thzlink(&["storage", "--throughput", "1e12", "--latency", "1e-3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "1000000000");
}

#[test]
fn domain_error_exits_one() {
    let o = thzlink(&["storage", "--throughput=-1", "--latency", "1e-3"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn unknown_key_exits_two_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    fs::write(&p, "snr_grid_db = [1.0]\n[code]\nlist_sise = 4\n").unwrap();
    let o = thzlink(&["run", "--preset", "custom", "--config", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("list_sise"));
}

#[test]
fn missing_config_and_bad_flags_exit_two() {
    assert_eq!(code(&thzlink(&["run", "--config", "/nonexistent/x.toml"])), 2);
    assert_eq!(code(&thzlink(&["run", "--emit", "xml"])), 2);
    assert_eq!(code(&thzlink(&["frobnicate"])), 2);
}

#[test]
fn run_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "label = \"tiny\"\nsnr_grid_db = [30.0, 0.0]\n[stop]\nmax_blocks = 3\n[channel]\nnum_subcarriers = 16\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = thzlink(&[
        "run",
        "--preset",
        "custom",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("custom.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "snr_db,blocks,block_errors,bler,mean_queries,mean_op_count,abandonment_rate,seed");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,"));
    assert!(lines[2].starts_with("30,3,"));
    let json = fs::read_to_string(out.join("custom.json")).unwrap();
    assert!(json.contains("\"channel_provenance\": \"stand-in"));
}

#[test]
fn report_rejects_unrelated_configs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.toml");
    let b = dir.path().join("b.toml");
    fs::write(&a, "snr_grid_db = [5.0]\ndetector = \"cd\"\n").unwrap();
    fs::write(&b, "snr_grid_db = [5.0]\ndetector = \"pcd\"\ndecode_input = \"psi\"\n").unwrap();
    let o = thzlink(&["report", "--baseline", a.to_str().unwrap(), "--variant", b.to_str().unwrap(), "--blocks", "2"]);
    assert_eq!(code(&o), 1);

    fs::write(&b, "snr_grid_db = [5.0]\ndetector = \"pcd\"\n").unwrap();
    let o = thzlink(&["report", "--baseline", a.to_str().unwrap(), "--variant", b.to_str().unwrap(), "--blocks", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["axis"], "detector");
    assert!(report["theta1"].as_f64().unwrap() <= 0.7);
}
