use std::path::{Path, PathBuf};
use std::process::Command;

fn uqpc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uqpc"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn invalid_config_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(config("variance_d3.toml")).unwrap().replace("d = 3", "d = 2");
    std::fs::write(&bad, text).unwrap();
    for args in [vec!["oracle"], vec!["run", "--out", "x"]] {
        let out = uqpc().args(&args).arg("--config").arg(&bad).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("problem.d"));
    }
    let missing = uqpc().args(["oracle", "--config", "/nonexistent.toml"]).status().unwrap();
    assert_eq!(missing.code(), Some(2));
    std::fs::write(&bad, "seed = 1\n[problem]\nmaterials = []\n").unwrap();
    let empty = uqpc().args(["oracle", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(empty.code(), Some(2));
}

#[test]
fn zero_workers_is_a_config_error() {
    let out = uqpc()
        .args(["run", "--workers", "0", "--out", "unused", "--config"])
        .arg(config("budget_d1.toml"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_prints_exact_statistics() {
    let out = uqpc().args(["oracle", "--config"]).arg(config("variance_d3.toml")).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["d"], 3);
    assert_eq!(v["coefficients"].as_array().unwrap().len(), 84);
    let first: Vec<f64> = v["sobol_first"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((first[0] - first[2]).abs() < 1e-14);
}

#[test]
fn run_writes_variance_reports() {
    let dir = tempfile::tempdir().unwrap();
    let status = uqpc()
        .args(["run", "--repetitions", "5", "--seed", "3", "--config"])
        .arg(config("budget_d1.toml"))
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let records = std::fs::read_to_string(dir.path().join("records.csv")).unwrap();
    let mut lines = records.lines();
    assert_eq!(lines.next(), Some("n_xi,n_eta,method,repetition,estimate"));
    // var_deconv is unavailable at N_eta = 1.
    assert_eq!(lines.count(), 5 * (3 + 4 + 4 + 4));
    assert!(records.contains("\n385,1,pc_mc21,0,"));
    assert!(records.contains("\n42,50,var_deconv,4,"));
    for m in ["pc_mc21", "pc_bias", "pc_bias_trim"] {
        let h = std::fs::read_to_string(dir.path().join(format!("density_nxi154_neta10_{m}.csv"))).unwrap();
        assert!(h.starts_with("bin_lo,bin_hi,density,count\n"));
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["master_seed"], 3);
    let cells = summary["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 16);
    assert!(cells.iter().any(|c| c["method"] == "var_deconv" && c["n_eta"] == 1 && c["available"] == false));
    assert!(cells.iter().all(|c| c["available"] == false || c["realized_cost"].as_f64().unwrap() <= 2310.0));
}

#[test]
fn run_writes_response_and_gsa_reports() {
    let dir = tempfile::tempdir().unwrap();
    let status = uqpc()
        .args(["run", "--config"])
        .arg(config("response_d1.toml"))
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    for b in 0..3 {
        for v in ["full", "trim"] {
            let text = std::fs::read_to_string(dir.path().join(format!("response_nxi2000_neta50_b{b}_{v}.csv"))).unwrap();
            let rows: Vec<&str> = text.lines().collect();
            assert_eq!(rows[0], "xi,predict,band_lo,band_hi,analytic");
            assert_eq!(rows.len(), 102);
            assert!(rows[1].starts_with("-1.0,"));
            let analytic: f64 = rows[1].rsplit(',').next().unwrap().parse().unwrap();
            assert!((analytic - (-0.05f64).exp()).abs() < 1e-15);
        }
    }

    let gsa = tempfile::tempdir().unwrap();
    let status = uqpc()
        .args(["run", "--repetitions", "4", "--config"])
        .arg(config("gsa_d3.toml"))
        .arg("--out")
        .arg(gsa.path())
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(gsa.path().join("gsa.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 4 * 3);
    assert!(!gsa.path().join("records.csv").exists());
}
