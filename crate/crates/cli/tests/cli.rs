use std::path::Path;
use std::process::{Command, Output};

fn dynclass(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynclass"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn small_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("cfg.json");
    std::fs::write(&path, format!(r#"{{"L": 10, "Qv": 50, "seeds": 2{extra}}}"#)).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dynclass(&["run", "--config", &cfg, "--classifier", "model-based"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["R_test_mean"].as_f64(), Some(0.0));
    assert_eq!(report["runs"].as_array().unwrap().len(), 2);
}

#[test]
fn infeasible_horizon_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), r#", "N": 4"#);
    let out = dynclass(&["run", "--config", &cfg, "--classifier", "model-based"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("smallest feasible horizon is 6"));
}

#[test]
fn bad_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), r#", "L": 3"#);
    assert_eq!(dynclass(&["run", "--config", &cfg], dir.path()).status.code(), Some(1));
    assert_eq!(dynclass(&["run", "--soft-C", "-1"], dir.path()).status.code(), Some(1));
    assert_eq!(dynclass(&["sweep", "--axis", "K", "--values", "1"], dir.path()).status.code(), Some(1));
    assert_eq!(dynclass(&["run", "--bogus"], dir.path()).status.code(), Some(1));
}

#[test]
fn sweep_table_has_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dynclass(
        &["sweep", "--config", &cfg, "--axis", "Ts", "--values", "0.1,0.5", "--classifier", "svm-soft", "--soft-C", "10"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "axis_value,R_test_mean,R_test_std,seeds");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0.1,") && lines[2].starts_with("0.5,"));
    assert!(lines[1].ends_with(",2"));
}

#[test]
fn cloud_files_have_unit_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dynclass(&["cloud", "--count", "5", "--seed", "3"], dir.path());
    assert!(out.status.success());
    for (name, label) in [("cloud_class1.csv", "1"), ("cloud_class2.csv", "-1")] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("label,y_0,"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 5);
        for row in rows {
            let mut fields = row.split(',');
            assert_eq!(fields.next(), Some(label));
            let sq: f64 = fields.map(|f| f.parse::<f64>().unwrap().powi(2)).sum();
            assert!((sq - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn margin_report_holds_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dynclass(&["margin-report", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let m = &r["margin"];
    let (bound, rho_m, rho_d) = (
        m["bound"].as_f64().unwrap(),
        m["rho_M"].as_f64().unwrap(),
        m["rho_D"].as_f64().unwrap(),
    );
    assert!(bound <= rho_m + 1e-8 && rho_m <= rho_d + 1e-8);
    assert!(r["risk_bound"]["value"].as_f64().unwrap() > 0.0);
    assert!(r["beta_large_N"]["converged"].as_bool().unwrap());
}
