use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn historic(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_historic"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn pressure_of_the_full_shift() {
    let dir = tempfile::tempdir().unwrap();
    let o = historic(&["pressure"], &configs().join("desk.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let j = read_json(&dir.path().join("pressure.json"));
    let p = j["perron"]["pressure"].as_f64().unwrap();
    assert!((p - std::f64::consts::LN_2).abs() < 1e-6);
    let (lo, hi) = (
        j["cover_bracket"]["t_lower"].as_f64().unwrap(),
        j["cover_bracket"]["t_upper"].as_f64().unwrap(),
    );
    assert!(lo <= p && p <= hi);
    assert_eq!(j["passed"], Value::Bool(true));
    assert!(dir.path().join("pressure_grid.csv").exists());
    assert!(dir.path().join("run.meta.json").exists());
}

#[test]
fn desk_certificate_has_every_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = historic(&["certify"], &configs().join("desk.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cert = read_json(&dir.path().join("certificate.json"));
    let flags = cert["verified"].as_object().unwrap();
    assert_eq!(flags.len(), 7);
    assert!(flags.values().all(|v| v == &Value::Bool(true)), "{flags:?}");
    let lb = cert["lower_bound"].as_f64().unwrap();
    assert!((lb - (2f64.ln() - 0.98)).abs() < 1e-9);
    assert!(cert["equality"].is_object());
    let osc = fs::read_to_string(dir.path().join("oscillation.csv")).unwrap();
    assert_eq!(osc.lines().count(), 4);
    assert!(osc.starts_with("k,t_k,"));
}

#[test]
fn malformed_matrix_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = historic(&["pressure"], &configs().join("malformed.json"), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 1"), "{}", stderr(&o));
    let meta = read_json(&dir.path().join("run.meta.json"));
    assert_eq!(meta["exit_code"], 2);
}

#[test]
fn short_row_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"system": {"transitions": [[1, 1], [1]]}}"#);
    let o = historic(&["pressure"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 1"), "{}", stderr(&o));
}

#[test]
fn duplicated_member_exits_with_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fs::read_to_string(configs().join("desk.json")).unwrap();
    let mut v: Value = serde_json::from_str(&cfg).unwrap();
    v["certify"]["inject_duplicate"] = Value::Bool(true);
    let path = write_config(dir.path(), &v.to_string());
    let o = historic(&["certify", "--depth", "2"], &path, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let transcript = dir.path().join("out").join("transcript.txt");
    assert!(
        stderr(&o).contains(&transcript.display().to_string()),
        "{}",
        stderr(&o)
    );
    assert!(fs::read_to_string(&transcript).unwrap().contains("FAIL"));
    let cert = read_json(&dir.path().join("out").join("certificate.json"));
    assert!(cert["lower_bound"].is_null());
}

#[test]
fn failed_hypothesis_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fs::read_to_string(configs().join("desk.json")).unwrap();
    let mut v: Value = serde_json::from_str(&cfg).unwrap();
    v["params"]["gamma"] = serde_json::json!(0.05);
    let path = write_config(dir.path(), &v.to_string());
    let o = historic(&["certify"], &path, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("hypothesis"), "{}", stderr(&o));
}

#[test]
fn seedless_refuses_to_sample() {
    let dir = tempfile::tempdir().unwrap();
    let o = historic(
        &["certify", "--seedless", "--depth", "2"],
        &configs().join("desk.json"),
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(
        stderr(&o).contains("sampling is disabled"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn outputs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for cmd in ["certify", "katok", "glue", "spectrum"] {
        for d in [&a, &b] {
            let o = historic(
                &[cmd, "--depth", "2"],
                &configs().join("desk.json"),
                d.path(),
            );
            assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
        }
    }
    let mut compared = 0;
    for entry in fs::read_dir(a.path()).unwrap() {
        let name = entry.unwrap().file_name();
        if name == "run.meta.json" {
            continue;
        }
        assert_eq!(
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap(),
            "{name:?}"
        );
        compared += 1;
    }
    assert!(compared >= 10);
}

#[test]
fn json_only_skips_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = historic(
        &["katok", "--json-only"],
        &configs().join("desk.json"),
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("katok.json").exists());
    assert!(!dir.path().join("katok.csv").exists());
}

#[test]
fn components_can_live_in_files() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("system.json"),
        r#"{"preset": "golden_mean"}"#,
    )
    .unwrap();
    fs::write(dir.path().join("psi.json"), r#"{"constant": 1.0}"#).unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"system": "system.json", "bs_dim": {"psi": "psi.json"}}"#,
    );
    let o = historic(&["bs-dim"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let j = read_json(&dir.path().join("out").join("bs_dim.json"));
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    assert!(
        j["bracket"]["lower"].as_f64().unwrap() <= golden.ln()
            && golden.ln() <= j["bracket"]["upper"].as_f64().unwrap()
    );
    let cfg = write_config(
        dir.path(),
        r#"{"system": "system.json", "psi": "psi.json", "equilibrium": {"gibbs_n": 6}}"#,
    );
    let o = historic(&["equilibrium"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let j = read_json(&dir.path().join("out").join("equilibrium.json"));
    assert!((j["pressure"].as_f64().unwrap() - (golden.ln() + 1.0)).abs() < 1e-9);
}

#[test]
fn missing_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"system": "nowhere.json"}"#);
    let o = historic(&["pressure"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere.json"));
}

#[test]
fn composite_route_from_a_mixture() {
    let dir = tempfile::tempdir().unwrap();
    let o = historic(&["certify"], &configs().join("composite.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cert = read_json(&dir.path().join("certificate.json"));
    assert_eq!(cert["route"]["route"], "composite");
    assert_eq!(cert["route"]["w1"], 0.5);
}

#[test]
fn golden_mean_commands_pass() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["pressure", "equilibrium", "glue", "bs-dim", "spectrum"] {
        let o = historic(&[cmd], &configs().join("golden_mean.json"), dir.path());
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
    }
    let spectrum = read_json(&dir.path().join("spectrum.json"));
    let rows = spectrum["rows"].as_array().unwrap();
    let p = spectrum["pressure"].as_f64().unwrap();
    assert!(rows
        .iter()
        .all(|r| r["value"].as_f64().unwrap() <= p + 1e-9));
}
