use std::io::Write;
use std::process::{Command, Output};

fn mqpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mqpc")).args(args).output().expect("binary runs")
}

fn config_file(json: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(json.as_bytes()).unwrap();
    f
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn demo_exits_zero_and_is_repeatable() {
    let a = mqpc(&["demo"]);
    let b = mqpc(&["demo"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.contains("M  = (8,7,5,9)"));
    assert!(text.contains("r  = (10,10,0,6)"));
    assert!(text.contains("announcement: P4>P1>P2>P3"));
}

#[test]
fn honest_run_orders_inputs() {
    let cfg = config_file(r#"{"d":11,"n":4,"L":5,"seed":1,"p":[4,3,1,5],"attack":"honest"}"#);
    let out = mqpc(&["run", "--config", cfg.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().last(), Some("P4>P1>P2>P3"));
    for line in text.lines().take_while(|l| l.starts_with('{')) {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("step").is_some() || v["record"] == "summary");
    }
}

#[test]
fn run_output_is_byte_identical() {
    let cfg = config_file(r#"{"d":5,"n":3,"L":2,"seed":9,"p":[2,0,2],"attack":"honest"}"#);
    let path = cfg.path().to_str().unwrap();
    assert_eq!(mqpc(&["run", "--config", path]).stdout, mqpc(&["run", "--config", path]).stdout);
}

#[test]
fn intercept_resend_aborts() {
    let mut aborts = 0;
    for seed in 0..100 {
        let cfg =
            config_file(&format!(r#"{{"d":11,"n":4,"L":20,"seed":{seed},"p":[4,3,1,5],"attack":"intercept_resend"}}"#));
        let out = mqpc(&["run", "--config", cfg.path().to_str().unwrap(), "--format", "json"]);
        if out.status.code() == Some(2) {
            aborts += 1;
            assert!(stdout(&out).contains(r#""status":"aborted""#));
        }
    }
    assert!(aborts >= 99, "{aborts} aborts");
}

#[test]
fn malformed_config_is_usage_error() {
    for json in [r#"{"d":11,"n":1,"L":5,"seed":1,"p":[4]}"#, "{", r#"{"d":11,"n":2,"L":5,"seed":1,"p":[9,1]}"#] {
        let cfg = config_file(json);
        assert_eq!(mqpc(&["run", "--config", cfg.path().to_str().unwrap()]).status.code(), Some(64), "{json}");
    }
    assert_eq!(mqpc(&["run", "--config", "/nonexistent/config.json"]).status.code(), Some(64));
}

#[test]
fn attack_csv_columns() {
    let out =
        mqpc(&["attack", "--attack", "intercept_resend", "--d", "11", "--L", "1", "--trials", "2000", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[6], "0.909090909");
    let empirical: f64 = row[5].parse().unwrap();
    assert!((empirical - 0.909090909).abs() < 0.03);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("audit.json");
    let out = mqpc(&["audit", "--d", "2", "--probe-dim", "2", "--samples", "20", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["violations"], 0);
    assert_eq!(v["identity_on_system"]["probe_independence"], 1.0);
}

#[test]
fn audit_dimension_budget() {
    assert_eq!(mqpc(&["audit", "--d", "9", "--probe-dim", "8"]).status.code(), Some(64));
}

#[test]
fn efficiency_json() {
    let out = mqpc(&["efficiency", "--n", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["counted"]["eta"], "1/20");
    assert_eq!(v["match"], true);
}
