use std::path::Path;
use std::process::{Command, Output};

fn qbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbound")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows of a CSV table, header lines stripped.
fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(2).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap_or_else(|_| panic!("not a number: {s:?}"))
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const QUBIT_IDENTITY: &str = r#"{"in_dim": 2, "out_dim": 2, "kraus": [[[[1,0],[0,0]],[[0,0],[1,0]]]]}"#;
const QUBIT_FLIP: &str = r#"{"in_dim": 2, "out_dim": 2, "kraus": [[[[0,0],[1,0]],[[1,0],[0,0]]]]}"#;

#[test]
fn every_csv_starts_with_the_header_line() {
    let cases: &[&[&str]] = &[
        &["rains-state", "--state", "isotropic", "--p-grid", "0:1:2"],
        &["rains-channel", "--channel", "erasure", "--grid", "0:1:2"],
        &["rains-bidir", "--channel", "cnot", "--p-grid", "0:1:2"],
        &["capacity", "--cell", "erasure", "--q-grid", "0:1:2"],
        &["private-rate", "--q-grid", "0:1:2"],
        &["secure-read", "--preset", "gadc", "--eta0", "0.45", "--eta1", "0.4", "--q", "0.005", "--n", "1000"],
        &["dynamics", "--preset", "gadc", "--points", "5"],
        &["nonunitarity", "--channel", "depolarizing", "--q-grid", "0:1:2"],
    ];
    for args in cases {
        let o = qbound(args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let out = stdout(&o);
        let first = out.lines().next().unwrap();
        assert!(first.starts_with("# quantity="), "{args:?}: {first}");
        assert!(first.contains("; base=") && first.contains("; tol="), "{first}");
        assert!(rows(&out).len() >= 1);
    }
}

#[test]
fn partial_swap_sweep_declines_from_two_ebits_to_zero() {
    let o = qbound(&["rains-bidir", "--channel", "partial-swap", "--p-grid", "0:1:21"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().nth(1).unwrap(), "p,R_max,primal,dual,gap");
    let r = rows(&out);
    assert_eq!(r.len(), 21);
    assert!((num(&r[0][1]) - 2.0).abs() < 1e-6);
    assert!(num(&r[20][1]).abs() < 1e-6);
    for w in r.windows(2) {
        assert!(num(&w[1][1]) <= num(&w[0][1]) + 1e-8);
    }
}

#[test]
fn fraction_grid_reaches_four_thirds() {
    let o = qbound(&["nonunitarity", "--channel", "depolarizing", "--d", "2", "--q-grid", "0:4/3:25"]);
    assert!(o.status.success());
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 25);
    assert_eq!(num(&r[24][0]), 4.0 / 3.0);
    for row in &r {
        assert!((num(&row[1]) - num(&row[3])).abs() < 1e-6, "{row:?}");
    }
}

#[test]
fn gadc_witness_goes_negative_at_omega_five() {
    let o = qbound(&["dynamics", "--preset", "gadc", "--omega", "5", "--t-max", "5"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().nth(1).unwrap(), "t,S,dS/dt,lower_bound,f(t)");
    let r = rows(&out);
    assert_eq!(r.len(), 501);
    assert!(r.iter().any(|row| num(&row[4]) < -0.1));
}

#[test]
fn reruns_are_byte_identical() {
    for args in [
        &["rains-bidir", "--channel", "partial-swap-traceout", "--p-grid", "0:1:5"][..],
        &["--seed", "7", "props", "--shrink", "20"][..],
        &["--format", "json", "capacity", "--cell", "depolarizing", "--q-grid", "0:1:4"][..],
    ] {
        let a = qbound(args);
        let b = qbound(args);
        assert!(!a.stdout.is_empty());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn parse_errors_exit_2() {
    for args in [
        &["rains-bidir", "--p-grid", "0:1"][..],
        &["rains-bidir", "--p-grid", "0:1/0:3"][..],
        &["nonunitarity", "--channel", "warp-drive"][..],
        &["no-such-subcommand"][..],
    ] {
        assert_eq!(qbound(args).status.code(), Some(2), "{args:?}");
    }
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"in_dim\": 2");
    let o = qbound(&["rains-channel", "--channel-json", &bad]);
    assert_eq!(o.status.code(), Some(2));
    let diag: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(diag["kind"], "input");
}

#[test]
fn numerical_failures_exit_3_with_diagnostic_json() {
    let o = qbound(&["nonunitarity", "--channel", "erasure", "--q-grid", "0:1:2"]);
    assert_eq!(o.status.code(), Some(3));
    let diag: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(diag["subcommand"], "nonunitarity");
    assert_eq!(diag["kind"], "domain");
    assert!(diag["error"].as_str().unwrap().contains("unital"));

    let o = qbound(&["rains-channel", "--channel", "depolarizing", "--grid", "0:2:3"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn json_files_drive_channel_and_cell_commands() {
    let dir = tempfile::tempdir().unwrap();
    let ch = write(dir.path(), "id.json", QUBIT_IDENTITY);
    let o = qbound(&["rains-channel", "--channel-json", &ch]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!((num(&rows(&stdout(&o))[0][1]) - 1.0).abs() < 1e-6);

    let cell = write(dir.path(), "cell.json", &format!("{{\"0\": {QUBIT_IDENTITY}, \"1\": {QUBIT_FLIP}}}"));
    let o = qbound(&["capacity", "--cell-json", &cell]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!((num(&rows(&stdout(&o))[0][0]) - 1.0).abs() < 1e-8);

    let o = qbound(&["private-rate", "--cell-json", &cell]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = &rows(&stdout(&o))[0];
    assert!((num(&r[3]) - 1.0).abs() < 1e-9 && num(&r[2]).abs() < 1e-9, "{r:?}");

    let state = write(
        dir.path(),
        "phi.json",
        r#"{"dims": [2, 2], "matrix": [[[0.5,0],[0,0],[0,0],[0.5,0]], [[0,0],[0,0],[0,0],[0,0]], [[0,0],[0,0],[0,0],[0,0]], [[0.5,0],[0,0],[0,0],[0.5,0]]]}"#,
    );
    let o = qbound(&["rains-state", "--state-json", &state]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!((num(&rows(&stdout(&o))[0][1]) - 1.0).abs() < 1e-6);
}

#[test]
fn output_flag_and_json_format() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let o = qbound(&["--format", "json", "--output", path.to_str().unwrap(), "capacity", "--cell", "energy", "--ns-grid", "0:1:3"]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["base"], "bits");
    assert_eq!(v["columns"], serde_json::json!(["N_S", "bound"]));
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert!((v["rows"][2][1].as_f64().unwrap() - 4.0).abs() < 1e-12);
}

#[test]
fn props_reports_every_suite_and_flags_failures() {
    let o = qbound(&["props", "--shrink", "20"]);
    let out = stdout(&o);
    let r = rows(&out);
    assert_eq!(r.len(), 10);
    let failed = r.iter().any(|row| row[4] == "false");
    assert_eq!(o.status.code(), Some(if failed { 1 } else { 0 }));
}
