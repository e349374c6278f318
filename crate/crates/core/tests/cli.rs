use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adiafactor"))
        .args(args)
        .output()
        .expect("spawn adiafactor")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const COMPAT: [&str; 4] = ["--mode", "paper-compat", "--encoding", "paper-compat"];

#[test]
fn exit_codes() {
    let code = |args: &[&str]| run(args).status.code();
    assert_eq!(code(&["factor", "--n", "15"]), Some(0));
    assert_eq!(code(&["factor", "--n", "36"]), Some(4));
    assert_eq!(code(&["factor", "--n", "49"]), Some(4));
    assert_eq!(code(&["factor", "--n", "35", "--shots", "0"]), Some(4));
    assert_eq!(code(&["factor", "--n", "35", "--mode", "sideways"]), Some(4));
    assert_eq!(code(&["factor"]), Some(4));
    assert_eq!(code(&["--help"]), Some(0));
    // 105 = 3·5·7 has consistent splits, but none lift to two primes
    assert_eq!(code(&["factor", "--n", "105"]), Some(2));
    assert_eq!(code(&["factor", "--from", "/nonexistent/stage.json"]), Some(1));
}

#[test]
fn default_run_of_33() {
    let out = run(&["factor", "--n", "33"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(
        (v["factors"]["p"].as_u64(), v["factors"]["q"].as_u64()),
        (Some(3), Some(11))
    );
    assert_eq!(v["stage"], "report");
    assert!(v.get("timings_ms").is_none() || v["timings_ms"].is_null());
}

#[test]
fn timings_are_opt_in() {
    let v = json(&run(&["factor", "--n", "15", "--timings"]));
    assert!(v["timings_ms"].as_object().is_some_and(|m| m.contains_key("reduce")));
}

#[test]
fn resume_from_reduce_stage() {
    let dir = tempfile::tempdir().unwrap();
    let stage = run(&["reduce", "--n", "143", "--encoding", "columns"]);
    assert!(stage.status.success());
    let path = dir.path().join("stage.json");
    std::fs::write(&path, &stage.stdout).unwrap();

    let direct = run(&["factor", "--n", "143", "--encoding", "columns", "--seed", "4"]);
    let resumed = run(&["factor", "--from", path.to_str().unwrap(), "--seed", "4"]);
    assert!(resumed.status.success());
    assert_eq!(direct.stdout, resumed.stdout);
}

#[test]
fn report_reruns_from_its_config() {
    let dir = tempfile::tempdir().unwrap();
    let first = run(&["factor", "--n", "21", "--encoding", "product", "--seed", "11"]);
    let path = dir.path().join("report.json");
    std::fs::write(&path, &first.stdout).unwrap();
    let again = run(&["factor", "--from", path.to_str().unwrap()]);
    assert!(again.status.success());
    assert_eq!(first.stdout, again.stdout);
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn emits_requested_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let mut args = vec!["factor", "--n", "35"];
    args.extend(COMPAT);
    args.extend([
        "--emit",
        "report-json,qasm,gap-csv,table-text",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let names = files(&out_dir);
    for expected in [
        "report.json",
        "table.txt",
        "gap.csv",
        "circuit.qasm",
        "step_1.qasm",
        "step_8.qasm",
    ] {
        assert!(names.iter().any(|n| n == expected), "missing {expected} in {names:?}");
    }
    let report = std::fs::read(out_dir.join("report.json")).unwrap();
    assert_eq!(report, out.stdout);
    let table = std::fs::read_to_string(out_dir.join("table.txt")).unwrap();
    assert!(table.contains("p1 + q1 = 1"), "{table}");
    assert!(table.contains("-1.2500"), "{table}");
    assert!(table.contains("0.9375"), "{table}");
    let qasm = std::fs::read_to_string(out_dir.join("circuit.qasm")).unwrap();
    assert!(qasm.starts_with("OPENQASM 2.0;"));
    assert!(qasm.contains("measure"));
}

#[test]
fn no_outputs_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["factor", "--n", "15", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert!(files(dir.path()).is_empty());
}

#[test]
fn reduce_renders_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["reduce", "--n", "35"];
    args.extend(COMPAT);
    args.extend(["--emit", "table-text", "--out-dir", dir.path().to_str().unwrap()]);
    let out = run(&args);
    assert!(out.status.success());
    assert_eq!(json(&out)["stage"], "reduce");
    let table = std::fs::read_to_string(dir.path().join("table.txt")).unwrap();
    assert!(table.contains("p1 + q1 = 1"), "{table}");
}

#[test]
fn qasm_verb_for_two_qubits() {
    let out = run(&["qasm", "--n", "35", "--encoding", "columns"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("qreg q[2];"));
    assert!(text.contains("cx q["));
    // Fully reduced instances have nothing to compile.
    assert_eq!(run(&["qasm", "--n", "15"]).status.code(), Some(4));
}

#[test]
fn spectrum_has_one_column_per_level() {
    let out = run(&["spectrum", "--n", "35", "--encoding", "columns"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("s,level0,level1,level2,level3\n"));
    assert_eq!(text.lines().count(), 102);
}
