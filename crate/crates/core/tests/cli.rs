use std::io::Write;
use std::process::{Command, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_bwa");

fn golden(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn trace(script: &str) -> String {
    let path = format!("{}/tests/golden/{script}", env!("CARGO_MANIFEST_DIR"));
    let out = Command::new(BIN).args(["trace", "--script", &path]).output().unwrap();
    assert!(out.status.success());
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn fig2_trace_matches_golden() {
    let got = trace("fig2.script");
    assert_eq!(got, golden("fig2.trace"));
    assert!(got.ends_with("> insert 52\nrank=3 [21,33,45,52,59,67,76,83]\n"));
}

#[test]
fn fig4_trace_matches_golden() {
    let got = trace("fig4.script");
    assert_eq!(got, golden("fig4.trace"));
    assert!(got.ends_with("> delete 59\nfound at 12\nrank=3 [6,21,52,67,77,83,91,·]\nrank=1 [45,82]\n"));
}

#[test]
fn sort_via_stdin() {
    let mut child = Command::new(BIN)
        .arg("sort")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"3 1 2").unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert_eq!(out.stdout, b"1 2 3\n");
}

#[test]
fn verify_exit_codes() {
    let ok = Command::new(BIN)
        .args(["verify", "--size-exp", "14", "--ops", "100000", "--seed", "7"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let bad = Command::new(BIN).args(["verify", "--size-exp", "nope"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("Usage"));
}

#[test]
fn bench_bad_output_path_exits_one() {
    let out = Command::new(BIN)
        .args(["bench", "--min-exp", "2", "--max-exp", "3", "--ops", "insert", "--out", "/no/such/dir/x.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
