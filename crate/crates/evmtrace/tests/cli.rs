//! End-to-end runs of the `evmtrace` binary.

mod common;

use std::process::Command;

use evmtrace::report::ContractReport;

use common::corpus;

fn evmtrace() -> Command {
    Command::new(env!("CARGO_BIN_EXE_evmtrace"))
}

#[test]
fn analyze_bytecode_reports_and_signals_findings() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = corpus();
    let f = fixtures.iter().find(|f| f.name == "anyone_can_kill").unwrap();
    let code = f.chain.code(common::subject()).unwrap();
    let hex_path = dir.path().join("code.hex");
    std::fs::write(&hex_path, hex::encode(code)).unwrap();
    let out_path = dir.path().join("report.json");

    let status = evmtrace()
        .args(["analyze", "--bytecode"])
        .arg(&hex_path)
        .args(["--balance", "5", "--depth", "1", "--validate", "--fail-on-findings"])
        .arg("--out")
        .arg(&out_path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1), "findings should exit 1");

    let report: ContractReport =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert!(report.has_findings());
    let suicidal = report
        .categories
        .iter()
        .find(|c| c.category == "suicidal")
        .unwrap();
    assert_eq!(
        suicidal.candidates[0].verdict.as_deref(),
        Some("true_positive")
    );
}

#[test]
fn analyze_whole_snapshot_with_workers() {
    let dir = tempfile::tempdir().unwrap();
    // One killable and one inert contract in the same snapshot.
    let fixtures = corpus();
    let killable = fixtures.iter().find(|f| f.name == "anyone_can_kill").unwrap();
    let mut chain = killable.chain.fork();
    let inert = evmtrace::chainstate::addr("0x00000000000000000000000000000000000000c2");
    chain.account_mut(inert).code = Some(vec![0x00]); // STOP
    let snap = dir.path().join("snap.json");
    chain.save_snapshot(&snap).unwrap();

    let out = evmtrace()
        .args(["analyze", "--snapshot"])
        .arg(&snap)
        .args(["--category", "suicidal", "--depth", "1", "--validate", "--workers", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let contracts = doc["contracts"].as_array().unwrap();
    assert_eq!(contracts.len(), 2);
    assert_eq!(doc["summary"]["flagged"]["suicidal"], 1);
}

#[test]
fn malformed_input_exits_2() {
    let out = evmtrace()
        .args(["analyze", "--snapshot", "/nonexistent/snap.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}
