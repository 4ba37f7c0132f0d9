use std::process::Command;

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_realm-sim"))
}

fn stdout(args: &[&str]) -> String {
    let out = cli().args(args).output().expect("spawn");
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).expect("utf8")
}

#[test]
fn lists_builtin_scenarios() {
    let s = stdout(&["list-scenarios"]);
    for name in ["core_dma", "frag_sweep", "budget_sweep", "period_sweep", "fault_wcdt", "area_hermes"] {
        assert!(s.contains(name), "{name} missing");
    }
}

#[test]
fn shown_scenario_runs_from_file() {
    let dir = tempfile::tempdir().expect("tmp");
    let toml = dir.path().join("s.toml");
    std::fs::write(&toml, stdout(&["show", "core_dma"])).expect("write");
    let out = dir.path().join("out");
    let s = stdout(&["run", toml.to_str().unwrap(), "--csv", "--trace", "--out", out.to_str().unwrap()]);
    assert!(s.contains("core_dma"));
    let csv = std::fs::read_to_string(out.join("core_dma.csv")).expect("csv");
    assert!(csv.starts_with("scenario,sweep_value,manager"));
    assert_eq!(csv.lines().count(), 3);
    assert!(out.join("core_dma.trace.csv").exists());
}

#[test]
fn area_of_reference_configuration() {
    let s = stdout(&["area", "area_hermes"]);
    assert!(s.contains("total"));
}

#[test]
fn unknown_scenario_fails() {
    let out = cli().args(["run", "no_such_scenario"]).output().expect("spawn");
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn sweep_prints_csv() {
    let s = stdout(&["sweep", "fault_wcdt"]);
    assert!(s.lines().next().unwrap().starts_with("scenario,"));
    assert!(s.lines().count() > 1);
}
