use realm_sim::harness::export::{write_csv, CSV_HEADER};
use realm_sim::harness::{presets, run_scenario, run_sweep, ScenarioConfig, Sweep};

fn core_fraction(cfg: &ScenarioConfig) -> f64 {
    let out = run_scenario(cfg, false).expect("run");
    assert!(out.report.complete);
    out.report.manager("core").and_then(|m| m.frac_isolated).expect("fraction")
}

#[test]
fn idle_dma_leaves_core_at_isolated_performance() {
    let mut cfg = presets::frag_sweep();
    cfg.platform.managers[1].spec.max_activations = Some(0);
    for r in run_sweep(&cfg).expect("sweep") {
        let f = r.manager("core").and_then(|m| m.frac_isolated).expect("fraction");
        assert!((f - 1.0).abs() < 1e-9, "{}: {f}", r.sweep_label);
    }
}

#[test]
fn presets_round_trip_through_toml() {
    for (name, _) in presets::NAMES {
        let Some(cfg) = presets::scenario(name) else { continue };
        let back = ScenarioConfig::from_toml(&cfg.to_toml()).expect(name);
        assert_eq!(back, cfg, "{name}");
    }
}

#[test]
fn favoring_dma_costs_the_core() {
    let cfg = presets::budget_sweep();
    let Some(Sweep::BudgetRatio { ratios, .. }) = &cfg.sweep else { panic!("not a budget sweep") };
    assert!(ratios.iter().any(|&r| r < 1.0) && ratios.contains(&1.0));
    let reports = run_sweep(&cfg).expect("sweep");
    let at = |v: f64| {
        reports
            .iter()
            .find(|r| r.sweep_value == Some(v))
            .and_then(|r| r.manager("core"))
            .and_then(|m| m.frac_isolated)
            .expect("point")
    };
    let low = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(at(low) < at(1.0), "{} vs {}", at(low), at(1.0));
}

#[test]
fn unregulated_dma_starves_core() {
    assert!(core_fraction(&presets::core_dma()) <= 0.05);
}

#[test]
fn csv_has_one_row_per_manager() {
    let out = run_scenario(&presets::core_dma(), false).expect("run");
    let mut buf = Vec::new();
    write_csv(&mut buf, std::slice::from_ref(&out.report)).expect("csv");
    let mut rd = csv::Reader::from_reader(buf.as_slice());
    let head: Vec<String> = rd.headers().expect("header").iter().map(String::from).collect();
    assert_eq!(head, CSV_HEADER);
    let rows: Vec<_> = rd.records().collect::<Result<_, _>>().expect("rows");
    assert_eq!(rows.len(), out.report.managers.len());
    assert!(rows.iter().all(|r| r.len() == CSV_HEADER.len()));
}

#[test]
fn fault_free_run_has_empty_fault_log() {
    let out = run_scenario(&presets::core_dma(), false).expect("run");
    assert!(out.report.faults.is_empty());
}

#[test]
fn shipped_scenarios_match_presets() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    for (name, _) in presets::NAMES {
        let Some(cfg) = presets::scenario(name) else { continue };
        let text = std::fs::read_to_string(dir.join(format!("{name}.toml"))).expect(name);
        assert_eq!(ScenarioConfig::from_toml(&text).expect(name), cfg, "{name}");
    }
}
