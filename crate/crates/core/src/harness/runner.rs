//! Builds platforms from scenarios and runs them with isolated baselines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use super::metrics::{
    fraction_of_isolated, runtime, steady_latency, workload, FaultTimeline, LoggedFault, ManagerMetrics,
    MetricsReport, RegionUtilization, Workload,
};
use super::scenario::{ScenarioConfig, ScenarioError};
use crate::platform::{ManagerStats, Platform, PlatformError, RegError};
use crate::protocol::TraceRecord;
use crate::simkernel::SimError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Platform(#[from] PlatformError),
    #[error("register programming failed: {0}")]
    Reg(#[from] RegError),
    #[error("iREALM of manager {0:?} rejected its configuration")]
    Config(String),
    #[error("simulation error: {0}")]
    Sim(#[from] SimError),
}

pub struct RunOutput {
    pub report: MetricsReport,
    pub trace: Vec<TraceRecord>,
}

/// Builds and programs the platform. With `isolated = Some(i)` only manager
/// `i` runs and every iREALM stays in bypass.
pub fn build_platform(cfg: &ScenarioConfig, trace: bool, isolated: Option<usize>) -> Result<Platform, HarnessError> {
    let mut spec = cfg.platform.clone();
    if cfg.start_jitter > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for m in &mut spec.managers {
            m.spec.start_cycle += rng.gen_range(0..=cfg.start_jitter);
        }
    }
    let mut p = Platform::build(&spec, trace)?;
    let owner = cfg.config_owner;
    if isolated.is_none() {
        for prog in &cfg.irealm {
            let m = cfg.manager_index(&prog.manager)?;
            let u = p.irealm_of(m).expect("validated");
            p.program_irealm(owner, u, &prog.config)?;
            if p.read_reg(owner, &format!("irealm{u}.config_error"))? != 0 {
                return Err(HarnessError::Config(prog.manager.clone()));
            }
        }
    }
    for prog in &cfg.erealm {
        let j = cfg.subordinate_index(&prog.subordinate)?;
        let e = p.erealm_of(j).expect("validated");
        p.program_erealm(owner, e, &prog.config)?;
    }
    for w in &cfg.registers {
        if isolated.is_some() && w.name.starts_with("irealm") {
            continue;
        }
        p.write_reg(w.requester, &w.name, w.value)?;
    }
    if let Some(i) = isolated {
        for j in (0..p.num_managers()).filter(|&j| j != i) {
            p.manager_mut(j).set_enabled(false);
        }
    }
    Ok(p)
}

fn bounded(p: &Platform, i: usize) -> bool {
    p.manager(i).spec().max_activations.is_some() && p.manager(i).spec().bytes_per_activation > 0
}

/// Steps until every bounded, enabled manager in `watch` is done or
/// `max_cycles` have elapsed. Returns the cycle count.
fn simulate(p: &mut Platform, watch: &[usize], max_cycles: u64) -> Result<u64, SimError> {
    let watch: Vec<usize> = watch.iter().copied().filter(|&i| bounded(p, i)).collect();
    while p.sim.cycle() < max_cycles {
        if !watch.is_empty() && watch.iter().all(|&i| p.manager(i).is_done()) {
            break;
        }
        p.sim.step()?;
    }
    Ok(p.sim.cycle())
}

fn enabled_in(cfg: &ScenarioConfig, i: usize) -> bool {
    let s = &cfg.platform.managers[i].spec;
    !(s.max_activations == Some(0))
}

/// Runs the isolated baseline of manager `i`; unbounded workloads run for
/// `window` cycles.
fn baseline(cfg: &ScenarioConfig, i: usize, window: u64) -> Result<ManagerStats, HarnessError> {
    let mut p = build_platform(cfg, false, Some(i))?;
    let limit = if workload(&cfg.platform.managers[i].spec) == Workload::Unbounded { window } else { cfg.max_cycles };
    simulate(&mut p, &[i], limit)?;
    Ok(p.manager(i).stats().clone())
}

pub fn run_scenario(cfg: &ScenarioConfig, trace: bool) -> Result<RunOutput, HarnessError> {
    run_point(cfg, "base", None, trace)
}

pub fn run_point(cfg: &ScenarioConfig, label: &str, value: Option<f64>, trace: bool) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let n = cfg.platform.managers.len();
    let all: Vec<usize> = (0..n).collect();
    let mut p = build_platform(cfg, trace, None)?;
    let cycles = simulate(&mut p, &all, cfg.max_cycles)?;
    let complete = all.iter().all(|&i| !bounded(&p, i) || p.manager(i).is_done());

    let mut managers = Vec::new();
    for i in 0..n {
        let def = &cfg.platform.managers[i];
        let st = p.manager(i).stats().clone();
        let iso = if cfg.baseline && enabled_in(cfg, i) { Some(baseline(cfg, i, cycles)?) } else { None };
        let beats = st.bytes_completed as f64 / f64::from(def.spec.beat_bytes.max(1));
        managers.push(ManagerMetrics {
            name: def.name.clone(),
            enabled: enabled_in(cfg, i),
            workload: workload(&def.spec),
            bytes: st.bytes_completed,
            txns: st.txns_completed,
            errors: st.errors,
            runtime_cycles: runtime(&def.spec, &st),
            mean_lat: st.mean_latency(),
            steady_lat: steady_latency(&st),
            max_lat: st.lat_max,
            bandwidth: if cycles > 0 { beats / cycles as f64 } else { 0.0 },
            isolated_runtime: iso.as_ref().and_then(|s| runtime(&def.spec, s)),
            isolated_bytes: iso.as_ref().map(|s| s.bytes_completed),
            isolated_mean_lat: iso.as_ref().map(ManagerStats::mean_latency),
            frac_isolated: iso.as_ref().and_then(|s| fraction_of_isolated(&def.spec, &st, s)),
            done: p.manager(i).is_done(),
        });
    }

    let mut regions = Vec::new();
    for i in 0..n {
        let Some(u) = p.irealm_of(i) else { continue };
        let unit = p.irealm(u);
        if unit.is_bypassed() {
            continue;
        }
        for (k, r) in unit.config().regions.iter().enumerate() {
            regions.push(RegionUtilization {
                manager: cfg.platform.managers[i].name.clone(),
                region: r.region_id,
                budget_beats: r.budget_beats,
                period_cycles: r.period_cycles,
                usage: unit.stats().period_usage.get(k).cloned().unwrap_or_default(),
            });
        }
    }

    let mut faults = Vec::new();
    let mut timelines = Vec::new();
    let notified_at = cfg.platform.irq_manager.and_then(|m| p.manager(m).stats().notified_at);
    for (j, def) in cfg.platform.subordinates.iter().enumerate() {
        let log = p.erealm_of(j).map(|e| p.erealm(e).fault_log().to_vec()).unwrap_or_default();
        faults.extend(log.iter().map(|r| LoggedFault { unit: format!("erealm@{}", def.name), record: *r }));
        if def.spec.fault_plan.is_some() {
            let ss = p.subordinate(j).stats();
            let first = log.first();
            timelines.push(FaultTimeline {
                subordinate: def.name.clone(),
                activated_at: ss.fault_activated_at,
                fault_at: ss.fault_manifest_at,
                detected_at: first.map(|r| r.detected_at),
                cause: first.map(|r| r.cause),
                stage: first.and_then(|r| r.stage),
                stage_start: first.and_then(|r| r.stage_start),
                reset_at: ss.last_reset_at,
                notified_at: first.and(notified_at),
            });
        }
    }

    let report = MetricsReport {
        scenario: cfg.name.clone(),
        sweep_label: label.to_string(),
        sweep_value: value,
        cycles,
        complete,
        critical: (!cfg.critical.is_empty()).then(|| cfg.critical.clone()),
        managers,
        regions,
        faults,
        timelines,
    };
    let trace = if trace { p.sim.take_trace() } else { Vec::new() };
    Ok(RunOutput { report, trace })
}

/// Runs every sweep point in parallel; reports come back in sweep order.
pub fn run_sweep(cfg: &ScenarioConfig) -> Result<Vec<MetricsReport>, HarnessError> {
    let points = cfg.expand()?;
    points
        .par_iter()
        .map(|pt| run_point(&pt.cfg, &pt.label, pt.value, false).map(|o| o.report))
        .collect()
}
