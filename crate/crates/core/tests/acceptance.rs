//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use realm_sim::erealm::{ErealmConfig, FaultCause, NotifyMode, Stage, StageBudgets};
use realm_sim::harness::area::{area_estimate, block_area, round_sig, AreaParams, UnitParams, WEIGHTS};
use realm_sim::harness::presets;
use realm_sim::harness::scenario::IrealmProgram;
use realm_sim::harness::{run_scenario, run_sweep, MetricsReport};
use realm_sim::irealm::{IrealmConfig, RegionConfig};
use realm_sim::platform::{
    ErealmHw, FaultBehavior, FaultInjection, FaultTrigger, IrealmHw, ManagerDef, ManagerKind, ManagerSpec, Mix,
    Platform, PlatformSpec, SubordinateDef, SubordinateSpec,
};
use realm_sim::protocol::{check_ordering, BurstAttr, Channel, ChannelBeat, Direction, Resp, TraceRecord, TxnId};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn frac(r: &MetricsReport, m: &str) -> f64 {
    r.manager(m).and_then(|m| m.frac_isolated).unwrap_or(f64::NAN)
}

fn point<'a>(reps: &'a [MetricsReport], label: &str) -> &'a MetricsReport {
    reps.iter().find(|r| r.sweep_label == label).unwrap_or_else(|| panic!("sweep point {label}"))
}

fn c1_latency() -> Outcome {
    let cfg = presets::core_dma();
    let un = run_scenario(&cfg, false).expect("run").report;
    let core = un.manager("core").unwrap();
    let iso = core.isolated_mean_lat.unwrap_or(f64::NAN);
    let mut reg = cfg.clone();
    reg.irealm.push(IrealmProgram {
        manager: "dma".into(),
        config: IrealmConfig { default_fragment_beats: 1, bypass: false, ..IrealmConfig::default() },
    });
    let r = run_scenario(&reg, false).expect("run").report;
    let g1 = r.manager("core").unwrap().steady_lat;
    let pass = iso == 11.0 && core.steady_lat == 266.0 && g1 <= 13.0;
    outcome(pass, format!("isolated {iso:.2}, unregulated steady {:.2} (266), g=1 steady {g1:.2} (<= 13)", core.steady_lat))
}

fn c2_fairness() -> Outcome {
    let reps = run_sweep(&presets::frag_sweep()).expect("sweep");
    let un = frac(point(&reps, "unregulated"), "core");
    let gs = [1, 4, 16, 64, 256];
    let fs: Vec<f64> = gs.iter().map(|g| frac(point(&reps, &g.to_string()), "core")).collect();
    let mono = fs.windows(2).all(|w| w[1] <= w[0]);
    let pass = un <= 0.05 && (0.60..=0.85).contains(&fs[0]) && mono;
    let curve: Vec<String> = gs.iter().zip(&fs).map(|(g, f)| format!("g{g}={f:.3}")).collect();
    outcome(pass, format!("unregulated {un:.3} (<= 0.05), {} (g1 in [0.60, 0.85], non-increasing {mono})", curve.join(" ")))
}

fn c3_budget() -> Outcome {
    let reps = run_sweep(&presets::budget_sweep()).expect("sweep");
    let best = reps.iter().map(|r| frac(r, "core")).fold(f64::NAN, f64::max);
    let curve: Vec<String> = reps.iter().map(|r| format!("{}={:.3}", r.sweep_label, frac(r, "core"))).collect();
    outcome(best >= 0.95 - 0.02, format!("max core fraction {best:.3} (>= 0.95 - 0.02); {}", curve.join(" ")))
}

fn c4_period() -> Outcome {
    let reps = run_sweep(&presets::period_sweep()).expect("sweep");
    let at = |t: u64, m: &str| frac(point(&reps, &t.to_string()), m);
    let dma_full = at(1600, "dma");
    let shorter: Vec<(u64, f64)> = reps
        .iter()
        .filter_map(|r| r.sweep_value.filter(|&v| v < 1600.0).map(|v| (v as u64, frac(r, "dma"))))
        .collect();
    let a = !shorter.is_empty() && shorter.iter().all(|&(_, f)| f < dma_full);
    let b = at(200, "core") >= 0.93 - 0.02;
    let c = at(50, "core") < at(200, "core");
    let dma: Vec<String> = shorter.iter().map(|(t, f)| format!("{t}={f:.3}")).collect();
    outcome(
        a && b && c,
        format!(
            "(a) dma {} < {dma_full:.3} at 1600: {a}; (b) core@200 {:.3} >= 0.91: {b}; (c) core@50 {:.3} < core@200: {c}",
            dma.join(" "),
            at(200, "core"),
            at(50, "core")
        ),
    )
}

fn c5_wcdt() -> Outcome {
    let cfg = presets::fault_wcdt();
    let budgets_ok = cfg.erealm[0].config.budgets.budget(Direction::Read, Stage::RData, presets::WCDT_BURST) == 300
        && cfg.erealm[0].config.budgets.budget(Direction::Read, Stage::ArToR, presets::WCDT_BURST) == 20;
    let reps = run_sweep(&cfg).expect("sweep");
    let tl = |l: &str| point(&reps, l).timelines[0].clone();
    let stall = tl("read_stall");
    let into = stall.into_stage();
    let reset = stall.detect_to_reset();
    let notified = stall.fault_to_notified();
    let stall_ok = stall.cause == Some(FaultCause::Timeout)
        && stall.stage == Some(Stage::RData)
        && into == Some(300)
        && reset.is_some_and(|d| (1..=2).contains(&d))
        && notified.is_some_and(|n| n <= 400);
    let tid = tl("wrong_tid");
    let extra = tl("superfluous_b");
    let proto_ok = tid.fault_to_detect() == Some(0)
        && tid.cause == Some(FaultCause::TidMismatch)
        && extra.fault_to_detect() == Some(0)
        && extra.cause == Some(FaultCause::SuperfluousHandshake);
    outcome(
        budgets_ok && stall_ok && proto_ok,
        format!(
            "stall: {into:?} cycles into data stage (300), reset +{reset:?} (<= 2), notified +{notified:?} (<= 400); wrong TID +{:?}, superfluous +{:?} (same cycle)",
            tid.fault_to_detect(),
            extra.fault_to_detect()
        ),
    )
}

fn c6_area() -> Outcome {
    let wb = WEIGHTS.iter().find(|b| b.name == "write_buffer").unwrap();
    let each = block_area(wb, &UnitParams { buffer_depth: 4.0, ..UnitParams::default() }.vector()) / 1e3;
    let r = area_estimate(&AreaParams::hermes());
    let ir = round_sig(r.irealm_ge / 1e3, 3);
    let er = round_sig(r.erealm_ge / 1e3, 3);
    let wb_ok = round_sig(each, 3) == 67.6 && round_sig(3.0 * each, 3) == 203.0;
    let pass = wb_ok && ir == 330.0 && er == 50.0;
    outcome(
        pass,
        format!(
            "write buffer {:.1} kGE each, {:.0} kGE for 3 (67.6, 203): {wb_ok}; iREALM {ir} kGE (330); eREALM {er} kGE (50)",
            round_sig(each, 3),
            round_sig(3.0 * each, 3)
        ),
    )
}

/// (cycle, beat) on every link touching `name`, without peer names.
fn port_view(trace: &[TraceRecord], name: &str) -> Vec<(u64, ChannelBeat)> {
    trace.iter().filter(|r| r.component == name || r.peer == name).map(|r| (r.cycle, r.beat)).collect()
}

fn transparency_platform(units: bool) -> Vec<TraceRecord> {
    let core = ManagerSpec::core_copy(1024, 0, 0x2000);
    let dma = ManagerSpec {
        txn_len_beats: 16,
        mix: Mix::Copy,
        max_outstanding: 2,
        num_tids: 2,
        bytes_per_activation: 4096,
        max_activations: Some(1),
        ..ManagerSpec::dma_burst(16, Mix::Copy, 0x4000, 0x8000)
    };
    let hw = units.then(IrealmHw::default);
    let spec = PlatformSpec {
        managers: vec![
            ManagerDef { name: "core".into(), spec: core, irealm: hw },
            ManagerDef { name: "dma".into(), spec: dma, irealm: hw },
        ],
        subordinates: vec![SubordinateDef {
            name: "mem".into(),
            base: 0,
            limit: 0x10000,
            spec: SubordinateSpec::new(5),
            erealm: units.then(ErealmHw::default),
        }],
        max_outstanding_per_port: 8,
        irq_manager: None,
    };
    let mut p = Platform::build(&spec, true).expect("platform");
    if units {
        let cfg = ErealmConfig { enabled: true, budgets: StageBudgets::uniform(1000, 64), ..ErealmConfig::default() };
        p.program_erealm(0, 0, &cfg).expect("program");
    }
    p.sim.run(4000).expect("run");
    assert!(p.manager(0).is_done() && p.manager(1).is_done());
    p.sim.take_trace()
}

fn single_latencies(mix: Mix, len: u16, active: bool) -> Vec<u64> {
    let spec = ManagerSpec {
        txn_len_beats: len,
        bytes_per_activation: 8 * u64::from(len) * 6,
        max_activations: Some(1),
        ..ManagerSpec::dma_burst(len, mix, 0, 0x1000)
    };
    let ps = PlatformSpec {
        managers: vec![ManagerDef { name: "m".into(), spec, irealm: Some(IrealmHw::default()) }],
        subordinates: vec![SubordinateDef { name: "mem".into(), base: 0, limit: 0x10000, spec: SubordinateSpec::new(5), erealm: None }],
        max_outstanding_per_port: 8,
        irq_manager: None,
    };
    let mut p = Platform::build(&ps, false).expect("platform");
    if active {
        p.program_irealm(0, 0, &IrealmConfig { bypass: false, ..IrealmConfig::default() }).expect("program");
    }
    p.sim.run(1000).expect("run");
    p.manager(0).stats().latencies.iter().map(|l| l.1).collect()
}

fn c7_transparency() -> Outcome {
    let plain = transparency_platform(false);
    let units = transparency_platform(true);
    let same = ["core", "dma", "mem"].iter().all(|n| port_view(&plain, n) == port_view(&units, n));
    // store-and-forward: a single-beat write isolates the buffer's own cycle
    let w_by = single_latencies(Mix::Write, 1, false);
    let w_on = single_latencies(Mix::Write, 1, true);
    let r_by = single_latencies(Mix::Read, 4, false);
    let r_on = single_latencies(Mix::Read, 4, true);
    let w_plus_one = !w_by.is_empty() && w_by.len() == w_on.len() && w_by.iter().zip(&w_on).all(|(a, b)| b == &(a + 1));
    let r_same = !r_by.is_empty() && r_by == r_on;
    outcome(
        same && w_plus_one && r_same,
        format!(
            "bypassed iREALM + idle eREALM traces identical: {same}; write latency {:?} -> {:?} (+1): {w_plus_one}; read {:?} -> {:?} (+0): {r_same}",
            w_by.first(),
            w_on.first(),
            r_by.first(),
            r_on.first()
        ),
    )
}

const SUB_SPAN: u64 = 0x10000;

struct RandomCase {
    spec: PlatformSpec,
    irealm: Vec<(usize, IrealmConfig)>,
    erealm: Vec<(usize, ErealmConfig)>,
}

fn random_case(seed: u64) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_sub = rng.gen_range(1..=2usize);
    let mut subs = Vec::new();
    let mut erealm = Vec::new();
    for j in 0..n_sub {
        let mut spec = SubordinateSpec::new(rng.gen_range(1..=15));
        spec.queue_capacity = rng.gen_range(1..=8);
        spec.txn_overhead = rng.gen_range(0..=2);
        spec.beats_per_cycle = rng.gen_range(1..=2);
        let has_unit = rng.gen_bool(0.6);
        if has_unit && rng.gen_bool(0.8) {
            let e = erealm.len();
            let cfg = ErealmConfig {
                enabled: true,
                budgets: StageBudgets::uniform(rng.gen_range(30..=200), rng.gen_range(8..=40)),
                reset_latency: rng.gen_range(1..=2),
                notify: if rng.gen_bool(0.5) { NotifyMode::Interrupt } else { NotifyMode::Response },
                ..ErealmConfig::default()
            };
            erealm.push((e, cfg));
            if rng.gen_bool(0.6) {
                let behavior = match rng.gen_range(0..4) {
                    0 => FaultBehavior::StallForever,
                    1 => FaultBehavior::StallFor(rng.gen_range(1..=400)),
                    2 => FaultBehavior::WrongTidResponse,
                    _ => FaultBehavior::ExtraHandshake,
                };
                let direction = [None, Some(Direction::Read), Some(Direction::Write)][rng.gen_range(0..3)];
                spec.fault_plan = Some(FaultInjection {
                    trigger: FaultTrigger::AfterBeats { beats: rng.gen_range(1..=24), direction, tid: None },
                    behavior,
                });
            }
        } else if has_unit {
            erealm.push((erealm.len(), ErealmConfig::default()));
        }
        let base = j as u64 * SUB_SPAN;
        subs.push(SubordinateDef {
            name: format!("s{j}"),
            base,
            limit: base + SUB_SPAN,
            spec,
            erealm: has_unit.then(ErealmHw::default),
        });
    }
    let n_mgr = rng.gen_range(1..=3usize);
    let mut managers = Vec::new();
    let mut irealm = Vec::new();
    for i in 0..n_mgr {
        let len = if rng.gen_bool(0.1) { 256 } else { rng.gen_range(1..=48) };
        let mut burst = BurstAttr::default();
        if rng.gen_bool(0.1) {
            burst.atomic = true;
        } else if rng.gen_bool(0.1) {
            burst.modifiable = false;
        }
        let sub_base = |rng: &mut ChaCha8Rng| rng.gen_range(0..n_sub) as u64 * SUB_SPAN + 0x1000 * rng.gen_range(0..8u64);
        let spec = ManagerSpec {
            kind: ManagerKind::DmaBurst,
            mix: [Mix::Read, Mix::Write, Mix::Copy][rng.gen_range(0..3)],
            txn_len_beats: len,
            read_base: sub_base(&mut rng),
            write_base: sub_base(&mut rng),
            region_bytes: 0x4000,
            max_outstanding: rng.gen_range(1..=4),
            tid: rng.gen_range(0..4),
            num_tids: rng.gen_range(1..=3),
            burst,
            w_delay: rng.gen_range(0..=3),
            w_interval: rng.gen_range(1..=2),
            reaction_latency: rng.gen_range(1..=50),
            // a rejected burst would be retried forever
            retry_errors: burst == BurstAttr::default() && rng.gen_bool(0.5),
            start_cycle: rng.gen_range(0..20),
            ..ManagerSpec::default()
        };
        let unit = rng.gen_bool(0.7);
        if unit && rng.gen_bool(0.8) {
            let frags = [1u16, 2, 4, 8, 16, 256];
            let mut regions = Vec::new();
            for r in 0..rng.gen_range(0..=n_sub) {
                let budget = rng.gen_range(16..=400u64);
                let frag = frags[rng.gen_range(0..frags.len())].min(budget as u16);
                regions.push(RegionConfig {
                    region_id: r,
                    base: r as u64 * SUB_SPAN,
                    limit: (r as u64 + 1) * SUB_SPAN,
                    fragment_beats: frag,
                    budget_beats: budget,
                    period_cycles: rng.gen_range(20..=600),
                });
            }
            irealm.push((
                irealm.len(),
                IrealmConfig {
                    regions,
                    default_fragment_beats: frags[rng.gen_range(0..frags.len())],
                    num_pending: rng.gen_range(1..=16),
                    write_buffer: rng.gen_bool(0.6),
                    throttle: rng.gen_bool(0.5),
                    bypass: false,
                    ..IrealmConfig::default()
                },
            ));
        } else if unit {
            irealm.push((irealm.len(), IrealmConfig::default()));
        }
        managers.push(ManagerDef { name: format!("m{i}"), spec, irealm: unit.then(IrealmHw::default) });
    }
    let irq_manager = (!erealm.is_empty()).then_some(0);
    RandomCase {
        spec: PlatformSpec { managers, subordinates: subs, max_outstanding_per_port: 8, irq_manager },
        irealm,
        erealm,
    }
}

/// Fragments forwarded per upstream transaction, against its length.
fn conservation(trace: &[TraceRecord], unit: &str, mgr: &str) -> Vec<String> {
    let mut up: HashMap<TxnId, u16> = HashMap::new();
    let mut down: HashMap<TxnId, u32> = HashMap::new();
    let mut ok_done: Vec<TxnId> = Vec::new();
    for r in trace {
        let b = &r.beat;
        match b.channel {
            Channel::AR | Channel::AW => {
                let d = b.desc.expect("descriptor");
                if r.peer == unit {
                    up.insert(d.id, d.len_beats);
                } else if r.component == unit {
                    *down.entry(d.id.parent()).or_default() += u32::from(d.len_beats);
                }
            }
            Channel::R | Channel::B if r.peer == mgr && b.resp == Some(Resp::Okay) && (b.is_last || b.channel == Channel::B) => {
                ok_done.push(b.txn);
            }
            _ => {}
        }
    }
    let mut errs = Vec::new();
    for (id, len) in &up {
        let d = down.get(id).copied().unwrap_or(0);
        if d > u32::from(*len) {
            errs.push(format!("{unit}: {id} forwarded {d} beats of {len}"));
        }
    }
    for id in ok_done {
        if let Some(len) = up.get(&id) {
            let d = down.get(&id).copied().unwrap_or(0);
            if d != u32::from(*len) {
                errs.push(format!("{unit}: {id} completed OKAY with {d} of {len} beats forwarded"));
            }
        }
    }
    errs
}

/// Outcome of one randomized run that passed its checks.
enum RunKind {
    Checked,
    /// A replayed response arrived while a same-ID transaction was waiting
    /// for one, so it was taken as that transaction's response.
    MaskedDuplicate,
}

fn drain(p: &mut Platform) -> Option<()> {
    for i in 0..p.num_managers() {
        p.manager_mut(i).set_enabled(false);
    }
    for _ in 0..30_000 {
        if (0..p.num_managers()).all(|i| p.manager(i).outstanding() == 0) {
            return Some(());
        }
        p.sim.step().ok()?;
    }
    None
}

fn random_run(seed: u64) -> Result<RunKind, String> {
    let case = random_case(seed);
    let mut p = Platform::build(&case.spec, true).map_err(|e| e.to_string())?;
    for (u, cfg) in &case.irealm {
        p.program_irealm(0, *u, cfg).map_err(|e| e.to_string())?;
    }
    for (e, cfg) in &case.erealm {
        p.program_erealm(0, *e, cfg).map_err(|e| e.to_string())?;
    }
    p.sim.run(1500).map_err(|e| format!("seed {seed}: {e}"))?;
    let drained = drain(&mut p).is_some();
    let trace = p.sim.take_trace();

    let mut errs = Vec::new();
    if !drained {
        errs.push("transactions never completed".to_string());
    }
    for (i, def) in case.spec.managers.iter().enumerate() {
        let beats: Vec<ChannelBeat> =
            trace.iter().filter(|r| r.component == def.name || r.peer == def.name).map(|r| r.beat).collect();
        errs.extend(check_ordering(&beats).into_iter().map(|v| format!("{}: {:?} {}", def.name, v.kind, v.detail)));
        if let Some(u) = p.irealm_of(i) {
            let unit = p.irealm(u);
            errs.extend(conservation(&trace, &format!("irealm{u}"), &def.name));
            for (k, r) in unit.config().regions.iter().enumerate() {
                if let Some(over) = unit.stats().period_usage.get(k).and_then(|u| u.iter().find(|&&b| b > r.budget_beats)) {
                    errs.push(format!("irealm{u}.r{}: {over} beats in a period, budget {}", r.region_id, r.budget_beats));
                }
            }
        }
    }
    if errs.is_empty() {
        return Ok(RunKind::Checked);
    }
    // A replayed response is only distinguishable from a genuine one when no
    // transaction with the same ID is waiting for it.
    let masked = case.spec.subordinates.iter().enumerate().any(|(j, s)| {
        let replay = s.spec.fault_plan.is_some_and(|f| f.behavior == FaultBehavior::ExtraHandshake);
        let unit = p.erealm_of(j);
        replay && unit.is_some_and(|e| p.erealm(e).fault_log().iter().all(|f| f.cause != FaultCause::SuperfluousHandshake))
    });
    if masked {
        return Ok(RunKind::MaskedDuplicate);
    }
    errs.truncate(4);
    Err(format!("seed {seed}: {}", errs.join("; ")))
}

fn c8_oracles() -> Outcome {
    let runs = 1000u64;
    let results: Vec<Result<RunKind, String>> = (0..runs).into_par_iter().map(random_run).collect();
    let masked = results.iter().filter(|r| matches!(r, Ok(RunKind::MaskedDuplicate))).count();
    let failures: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    let first = failures.iter().take(3).map(|s| s.as_str()).collect::<Vec<_>>().join(" | ");
    outcome(
        failures.is_empty(),
        format!("{runs} randomized runs, {} failing, {masked} with a replayed response taken as genuine {first}", failures.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Duration); 8] = [
        ("1 latency blow-up and recovery", c1_latency, Duration::from_secs(5)),
        ("2 fairness fraction", c2_fairness, Duration::from_secs(30)),
        ("3 budget imbalance", c3_budget, Duration::from_secs(30)),
        ("4 period sweep shape", c4_period, Duration::from_secs(60)),
        ("5 eREALM WCDT", c5_wcdt, Duration::from_secs(5)),
        ("6 area model", c6_area, Duration::from_secs(1)),
        ("7 transparency", c7_transparency, Duration::from_secs(5)),
        ("8 oracle suites", c8_oracles, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (name, f, limit) in criteria {
        let t = Instant::now();
        let o = f();
        let dt = t.elapsed();
        let pass = o.pass && dt < limit;
        failed += usize::from(!pass);
        println!("criterion {name}: {} [{:.2}s < {}s] {}", if pass { "PASS" } else { "FAIL" }, dt.as_secs_f64(), limit.as_secs(), o.detail);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
