//! Built-in scenarios.

use super::area::AreaParams;
use super::scenario::{ErealmProgram, FaultCase, IrealmProgram, ManagerOverride, ScenarioConfig, Sweep};
use crate::erealm::{ErealmConfig, StageBudgets};
use crate::irealm::{IrealmConfig, RegionConfig};
use crate::platform::{
    ErealmHw, FaultBehavior, FaultInjection, FaultTrigger, IrealmHw, ManagerDef, ManagerKind, ManagerSpec, Mix,
    PlatformSpec, SubordinateDef, SubordinateSpec,
};
use crate::protocol::Direction;

pub const MEM_LIMIT: u64 = 0x10_0000;
/// Fixed subordinate latency giving an 11-cycle isolated single-beat read.
pub const MEM_LATENCY: u64 = 11;
/// Memory queue and per-transaction overhead of the fairness sweeps.
pub const FAIR_QUEUE: usize = 4;
pub const FAIR_OVERHEAD: u64 = 1;

pub const NAMES: [(&str, &str); 6] = [
    ("core_dma", "core reads against an unregulated 256-beat DMA"),
    ("frag_sweep", "core fraction of isolated performance over DMA fragment sizes"),
    ("budget_sweep", "core and DMA fractions over critical:DMA budget ratios at fragment size 1"),
    ("period_sweep", "periodic core and DMA schedules over regulation periods"),
    ("fault_wcdt", "eREALM detection, reset and notification timeline for injected faults"),
    ("area_hermes", "area model of the reference mixed-criticality configuration"),
];

fn mem(queue: usize, overhead: u64) -> SubordinateDef {
    let mut spec = SubordinateSpec::new(MEM_LATENCY);
    spec.queue_capacity = queue;
    spec.txn_overhead = overhead;
    SubordinateDef { name: "mem".into(), base: 0, limit: MEM_LIMIT, spec, erealm: None }
}

fn core_reads(bytes: u64) -> ManagerSpec {
    ManagerSpec {
        kind: ManagerKind::CoreCopy,
        mix: Mix::Read,
        bytes_per_activation: bytes,
        max_activations: Some(1),
        read_base: 0,
        write_base: 0x8000,
        ..Default::default()
    }
}

fn dma(len: u16) -> ManagerSpec {
    ManagerSpec { max_outstanding: 1, ..ManagerSpec::dma_burst(len, Mix::Read, 0x4_0000, 0x6_0000) }
}

fn regulated(name: &str, spec: ManagerSpec) -> ManagerDef {
    ManagerDef { name: name.into(), spec, irealm: Some(IrealmHw::default()) }
}

fn whole_memory(frag: u16, budget: u64, period: u64) -> RegionConfig {
    RegionConfig { region_id: 0, base: 0, limit: MEM_LIMIT, fragment_beats: frag, budget_beats: budget, period_cycles: period }
}

/// Budget/period regulation without throttling.
fn active(frag: u16, regions: Vec<RegionConfig>) -> IrealmConfig {
    IrealmConfig { regions, default_fragment_beats: frag, bypass: false, throttle: false, ..IrealmConfig::default() }
}

fn two_manager(name: &str, description: &str, mem: SubordinateDef, core: ManagerSpec, dma: ManagerSpec, max_cycles: u64) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        description: description.into(),
        platform: PlatformSpec {
            managers: vec![regulated("core", core), regulated("dma", dma)],
            subordinates: vec![mem],
            max_outstanding_per_port: 8,
            irq_manager: None,
        },
        config_owner: 0,
        irealm: Vec::new(),
        erealm: Vec::new(),
        registers: Vec::new(),
        critical: "core".into(),
        max_cycles,
        seed: 0,
        start_jitter: 0,
        baseline: true,
        sweep: None,
    }
}

pub fn core_dma() -> ScenarioConfig {
    two_manager("core_dma", NAMES[0].1, mem(2, 0), core_reads(2048), dma(256), 200_000)
}

pub fn frag_sweep() -> ScenarioConfig {
    let mut c = two_manager("frag_sweep", NAMES[1].1, mem(FAIR_QUEUE, FAIR_OVERHEAD), core_reads(2048), dma(256), 200_000);
    c.sweep = Some(Sweep::Fragmentation { manager: "dma".into(), values: vec![1, 4, 16, 64, 256], unregulated: true });
    c
}

pub fn budget_sweep() -> ScenarioConfig {
    let mut c = two_manager("budget_sweep", NAMES[2].1, mem(FAIR_QUEUE, FAIR_OVERHEAD), core_reads(2048), dma(256), 200_000);
    c.irealm = vec![
        IrealmProgram { manager: "core".into(), config: active(256, vec![whole_memory(1, 1000, 1000)]) },
        IrealmProgram { manager: "dma".into(), config: active(1, vec![whole_memory(1, 1000, 1000)]) },
    ];
    c.sweep = Some(Sweep::BudgetRatio {
        critical: "core".into(),
        other: "dma".into(),
        total_beats: 2000,
        period: 1000,
        ratios: vec![1.0 / 64.0, 1.0 / 16.0, 0.25, 1.0, 4.0, 16.0, 64.0],
    });
    c
}

/// Core: 800 B every 200 cycles. DMA: 6400 B every 1600 cycles.
pub fn period_sweep() -> ScenarioConfig {
    let core = ManagerSpec {
        kind: ManagerKind::PeriodicSchedule,
        mix: Mix::Read,
        txn_len_beats: 4,
        bytes_per_activation: 800,
        activation_period: 200,
        max_activations: Some(32),
        max_outstanding: 8,
        ..Default::default()
    };
    let dma = ManagerSpec {
        kind: ManagerKind::PeriodicSchedule,
        bytes_per_activation: 6400,
        activation_period: 1600,
        max_activations: Some(4),
        max_outstanding: 4,
        ..dma(200)
    };
    let mut c = two_manager("period_sweep", NAMES[3].1, mem(8, 0), core, dma, 40_000);
    c.platform.max_outstanding_per_port = 16;
    c.irealm = vec![
        IrealmProgram { manager: "core".into(), config: active(1, vec![whole_memory(1, 800, 1600)]) },
        IrealmProgram { manager: "dma".into(), config: active(1, vec![whole_memory(1, 800, 1600)]) },
    ];
    c.sweep = Some(Sweep::Period {
        managers: vec!["core".into(), "dma".into()],
        values: vec![50, 100, 200, 400, 800, 1600],
        budget_fraction: 0.5,
    });
    c
}

/// Stage budgets of 20 cycles, except the data stages: 300 cycles over a
/// 4-beat burst.
pub const WCDT_BURST: u16 = 4;

pub fn wcdt_budgets() -> StageBudgets {
    StageBudgets::uniform(20, 300 / u64::from(WCDT_BURST))
}

fn dev_workload(mix: Mix) -> ManagerSpec {
    ManagerSpec { mix, txn_len_beats: WCDT_BURST, retry_errors: true, reaction_latency: 100, ..Default::default() }
}

pub fn fault_wcdt() -> ScenarioConfig {
    let mut sub = SubordinateDef {
        name: "dev".into(),
        base: 0,
        limit: MEM_LIMIT,
        spec: SubordinateSpec::new(MEM_LATENCY),
        erealm: Some(ErealmHw::default()),
    };
    sub.spec.queue_capacity = 8;
    let case = |label: &str, beats: u16, direction: Direction, behavior: FaultBehavior, mix: Mix| FaultCase {
        label: label.into(),
        subordinate: "dev".into(),
        injection: FaultInjection {
            trigger: FaultTrigger::AfterBeats { beats, direction: Some(direction), tid: None },
            behavior,
        },
        managers: vec![ManagerOverride { name: "core".into(), spec: dev_workload(mix) }],
    };
    ScenarioConfig {
        name: "fault_wcdt".into(),
        description: NAMES[4].1.into(),
        platform: PlatformSpec {
            managers: vec![ManagerDef { name: "core".into(), spec: dev_workload(Mix::Read), irealm: None }],
            subordinates: vec![sub],
            max_outstanding_per_port: 8,
            irq_manager: Some(0),
        },
        config_owner: 0,
        irealm: Vec::new(),
        erealm: vec![ErealmProgram {
            subordinate: "dev".into(),
            config: ErealmConfig { enabled: true, budgets: wcdt_budgets(), ..ErealmConfig::default() },
        }],
        registers: Vec::new(),
        critical: "core".into(),
        max_cycles: 3000,
        seed: 0,
        start_jitter: 0,
        baseline: false,
        sweep: Some(Sweep::Fault {
            cases: vec![
                case("read_stall", 1, Direction::Read, FaultBehavior::StallForever, Mix::Read),
                case("write_stall", 1, Direction::Write, FaultBehavior::StallForever, Mix::Write),
                case("wrong_tid", 1, Direction::Read, FaultBehavior::WrongTidResponse, Mix::Read),
                case("superfluous_b", 2 * WCDT_BURST + 1, Direction::Write, FaultBehavior::ExtraHandshake, Mix::Write),
            ],
        }),
    }
}

pub fn area_hermes() -> AreaParams {
    AreaParams::hermes()
}

/// Scenario preset by name. `area_hermes` is not a simulation scenario.
pub fn scenario(name: &str) -> Option<ScenarioConfig> {
    Some(match name {
        "core_dma" => core_dma(),
        "frag_sweep" => frag_sweep(),
        "budget_sweep" => budget_sweep(),
        "period_sweep" => period_sweep(),
        "fault_wcdt" => fault_wcdt(),
        _ => return None,
    })
}
