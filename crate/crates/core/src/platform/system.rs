//! Platform builder: managers, optional iREALM units, crossbar, optional
//! eREALM units and subordinates, plus the shared register file.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::manager::{Manager, ManagerSpec};
use super::registers::{budgets_from_array, budgets_to_array, ErField, Field, IrField, RegError, RegLayout, RegionField, RegisterFile};
use super::subordinate::{Subordinate, SubordinateSpec};
use crate::erealm::{ErealmConfig, ErealmError, ErealmUnit, FaultCause, NotifyMode, Stage};
use crate::interconnect::{AddrRule, Crossbar, XbarConfig, XbarError};
use crate::irealm::{IrealmConfig, IrealmError, IrealmUnit, RegionConfig};
use crate::simkernel::{CompId, Line, Sim, SimError};

/// Synthesis-time parameters of an iREALM unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IrealmHw {
    pub regions: usize,
    pub buffer_depth_beats: u16,
}

impl Default for IrealmHw {
    fn default() -> Self {
        IrealmHw { regions: 2, buffer_depth_beats: 256 }
    }
}

/// Synthesis-time parameters of an eREALM unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErealmHw {
    pub num_tids: usize,
    pub per_tid: usize,
}

impl Default for ErealmHw {
    fn default() -> Self {
        ErealmHw { num_tids: 4, per_tid: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManagerDef {
    pub name: String,
    pub spec: ManagerSpec,
    #[serde(default)]
    pub irealm: Option<IrealmHw>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubordinateDef {
    pub name: String,
    pub base: u64,
    pub limit: u64,
    pub spec: SubordinateSpec,
    #[serde(default)]
    pub erealm: Option<ErealmHw>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformSpec {
    pub managers: Vec<ManagerDef>,
    pub subordinates: Vec<SubordinateDef>,
    #[serde(default = "default_outstanding")]
    pub max_outstanding_per_port: usize,
    /// Manager that services eREALM interrupts.
    #[serde(default)]
    pub irq_manager: Option<usize>,
}

fn default_outstanding() -> usize {
    8
}

#[derive(Debug, Error)]
pub enum PlatformError {
    #[error(transparent)]
    Xbar(#[from] XbarError),
    #[error(transparent)]
    Irealm(#[from] IrealmError),
    #[error(transparent)]
    Erealm(#[from] ErealmError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Reg(#[from] RegError),
    #[error("irq manager {0} does not exist")]
    IrqManager(usize),
}

pub struct Platform {
    pub sim: Sim,
    managers: Vec<CompId>,
    ir_units: Vec<CompId>,
    ir_of_manager: Vec<Option<usize>>,
    ir_hw: Vec<IrealmHw>,
    xbar: CompId,
    er_units: Vec<CompId>,
    er_of_sub: Vec<Option<usize>>,
    subs: Vec<CompId>,
    regs: RegisterFile,
    irq: Line,
}

impl Platform {
    /// Builds the system with every unit in its reset state.
    pub fn build(spec: &PlatformSpec, trace: bool) -> Result<Platform, PlatformError> {
        if let Some(m) = spec.irq_manager.filter(|&m| m >= spec.managers.len()) {
            return Err(PlatformError::IrqManager(m));
        }
        let mut sim = Sim::new();
        sim.set_trace(trace);
        let xcfg = XbarConfig {
            num_managers: spec.managers.len(),
            num_subordinates: spec.subordinates.len(),
            addr_map: spec
                .subordinates
                .iter()
                .enumerate()
                .map(|(j, s)| AddrRule { base: s.base, limit: s.limit, sub: j })
                .collect(),
            max_outstanding_per_port: spec.max_outstanding_per_port,
        };
        let xbar = Crossbar::new(&mut sim, "xbar", xcfg)?;
        let irq = Line::new();
        let mut comps_m = Vec::new();
        let mut ir_of_manager = Vec::new();
        let mut ir_hw = Vec::new();
        let mut pending = Vec::new();
        for (i, def) in spec.managers.iter().enumerate() {
            let mut m = Manager::new(&mut sim, &def.name, i, def.spec.clone());
            if spec.irq_manager == Some(i) {
                m.set_irq_line(irq.clone());
            }
            match def.irealm {
                Some(hw) => {
                    let cfg = IrealmConfig { buffer_depth_beats: hw.buffer_depth_beats, ..IrealmConfig::default() };
                    let u = IrealmUnit::new(&mut sim, &format!("irealm{}", pending.len()), cfg)?;
                    sim.connect_axi(m.ports(), u.up_ports())?;
                    sim.connect_axi(u.down_ports(), &xbar.mgr_ports()[i])?;
                    ir_of_manager.push(Some(ir_hw.len()));
                    ir_hw.push(hw);
                    pending.push(u);
                }
                None => {
                    sim.connect_axi(m.ports(), &xbar.mgr_ports()[i])?;
                    ir_of_manager.push(None);
                }
            }
            comps_m.push(m);
        }
        let mut subs = Vec::new();
        let mut er = Vec::new();
        let mut er_of_sub = Vec::new();
        for (j, def) in spec.subordinates.iter().enumerate() {
            let mut s = Subordinate::new(&mut sim, &def.name, def.spec.clone());
            match def.erealm {
                Some(hw) => {
                    let cfg = ErealmConfig { num_tids: hw.num_tids, per_tid: hw.per_tid, ..ErealmConfig::default() };
                    let mut e = ErealmUnit::new(&mut sim, &format!("erealm{}", er.len()), cfg)?;
                    let rst = Line::new();
                    s.set_reset_line(rst.clone());
                    e.set_reset_line(rst);
                    e.set_irq_line(irq.clone());
                    sim.connect_axi(&xbar.sub_ports()[j], e.up_ports())?;
                    sim.connect_axi(e.down_ports(), s.ports())?;
                    er_of_sub.push(Some(er.len()));
                    er.push(e);
                }
                None => {
                    sim.connect_axi(&xbar.sub_ports()[j], s.ports())?;
                    er_of_sub.push(None);
                }
            }
            subs.push(s);
        }
        let managers = comps_m.into_iter().map(|m| sim.add(m)).collect();
        let ir_units = pending.into_iter().map(|u| sim.add(u)).collect();
        let xbar = sim.add(xbar);
        let er_units: Vec<CompId> = er.into_iter().map(|e| sim.add(e)).collect();
        let subs = subs.into_iter().map(|s| sim.add(s)).collect();
        let layout = RegLayout { irealm_regions: ir_hw.iter().map(|h| h.regions).collect(), erealm_units: er_units.len() };
        Ok(Platform {
            sim,
            managers,
            ir_units,
            ir_of_manager,
            ir_hw,
            xbar,
            er_units,
            er_of_sub,
            subs,
            regs: RegisterFile::new(&layout),
            irq,
        })
    }

    pub fn manager(&self, i: usize) -> &Manager {
        self.sim.get(self.managers[i]).expect("manager component")
    }

    pub fn manager_mut(&mut self, i: usize) -> &mut Manager {
        self.sim.get_mut(self.managers[i]).expect("manager component")
    }

    pub fn num_managers(&self) -> usize {
        self.managers.len()
    }

    pub fn irealm_of(&self, manager: usize) -> Option<usize> {
        self.ir_of_manager[manager]
    }

    pub fn irealm(&self, u: usize) -> &IrealmUnit {
        self.sim.get(self.ir_units[u]).expect("irealm component")
    }

    pub fn num_irealms(&self) -> usize {
        self.ir_units.len()
    }

    pub fn erealm_of(&self, sub: usize) -> Option<usize> {
        self.er_of_sub[sub]
    }

    pub fn erealm(&self, e: usize) -> &ErealmUnit {
        self.sim.get(self.er_units[e]).expect("erealm component")
    }

    pub fn num_erealms(&self) -> usize {
        self.er_units.len()
    }

    pub fn crossbar(&self) -> &Crossbar {
        self.sim.get(self.xbar).expect("crossbar component")
    }

    pub fn subordinate(&self, j: usize) -> &Subordinate {
        self.sim.get(self.subs[j]).expect("subordinate component")
    }

    pub fn irq_line(&self) -> &Line {
        &self.irq
    }

    pub fn registers(&self) -> &RegisterFile {
        &self.regs
    }

    fn ir_mut(&mut self, u: usize) -> &mut IrealmUnit {
        self.sim.get_mut(self.ir_units[u]).expect("irealm component")
    }

    fn er_mut(&mut self, e: usize) -> &mut ErealmUnit {
        self.sim.get_mut(self.er_units[e]).expect("erealm component")
    }

    /// Unit configuration implied by the register contents. Regions with an
    /// empty range, zero budget or zero period are left out.
    pub fn irealm_config_from_regs(&self, u: usize) -> IrealmConfig {
        let v = |f| self.regs.value(Field::Irealm(u, f));
        let regions = (0..self.ir_hw[u].regions)
            .map(|r| {
                let rv = |f| v(IrField::Region(r, f));
                RegionConfig {
                    region_id: r,
                    base: rv(RegionField::Base),
                    limit: rv(RegionField::Limit),
                    fragment_beats: rv(RegionField::Frag) as u16,
                    budget_beats: rv(RegionField::Budget),
                    period_cycles: rv(RegionField::Period),
                }
            })
            .filter(|r| r.limit > r.base && r.budget_beats > 0 && r.period_cycles > 0)
            .collect();
        IrealmConfig {
            regions,
            default_fragment_beats: v(IrField::DefaultFrag) as u16,
            num_pending: v(IrField::NumPending) as usize,
            write_buffer: v(IrField::WriteBuffer) == 1,
            buffer_depth_beats: self.ir_hw[u].buffer_depth_beats,
            throttle: v(IrField::Throttle) == 1,
            bypass: v(IrField::Bypass) == 1,
        }
    }

    fn apply(&mut self, field: Field) {
        match field {
            Field::Guard => {}
            Field::Irealm(u, IrField::Isolate) => {
                let on = self.regs.value(field) == 1;
                self.ir_mut(u).set_force_isolate(on);
            }
            Field::Irealm(u, _) => {
                let cfg = self.irealm_config_from_regs(u);
                let err = self.ir_mut(u).set_config(cfg).is_err();
                self.regs.set_value(Field::Irealm(u, IrField::ConfigError), u64::from(err));
            }
            Field::Erealm(e, f) => {
                let v = self.regs.value(field);
                let budgets = budgets_from_array(std::array::from_fn(|i| self.regs.value(Field::Erealm(e, ErField::Budget(i)))));
                let unit = self.er_mut(e);
                match f {
                    ErField::Enable => unit.set_enabled(v == 1),
                    ErField::AutoReset => unit.set_auto_reset(v == 1),
                    ErField::ResetLatency => {
                        let _ = unit.set_reset_latency(v);
                    }
                    ErField::Notify => unit.set_notify(if v == 1 { NotifyMode::Response } else { NotifyMode::Interrupt }),
                    ErField::Budget(_) => {
                        let _ = unit.set_budgets(budgets);
                    }
                    ErField::ResetCmd => unit.request_reset(),
                    ErField::ClearFault => {
                        unit.take_faults();
                        unit.clear_fault();
                    }
                    _ => {}
                }
            }
        }
    }

    /// Register write as manager `requester`, applied to the unit at once.
    pub fn write_reg(&mut self, requester: usize, name: &str, value: u64) -> Result<(), RegError> {
        let f = self.regs.write(requester, name, value)?;
        self.apply(f);
        Ok(())
    }

    pub fn read_reg(&self, requester: usize, name: &str) -> Result<u64, RegError> {
        let (field, stored) = self.regs.read(requester, name)?;
        Ok(match field {
            Field::Irealm(u, IrField::Isolated) => u64::from(self.irealm(u).is_isolated()),
            Field::Irealm(u, IrField::Region(r, rf)) => {
                let unit = self.irealm(u);
                let idx = unit.config().regions.iter().position(|x| x.region_id == r);
                match (rf, idx) {
                    (RegionField::Remaining, Some(i)) => unit.budgets()[i].remaining_beats,
                    (RegionField::Bytes, Some(i)) => unit.probes()[i].bytes_forwarded,
                    (RegionField::AvgLatency, Some(i)) => unit.probes()[i].average_latency().round() as u64,
                    (RegionField::Remaining | RegionField::Bytes | RegionField::AvgLatency, None) => 0,
                    _ => stored,
                }
            }
            Field::Erealm(e, f) => {
                let unit = self.erealm(e);
                let rec = unit.pending_faults().first();
                match f {
                    ErField::FaultValid => u64::from(rec.is_some()),
                    ErField::FaultCause => rec.map_or(0, |r| cause_code(r.cause)),
                    ErField::FaultTid => rec.map_or(0, |r| u64::from(r.tid.0)),
                    ErField::FaultAddr => rec.map_or(0, |r| r.addr),
                    ErField::FaultStage => rec.and_then(|r| r.stage).map_or(0, stage_code),
                    ErField::FaultCycle => rec.map_or(0, |r| r.detected_at),
                    ErField::Tracked => unit.tracked() as u64,
                    _ => stored,
                }
            }
            _ => stored,
        })
    }

    /// Claims the guard (if free) and programs an iREALM unit.
    pub fn program_irealm(&mut self, owner: usize, u: usize, cfg: &IrealmConfig) -> Result<(), RegError> {
        self.claim(owner)?;
        let p = format!("irealm{u}");
        self.write_reg(owner, &format!("{p}.num_pending"), cfg.num_pending as u64)?;
        self.write_reg(owner, &format!("{p}.default_frag"), u64::from(cfg.default_fragment_beats))?;
        self.write_reg(owner, &format!("{p}.write_buffer"), u64::from(cfg.write_buffer))?;
        self.write_reg(owner, &format!("{p}.throttle"), u64::from(cfg.throttle))?;
        for r in &cfg.regions {
            let q = format!("{p}.r{}", r.region_id);
            self.write_reg(owner, &format!("{q}.frag"), u64::from(r.fragment_beats))?;
            self.write_reg(owner, &format!("{q}.budget"), r.budget_beats)?;
            self.write_reg(owner, &format!("{q}.period"), r.period_cycles)?;
            self.write_reg(owner, &format!("{q}.base"), r.base)?;
            self.write_reg(owner, &format!("{q}.limit"), r.limit)?;
        }
        self.write_reg(owner, &format!("{p}.bypass"), u64::from(cfg.bypass))
    }

    /// Claims the guard (if free) and programs an eREALM unit.
    pub fn program_erealm(&mut self, owner: usize, e: usize, cfg: &ErealmConfig) -> Result<(), RegError> {
        self.claim(owner)?;
        let p = format!("erealm{e}");
        for (i, v) in budgets_to_array(&cfg.budgets).into_iter().enumerate() {
            let n = super::registers::STAGE_BUDGET_NAMES[i];
            self.write_reg(owner, &format!("{p}.budget.{n}"), v)?;
        }
        self.write_reg(owner, &format!("{p}.auto_reset"), u64::from(cfg.auto_reset))?;
        self.write_reg(owner, &format!("{p}.reset_latency"), cfg.reset_latency)?;
        self.write_reg(owner, &format!("{p}.notify"), u64::from(cfg.notify == NotifyMode::Response))?;
        self.write_reg(owner, &format!("{p}.enable"), u64::from(cfg.enabled))
    }

    fn claim(&mut self, owner: usize) -> Result<(), RegError> {
        if self.regs.guard().owner() != Some(owner) {
            self.write_reg(owner, "guard", 1)?;
        }
        Ok(())
    }
}

pub fn cause_code(c: FaultCause) -> u64 {
    match c {
        FaultCause::Timeout => 0,
        FaultCause::TidMismatch => 1,
        FaultCause::SuperfluousHandshake => 2,
        FaultCause::Protocol => 3,
    }
}

pub fn stage_code(s: Stage) -> u64 {
    match s {
        Stage::AxHs => 0,
        Stage::AwToW => 1,
        Stage::WFirstHs => 2,
        Stage::WData => 3,
        Stage::WLastToB => 4,
        Stage::BHs => 5,
        Stage::ArToR => 6,
        Stage::RData => 7,
        Stage::RResp => 8,
    }
}
