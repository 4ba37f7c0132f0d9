//! Egress guard in front of one subordinate.
//!
//! While tracking, every signal passes combinationally; the unit only
//! observes and keeps one LD entry per outstanding transaction. A response
//! it cannot attribute is held back and reported in the same cycle. On any
//! fault the unit cuts the subordinate off, completes everything in flight
//! with SLVERR, raises its interrupt and (optionally) pulses the reset.

pub mod dotq;
pub mod stages;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{ChannelBeat, Direction, Resp, Tid, TxnDescriptor};
use crate::simkernel::{AxiMgrPorts, AxiSubPorts, Component, Io, Line, Sim};

pub use dotq::{Dotq, IdRemap, LdEntry};
pub use stages::{FaultCause, FaultRecord, Stage, StageBudgets};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NotifyMode {
    /// Interrupt line plus SLVERR completions.
    Interrupt,
    /// SLVERR completions only.
    Response,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErealmConfig {
    pub enabled: bool,
    pub num_tids: usize,
    pub per_tid: usize,
    pub budgets: StageBudgets,
    pub auto_reset: bool,
    /// Cycles from detection to the reset pulse, 1 or 2.
    pub reset_latency: u64,
    pub notify: NotifyMode,
}

impl Default for ErealmConfig {
    fn default() -> Self {
        ErealmConfig {
            enabled: false,
            num_tids: 4,
            per_tid: 4,
            budgets: StageBudgets::default(),
            auto_reset: true,
            reset_latency: 1,
            notify: NotifyMode::Interrupt,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ErealmError {
    #[error("reset latency must be 1 or 2 cycles")]
    ResetLatency,
    #[error("tracking capacity must be positive")]
    Capacity,
    #[error("stage budgets must be at least 1 cycle")]
    Budget,
}

impl ErealmConfig {
    pub fn validate(&self) -> Result<(), ErealmError> {
        if !(1..=2).contains(&self.reset_latency) {
            return Err(ErealmError::ResetLatency);
        }
        if self.num_tids == 0 || self.per_tid == 0 {
            return Err(ErealmError::Capacity);
        }
        if !self.budgets.all_positive() {
            return Err(ErealmError::Budget);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ErealmStats {
    pub retired: u64,
    pub max_tracked: usize,
    pub synthesized_r_beats: u64,
    pub synthesized_b: u64,
    pub decerr_txns: u64,
    pub resets_issued: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ErrTxn {
    desc: TxnDescriptor,
    manager: usize,
    /// R beats sent or W beats absorbed.
    done: u16,
    resp: Resp,
}

#[derive(Debug, Clone, Copy)]
struct Recovery {
    reset_at: Option<u64>,
    acked: bool,
}

pub struct ErealmUnit {
    name: String,
    cfg: ErealmConfig,
    up: AxiSubPorts,
    down: AxiMgrPorts,
    enabled: bool,
    pending_enable: Option<bool>,
    off_inflight: i64,
    rd: Dotq,
    wr: Dotq,
    seq: u64,
    ar_pending: Option<usize>,
    aw_pending: Option<usize>,
    recovery: Option<Recovery>,
    err_r: VecDeque<ErrTxn>,
    err_w: VecDeque<ErrTxn>,
    r_hold: Option<ChannelBeat>,
    b_hold: Option<ChannelBeat>,
    faults: Vec<FaultRecord>,
    fault_log: Vec<FaultRecord>,
    irq: Option<Line>,
    reset: Option<Line>,
    reset_cmd: bool,
    clear_cmd: bool,
    stats: ErealmStats,
}

impl ErealmUnit {
    pub fn new(sim: &mut Sim, name: &str, cfg: ErealmConfig) -> Result<Self, ErealmError> {
        cfg.validate()?;
        Ok(ErealmUnit {
            name: name.to_string(),
            up: sim.axi_sub_ports(name),
            down: sim.axi_mgr_ports(name),
            enabled: cfg.enabled,
            pending_enable: None,
            off_inflight: 0,
            rd: Dotq::new(cfg.num_tids, cfg.per_tid),
            wr: Dotq::new(cfg.num_tids, cfg.per_tid),
            seq: 0,
            ar_pending: None,
            aw_pending: None,
            recovery: None,
            err_r: VecDeque::new(),
            err_w: VecDeque::new(),
            r_hold: None,
            b_hold: None,
            faults: Vec::new(),
            fault_log: Vec::new(),
            irq: None,
            reset: None,
            reset_cmd: false,
            clear_cmd: false,
            stats: ErealmStats::default(),
            cfg,
        })
    }

    pub fn up_ports(&self) -> &AxiSubPorts {
        &self.up
    }

    pub fn down_ports(&self) -> &AxiMgrPorts {
        &self.down
    }

    pub fn config(&self) -> &ErealmConfig {
        &self.cfg
    }

    pub fn stats(&self) -> &ErealmStats {
        &self.stats
    }

    pub fn set_irq_line(&mut self, line: Line) {
        self.irq = Some(line);
    }

    pub fn set_reset_line(&mut self, line: Line) {
        self.reset = Some(line);
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    /// Takes effect once nothing is in flight.
    pub fn set_enabled(&mut self, on: bool) {
        self.pending_enable = (on != self.enabled).then_some(on);
    }

    pub fn set_budgets(&mut self, b: StageBudgets) -> Result<(), ErealmError> {
        let cfg = ErealmConfig { budgets: b, ..self.cfg };
        cfg.validate()?;
        self.cfg = cfg;
        Ok(())
    }

    pub fn set_auto_reset(&mut self, on: bool) {
        self.cfg.auto_reset = on;
    }

    pub fn set_reset_latency(&mut self, cycles: u64) -> Result<(), ErealmError> {
        let cfg = ErealmConfig { reset_latency: cycles, ..self.cfg };
        cfg.validate()?;
        self.cfg = cfg;
        Ok(())
    }

    pub fn set_notify(&mut self, mode: NotifyMode) {
        self.cfg.notify = mode;
    }

    /// Register-commanded reset pulse, issued the next cycle.
    pub fn request_reset(&mut self) {
        self.reset_cmd = true;
    }

    /// Core acknowledgement ending recovery.
    pub fn clear_fault(&mut self) {
        self.clear_cmd = true;
    }

    pub fn is_recovering(&self) -> bool {
        self.recovery.is_some()
    }

    pub fn tracked(&self) -> usize {
        self.rd.len() + self.wr.len()
    }

    pub fn capacity(&self) -> usize {
        self.rd.capacity() + self.wr.capacity()
    }

    /// Records not yet read out.
    pub fn pending_faults(&self) -> &[FaultRecord] {
        &self.faults
    }

    /// Reads and clears the fault registers.
    pub fn take_faults(&mut self) -> Vec<FaultRecord> {
        std::mem::take(&mut self.faults)
    }

    /// Every fault ever detected.
    pub fn fault_log(&self) -> &[FaultRecord] {
        &self.fault_log
    }

    pub fn entries(&self, dir: Direction) -> Vec<LdEntry> {
        let q = if dir == Direction::Read { &self.rd } else { &self.wr };
        q.entries()
            .map(|(_, e)| {
                let mut e = *e;
                e.desc.tid = upstream_tid(e.desc.tid);
                e
            })
            .collect()
    }

    fn q(&self, dir: Direction) -> &Dotq {
        if dir == Direction::Read {
            &self.rd
        } else {
            &self.wr
        }
    }

    fn q_mut(&mut self, dir: Direction) -> &mut Dotq {
        if dir == Direction::Read {
            &mut self.rd
        } else {
            &mut self.wr
        }
    }

    fn classify(&self, b: &ChannelBeat, dir: Direction) -> Result<usize, (FaultCause, Option<usize>)> {
        let q = self.q(dir);
        let tid = b.tid.ok_or((FaultCause::Protocol, None))?;
        let h = q.head(axi_id(b.manager, tid)).ok_or((FaultCause::TidMismatch, None))?;
        let e = q.get(h);
        match dir {
            Direction::Read => {
                if !matches!(e.stage, Stage::ArToR | Stage::RData | Stage::RResp) {
                    return Err((FaultCause::SuperfluousHandshake, Some(h)));
                }
                if b.is_last != (e.beats + 1 == e.desc.len_beats) {
                    return Err((FaultCause::Protocol, Some(h)));
                }
            }
            Direction::Write => {
                if !matches!(e.stage, Stage::WLastToB | Stage::BHs) {
                    return Err((FaultCause::SuperfluousHandshake, Some(h)));
                }
            }
        }
        Ok(h)
    }

    fn ax_passes(&self, io: &Io, dir: Direction) -> bool {
        let (port, pending) =
            if dir == Direction::Read { (self.up.ar, self.ar_pending) } else { (self.up.aw, self.aw_pending) };
        match io.peek(port).and_then(|b| b.desc.map(|d| (b.manager, d))) {
            Some((m, d)) => pending.is_some() || self.q(dir).can_insert(axi_id(m, d.tid)),
            None => false,
        }
    }

    fn eval_wires(&self, io: &mut Io) {
        let (u, d) = (self.up, self.down);
        for (i, o) in [(u.ar, d.ar), (u.aw, d.aw), (u.w, d.w), (d.r, u.r), (d.b, u.b)] {
            let b = io.peek(i).copied();
            io.drive(o, b);
            let r = io.ready(o);
            io.set_ready(i, r);
        }
    }

    fn eval_tracking(&self, io: &mut Io) {
        let (u, d) = (self.up, self.down);
        for (dir, i, o) in [(Direction::Read, u.ar, d.ar), (Direction::Write, u.aw, d.aw)] {
            let pass = self.ax_passes(io, dir);
            let b = if pass { io.peek(i).copied() } else { None };
            io.drive(o, b);
            let r = pass && io.ready(o);
            io.set_ready(i, r);
        }
        let w = io.peek(u.w).copied();
        io.drive(d.w, w);
        let r = io.ready(d.w);
        io.set_ready(u.w, r);
        for (dir, i, o) in [(Direction::Read, d.r, u.r), (Direction::Write, d.b, u.b)] {
            let b = io.peek(i).copied().filter(|b| self.classify(b, dir).is_ok());
            io.drive(o, b);
            let r = b.is_some() && io.ready(o);
            io.set_ready(i, r);
        }
    }

    fn synth_r(&self) -> Option<ChannelBeat> {
        self.r_hold.or_else(|| {
            self.err_r.front().map(|t| {
                ChannelBeat::r(t.desc.id, t.desc.tid, t.manager, t.done, t.done + 1 == t.desc.len_beats, t.resp)
            })
        })
    }

    fn synth_b(&self) -> Option<ChannelBeat> {
        self.b_hold.or_else(|| {
            self.err_w
                .front()
                .filter(|t| t.done == t.desc.len_beats)
                .map(|t| ChannelBeat::b(t.desc.id, t.desc.tid, t.manager, t.resp))
        })
    }

    fn eval_recovery(&self, io: &mut Io, rec: &Recovery) {
        let (u, d) = (self.up, self.down);
        for p in [d.ar, d.aw, d.w] {
            io.drive(p, None);
        }
        io.set_ready(d.r, true);
        io.set_ready(d.b, true);
        io.set_ready(u.ar, !rec.acked);
        io.set_ready(u.aw, !rec.acked);
        let w_open = self.err_w.iter().any(|t| t.done < t.desc.len_beats);
        io.set_ready(u.w, w_open);
        io.drive(u.r, self.synth_r());
        io.drive(u.b, self.synth_b());
    }
}

impl Component for ErealmUnit {
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&self, io: &mut Io) {
        if !self.enabled {
            self.eval_wires(io);
        } else if let Some(rec) = &self.recovery {
            self.eval_recovery(io, rec);
        } else {
            self.eval_tracking(io);
        }
    }

    fn commit(&mut self, io: &mut Io) {
        let cycle = io.cycle();
        if self.reset_cmd {
            self.reset_cmd = false;
            if let Some(l) = &self.reset {
                l.raise_at(cycle + 1);
                self.stats.resets_issued += 1;
            }
        }
        if !self.enabled {
            self.commit_off(io);
        } else if self.recovery.is_some() {
            self.commit_recovery(io, cycle);
        } else {
            self.commit_tracking(io, cycle);
        }
        self.clear_cmd = false;
        if let Some(on) = self.pending_enable {
            let idle = if self.enabled {
                self.recovery.is_none() && self.tracked() == 0
            } else {
                self.off_inflight == 0
            };
            if idle {
                self.enabled = on;
                self.cfg.enabled = on;
                self.pending_enable = None;
                self.off_inflight = 0;
            }
        }
    }
}

impl ErealmUnit {
    fn commit_off(&mut self, io: &mut Io) {
        let d = self.down;
        for p in [d.ar, d.aw] {
            if io.fired(p) {
                self.off_inflight += 1;
            }
        }
        if io.transfer(d.r).is_some_and(|b| b.is_last) {
            self.off_inflight -= 1;
        }
        if io.fired(d.b) {
            self.off_inflight -= 1;
        }
    }

    fn open(&mut self, dir: Direction, idx: usize, stage: Stage, cycle: u64) {
        let budgets = self.cfg.budgets;
        let e = self.q_mut(dir).get_mut(idx);
        e.stage = stage;
        e.stage_start = cycle;
        e.elapsed = 0;
        e.budget = budgets.budget(dir, stage, e.desc.len_beats);
    }

    fn track_ax(&mut self, io: &Io, dir: Direction, cycle: u64) {
        let port = if dir == Direction::Read { self.up.ar } else { self.up.aw };
        let Some(beat) = io.peek(port).copied() else { return };
        let mut desc = beat.desc.expect("address beat carries descriptor");
        desc.tid = axi_id(beat.manager, desc.tid);
        let pending = if dir == Direction::Read { self.ar_pending } else { self.aw_pending };
        let idx = match pending {
            Some(i) => i,
            None => {
                if !self.q(dir).can_insert(desc.tid) {
                    return;
                }
                let budget = self.cfg.budgets.budget(dir, Stage::AxHs, desc.len_beats);
                let e = LdEntry {
                    slot: 0,
                    desc,
                    manager: beat.manager,
                    stage: Stage::AxHs,
                    stage_start: cycle,
                    elapsed: 0,
                    budget,
                    beats: 0,
                    next: None,
                    seq: self.seq,
                };
                self.seq += 1;
                self.q_mut(dir).insert(e).expect("capacity checked")
            }
        };
        let next_pending = if io.fired(port) {
            let next = if dir == Direction::Read { Stage::ArToR } else { Stage::AwToW };
            self.open(dir, idx, next, cycle);
            self.q_mut(dir).push_order(idx);
            None
        } else {
            Some(idx)
        };
        if dir == Direction::Read {
            self.ar_pending = next_pending;
        } else {
            self.aw_pending = next_pending;
        }
    }

    fn fault_at(&self, cause: FaultCause, dir: Direction, idx: Option<usize>, beat: Option<&ChannelBeat>, cycle: u64) -> FaultRecord {
        let e = idx.map(|i| *self.q(dir).get(i));
        FaultRecord {
            cause,
            direction: dir,
            tid: e.map(|e| upstream_tid(e.desc.tid)).or(beat.and_then(|b| b.tid)).unwrap_or(Tid(0)),
            slot: e.map(|e| e.slot),
            addr: e.map_or(0, |e| e.desc.addr),
            stage: e.map(|e| e.stage),
            stage_start: e.map(|e| e.stage_start),
            detected_at: cycle,
        }
    }

    fn track_w(&mut self, io: &Io, cycle: u64) -> Option<FaultRecord> {
        let b = io.peek(self.up.w).copied()?;
        let Some(h) = self.wr.order_head() else {
            return io
                .fired(self.up.w)
                .then(|| self.fault_at(FaultCause::SuperfluousHandshake, Direction::Write, None, Some(&b), cycle));
        };
        if self.wr.get(h).stage == Stage::AwToW {
            self.open(Direction::Write, h, Stage::WFirstHs, cycle);
        }
        if !io.fired(self.up.w) {
            return None;
        }
        let e = *self.wr.get(h);
        if b.is_last != (e.beats + 1 == e.desc.len_beats) {
            return Some(self.fault_at(FaultCause::Protocol, Direction::Write, Some(h), Some(&b), cycle));
        }
        if e.stage == Stage::WFirstHs {
            self.open(Direction::Write, h, Stage::WData, cycle);
        }
        self.wr.get_mut(h).beats += 1;
        if b.is_last {
            self.open(Direction::Write, h, Stage::WLastToB, cycle);
            self.wr.pop_order();
        }
        None
    }

    fn track_resp(&mut self, io: &Io, dir: Direction, cycle: u64) -> Option<FaultRecord> {
        let port = if dir == Direction::Read { self.down.r } else { self.down.b };
        let b = io.peek(port).copied()?;
        let h = match self.classify(&b, dir) {
            Ok(h) => h,
            Err((cause, idx)) => return Some(self.fault_at(cause, dir, idx, Some(&b), cycle)),
        };
        let stage = self.q(dir).get(h).stage;
        match dir {
            Direction::Read => {
                if stage == Stage::ArToR {
                    self.open(dir, h, Stage::RData, cycle);
                }
                if b.is_last && self.rd.get(h).stage == Stage::RData {
                    self.open(dir, h, Stage::RResp, cycle);
                }
                if io.fired(port) {
                    self.rd.get_mut(h).beats += 1;
                    if b.is_last {
                        self.rd.retire(h);
                        self.stats.retired += 1;
                    }
                }
            }
            Direction::Write => {
                if stage == Stage::WLastToB {
                    self.open(dir, h, Stage::BHs, cycle);
                }
                if io.fired(port) {
                    self.wr.retire(h);
                    self.stats.retired += 1;
                }
            }
        }
        None
    }

    /// Advances stage timers; returns the oldest expired entry.
    fn tick(&mut self, cycle: u64) -> Option<FaultRecord> {
        let oldest_open = self
            .rd
            .entries()
            .chain(self.wr.entries())
            .filter(|(_, e)| e.stage.before_data_done())
            .map(|(_, e)| e.seq)
            .min();
        let w_head = self.wr.order_head();
        let mut expired: Option<(u64, Direction, usize)> = None;
        for dir in [Direction::Read, Direction::Write] {
            for idx in self.q(dir).indices() {
                let e = self.q(dir).get(idx);
                if e.stage_start == cycle {
                    continue;
                }
                let active = if e.stage.queued() {
                    oldest_open.is_none_or(|s| s >= e.seq)
                } else if e.stage == Stage::AwToW {
                    w_head == Some(idx)
                } else {
                    true
                };
                if !active {
                    continue;
                }
                let e = self.q_mut(dir).get_mut(idx);
                e.elapsed += 1;
                if e.elapsed >= e.budget && expired.is_none_or(|(s, ..)| e.seq < s) {
                    expired = Some((e.seq, dir, idx));
                }
            }
        }
        expired.map(|(_, dir, idx)| self.fault_at(FaultCause::Timeout, dir, Some(idx), None, cycle))
    }

    fn commit_tracking(&mut self, io: &mut Io, cycle: u64) {
        self.track_ax(io, Direction::Read, cycle);
        self.track_ax(io, Direction::Write, cycle);
        let mut fault = self.track_w(io, cycle);
        for dir in [Direction::Read, Direction::Write] {
            let f = self.track_resp(io, dir, cycle);
            fault = fault.or(f);
        }
        self.stats.max_tracked = self.stats.max_tracked.max(self.tracked());
        let f = self.tick(cycle);
        if let Some(f) = fault.or(f) {
            self.enter_recovery(io, f, cycle);
        }
    }

    fn enter_recovery(&mut self, io: &mut Io, rec: FaultRecord, cycle: u64) {
        self.faults.push(rec);
        self.fault_log.push(rec);
        // beats already presented upstream but not taken must stay stable
        self.r_hold = io.peek(self.up.r).copied().filter(|_| !io.fired(self.up.r));
        self.b_hold = io.peek(self.up.b).copied().filter(|_| !io.fired(self.up.b));
        let hold_r = self.r_hold.and_then(|b| b.tid.map(|t| axi_id(b.manager, t))).and_then(|t| self.rd.head(t));
        let hold_b = self.b_hold.and_then(|b| b.tid.map(|t| axi_id(b.manager, t))).and_then(|t| self.wr.head(t));
        let mut reads: Vec<(bool, u64, ErrTxn)> = self
            .rd
            .entries()
            .filter(|(_, e)| e.stage != Stage::AxHs)
            .map(|(i, e)| {
                let t = ErrTxn { desc: upstream_desc(e.desc), manager: e.manager, done: e.beats, resp: Resp::SlvErr };
                (Some(i) != hold_r && e.beats == 0, e.seq, t)
            })
            .collect();
        reads.sort_by_key(|(fresh, seq, _)| (*fresh, *seq));
        let mut writes: Vec<(bool, u64, ErrTxn)> = self
            .wr
            .entries()
            .filter(|(_, e)| e.stage != Stage::AxHs)
            .map(|(i, e)| {
                let t = ErrTxn { desc: upstream_desc(e.desc), manager: e.manager, done: e.beats, resp: Resp::SlvErr };
                (Some(i) != hold_b, e.seq, t)
            })
            .collect();
        writes.sort_by_key(|(other, seq, _)| (*other, *seq));
        self.err_r.extend(reads.into_iter().map(|x| x.2));
        self.err_w.extend(writes.into_iter().map(|x| x.2));
        self.rd.clear();
        self.wr.clear();
        self.ar_pending = None;
        self.aw_pending = None;
        for p in [self.down.ar, self.down.aw, self.down.w] {
            io.abort(p);
        }
        if self.cfg.notify == NotifyMode::Interrupt {
            if let Some(l) = &self.irq {
                l.raise_at(cycle + 1);
            }
        }
        let reset_at = self.cfg.auto_reset.then_some(cycle + self.cfg.reset_latency);
        if let (Some(at), Some(l)) = (reset_at, &self.reset) {
            l.raise_at(at);
            self.stats.resets_issued += 1;
        }
        self.recovery = Some(Recovery { reset_at, acked: false });
    }

    fn commit_recovery(&mut self, io: &mut Io, cycle: u64) {
        let u = self.up;
        if let Some(b) = io.transfer(u.ar).copied() {
            let desc = b.desc.expect("address beat carries descriptor");
            self.err_r.push_back(ErrTxn { desc, manager: b.manager, done: 0, resp: Resp::DecErr });
            self.stats.decerr_txns += 1;
        }
        if let Some(b) = io.transfer(u.aw).copied() {
            let desc = b.desc.expect("address beat carries descriptor");
            self.err_w.push_back(ErrTxn { desc, manager: b.manager, done: 0, resp: Resp::DecErr });
            self.stats.decerr_txns += 1;
        }
        if io.fired(u.w) {
            let t = self.err_w.iter_mut().find(|t| t.done < t.desc.len_beats).expect("W absorbed for a write");
            t.done += 1;
        }
        if io.fired(u.r) {
            if self.r_hold.take().is_none() {
                self.stats.synthesized_r_beats += 1;
            }
            let t = self.err_r.front_mut().expect("R for an error read");
            t.done += 1;
            if t.done == t.desc.len_beats {
                self.err_r.pop_front();
            }
        }
        if io.fired(u.b) {
            if self.b_hold.take().is_none() {
                self.stats.synthesized_b += 1;
            }
            self.err_w.pop_front();
        }
        let rec = self.recovery.as_mut().expect("in recovery");
        let reset_done = rec.reset_at.is_none_or(|r| cycle >= r);
        if !rec.acked {
            let irq_cleared = match (&self.irq, self.cfg.notify) {
                (Some(l), NotifyMode::Interrupt) => l.raised_at().is_none(),
                _ => rec.reset_at.is_some() && reset_done,
            };
            rec.acked = self.clear_cmd || irq_cleared;
        }
        let drained = self.err_r.is_empty() && self.err_w.is_empty() && self.r_hold.is_none() && self.b_hold.is_none();
        if rec.acked && reset_done && drained {
            self.recovery = None;
        }
    }
}

/// Downstream of the interconnect a transaction is identified by its TID
/// extended with the index of the manager port it came from.
fn axi_id(manager: usize, tid: Tid) -> Tid {
    Tid(((manager as u16) << 8) | (tid.0 & 0xff))
}

fn upstream_tid(id: Tid) -> Tid {
    Tid(id.0 & 0xff)
}

fn upstream_desc(mut d: TxnDescriptor) -> TxnDescriptor {
    d.tid = upstream_tid(d.tid);
    d
}
