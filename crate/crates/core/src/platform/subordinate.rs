//! Memory endpoint with a bounded request queue, one service engine and an
//! optional fault plan.
//!
//! Requests are served in acceptance order. The engine grants one data slot
//! per cycle (per `beats_per_cycle`). A read beat granted slot `s` becomes
//! visible at `s + fixed_latency`; a write consumes one buffered W beat per
//! slot and its B becomes visible at `last_slot + fixed_latency`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::protocol::{ChannelBeat, Direction, Resp, Tid, TxnDescriptor};
use crate::simkernel::{AxiSubPorts, Component, Io, Line, Sim};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultTrigger {
    AtCycle(u64),
    /// After `beats` data beats of a transaction matching the filters.
    AfterBeats {
        beats: u16,
        #[serde(default)]
        direction: Option<Direction>,
        #[serde(default)]
        tid: Option<u16>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultBehavior {
    StallForever,
    StallFor(u64),
    WrongTidResponse,
    ExtraHandshake,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultInjection {
    pub trigger: FaultTrigger,
    pub behavior: FaultBehavior,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubordinateSpec {
    pub fixed_latency: u64,
    #[serde(default = "one")]
    pub beats_per_cycle: u32,
    #[serde(default = "default_queue")]
    pub queue_capacity: usize,
    /// Service cycles spent opening each transaction before its first beat.
    #[serde(default)]
    pub txn_overhead: u64,
    #[serde(default)]
    pub fault_plan: Option<FaultInjection>,
}

fn one() -> u32 {
    1
}

fn default_queue() -> usize {
    8
}

impl SubordinateSpec {
    pub fn new(fixed_latency: u64) -> Self {
        SubordinateSpec { fixed_latency, beats_per_cycle: 1, queue_capacity: default_queue(), txn_overhead: 0, fault_plan: None }
    }
}

/// TID used for a perturbed response; outside any remapped or generated range.
pub const WRONG_TID_FLIP: u16 = 0x80;

#[derive(Debug, Clone)]
struct Entry {
    desc: TxnDescriptor,
    manager: usize,
    slots: u16,
    w_received: u16,
    setup: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FaultState {
    Armed,
    Stalled { until: Option<u64> },
    PerturbNext,
    Done,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubStats {
    pub accepted: u64,
    pub beats_served: u64,
    pub resets: u64,
    pub fault_activated_at: Option<u64>,
    /// First cycle the fault is visible on the ports.
    pub fault_manifest_at: Option<u64>,
    pub last_reset_at: Option<u64>,
}

pub struct Subordinate {
    name: String,
    spec: SubordinateSpec,
    ports: AxiSubPorts,
    queue: VecDeque<Entry>,
    /// Response beats with the cycle they become visible.
    r_out: VecDeque<(u64, ChannelBeat)>,
    b_out: VecDeque<(u64, ChannelBeat)>,
    fault: FaultState,
    fault_beats: u16,
    last_resp: Option<ChannelBeat>,
    reset_in: Option<Line>,
    stats: SubStats,
    /// A contested queue slot goes to the write side next.
    prefer_write: bool,
}

impl Subordinate {
    pub fn new(sim: &mut Sim, name: &str, spec: SubordinateSpec) -> Self {
        let fault = if spec.fault_plan.is_some() { FaultState::Armed } else { FaultState::Done };
        Subordinate {
            name: name.to_string(),
            ports: sim.axi_sub_ports(name),
            spec,
            queue: VecDeque::new(),
            prefer_write: false,
            r_out: VecDeque::new(),
            b_out: VecDeque::new(),
            fault,
            fault_beats: 0,
            last_resp: None,
            reset_in: None,
            stats: SubStats::default(),
        }
    }

    pub fn ports(&self) -> &AxiSubPorts {
        &self.ports
    }

    pub fn stats(&self) -> &SubStats {
        &self.stats
    }

    pub fn spec(&self) -> &SubordinateSpec {
        &self.spec
    }

    /// Wires a reset pulse input; a pulse clears all in-flight state and the
    /// fault plan.
    pub fn set_reset_line(&mut self, line: Line) {
        self.reset_in = Some(line);
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty() && self.r_out.is_empty() && self.b_out.is_empty()
    }

    fn stalled(&self) -> bool {
        matches!(self.fault, FaultState::Stalled { .. })
    }

    fn w_pending(&self) -> bool {
        self.queue.iter().any(|e| e.desc.direction == Direction::Write && e.w_received < e.desc.len_beats)
    }

    fn present(&self, out: &VecDeque<(u64, ChannelBeat)>, cycle: u64) -> Option<ChannelBeat> {
        let (_, mut b) = *out.front().filter(|(t, _)| *t <= cycle)?;
        if self.fault == FaultState::PerturbNext {
            b.tid = b.tid.map(|t| Tid(t.0 ^ WRONG_TID_FLIP));
        }
        Some(b)
    }

    fn matches_trigger(&self, desc: &TxnDescriptor) -> bool {
        match self.spec.fault_plan.map(|f| f.trigger) {
            Some(FaultTrigger::AfterBeats { direction, tid, .. }) => {
                direction.is_none_or(|d| d == desc.direction) && tid.is_none_or(|t| t == desc.tid.0)
            }
            _ => false,
        }
    }

    fn activate(&mut self, io: &mut Io, cycle: u64) {
        let Some(plan) = self.spec.fault_plan else { return };
        self.stats.fault_activated_at = Some(cycle);
        if plan.behavior != FaultBehavior::WrongTidResponse {
            self.stats.fault_manifest_at = Some(cycle + 1);
        }
        self.fault = match plan.behavior {
            FaultBehavior::StallForever => FaultState::Stalled { until: None },
            FaultBehavior::StallFor(m) => FaultState::Stalled { until: Some(cycle + m) },
            FaultBehavior::WrongTidResponse => FaultState::PerturbNext,
            FaultBehavior::ExtraHandshake => {
                if let Some(b) = self.last_resp {
                    let q = if b.channel == crate::protocol::Channel::R { &mut self.r_out } else { &mut self.b_out };
                    q.push_front((cycle + 1, b));
                }
                FaultState::Done
            }
        };
        io.abort(self.ports.r);
        io.abort(self.ports.b);
    }

    fn reset(&mut self, io: &mut Io) {
        self.queue.clear();
        self.r_out.clear();
        self.b_out.clear();
        self.fault = FaultState::Done;
        self.stats.resets += 1;
        self.stats.last_reset_at = Some(io.cycle());
        io.abort(self.ports.r);
        io.abort(self.ports.b);
    }

    fn count_fault_beat(&mut self, io: &mut Io, desc: &TxnDescriptor, cycle: u64) {
        if self.fault != FaultState::Armed || !self.matches_trigger(desc) {
            return;
        }
        self.fault_beats += 1;
        if let Some(FaultInjection { trigger: FaultTrigger::AfterBeats { beats, .. }, .. }) = self.spec.fault_plan {
            if self.fault_beats >= beats {
                self.activate(io, cycle);
            }
        }
    }

    fn serve(&mut self, cycle: u64) {
        let lat = self.spec.fixed_latency;
        for _ in 0..self.spec.beats_per_cycle {
            let Some(e) = self.queue.front_mut() else { return };
            if e.setup > 0 {
                e.setup -= 1;
                continue;
            }
            let last = e.slots + 1 == e.desc.len_beats;
            match e.desc.direction {
                Direction::Read => {
                    let b = ChannelBeat::r(e.desc.id, e.desc.tid, e.manager, e.slots, last, Resp::Okay);
                    self.r_out.push_back((cycle + lat, b));
                }
                Direction::Write => {
                    if e.w_received <= e.slots {
                        return;
                    }
                    if last {
                        let b = ChannelBeat::b(e.desc.id, e.desc.tid, e.manager, Resp::Okay);
                        self.b_out.push_back((cycle + lat, b));
                    }
                }
            }
            e.slots += 1;
            self.stats.beats_served += 1;
            if last {
                self.queue.pop_front();
            }
        }
    }
}

impl Component for Subordinate {
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&self, io: &mut Io) {
        let p = self.ports;
        if self.stalled() {
            for port in [p.ar, p.aw, p.w] {
                io.set_ready(port, false);
            }
            io.drive(p.r, None);
            io.drive(p.b, None);
            return;
        }
        let cycle = io.cycle();
        io.drive(p.r, self.present(&self.r_out, cycle));
        io.drive(p.b, self.present(&self.b_out, cycle));
        let cap = self.spec.queue_capacity;
        let free = cap.saturating_sub(self.queue.len());
        let (ar_on, aw_on) = (io.peek(p.ar).is_some(), io.peek(p.aw).is_some());
        let (ar_ready, aw_ready) = if self.prefer_write {
            (free > usize::from(aw_on), free > 0)
        } else {
            (free > 0, free > usize::from(ar_on))
        };
        io.set_ready(p.ar, ar_ready);
        io.set_ready(p.aw, aw_ready);
        io.set_ready(p.w, self.w_pending() || io.fired(p.aw));
    }

    fn commit(&mut self, io: &mut Io) {
        let cycle = io.cycle();
        let p = self.ports;
        if io.peek(p.ar).is_some() && io.peek(p.aw).is_some() {
            self.prefer_write = io.fired(p.ar);
        }
        if self.reset_in.as_ref().is_some_and(|l| l.pulses(cycle)) {
            self.reset(io);
            return;
        }
        if let FaultState::Stalled { until: Some(u) } = self.fault {
            if cycle >= u {
                self.fault = FaultState::Done;
            }
        }
        if self.fault == FaultState::PerturbNext
            && self.stats.fault_manifest_at.is_none()
            && (io.peek(p.r).is_some() || io.peek(p.b).is_some())
        {
            self.stats.fault_manifest_at = Some(cycle);
        }
        if let Some(b) = io.transfer(p.r).copied() {
            self.r_out.pop_front();
            self.last_resp = Some(b);
            if self.fault == FaultState::PerturbNext {
                self.fault = FaultState::Done;
            }
        }
        if let Some(b) = io.transfer(p.b).copied() {
            self.b_out.pop_front();
            self.last_resp = Some(b);
            if self.fault == FaultState::PerturbNext {
                self.fault = FaultState::Done;
            }
        }
        for port in [p.ar, p.aw] {
            if let Some(b) = io.transfer(port).copied() {
                let desc = b.desc.expect("address beat carries descriptor");
                self.queue.push_back(Entry { desc, manager: b.manager, slots: 0, w_received: 0, setup: self.spec.txn_overhead });
                self.stats.accepted += 1;
            }
        }
        if io.fired(p.w) {
            let e = self
                .queue
                .iter_mut()
                .find(|e| e.desc.direction == Direction::Write && e.w_received < e.desc.len_beats)
                .expect("W accepted only with a pending write");
            e.w_received += 1;
            let desc = e.desc;
            self.count_fault_beat(io, &desc, cycle);
        }
        if let Some(b) = io.transfer(p.r).copied() {
            if let Some(e) = self.matching_read(&b) {
                self.count_fault_beat(io, &e, cycle);
            }
        }
        if let Some(FaultInjection { trigger: FaultTrigger::AtCycle(n), .. }) = self.spec.fault_plan {
            if self.fault == FaultState::Armed && cycle >= n {
                self.activate(io, cycle);
            }
        }
        if !self.stalled() {
            self.serve(cycle);
        }
    }
}

impl Subordinate {
    fn matching_read(&self, b: &ChannelBeat) -> Option<TxnDescriptor> {
        // the R beat carries no descriptor; rebuild the filter inputs from it
        let tid = b.tid?;
        Some(TxnDescriptor {
            id: b.txn,
            direction: Direction::Read,
            tid,
            addr: 0,
            len_beats: 1,
            beat_bytes: 1,
            burst: Default::default(),
            manager_id: b.manager,
            issue_cycle: 0,
        })
    }
}
