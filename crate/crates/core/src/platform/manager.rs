//! Traffic-generating managers.
//!
//! A manager runs a sequence of activations. Each activation moves
//! `bytes_per_activation` bytes as jobs of `txn_len_beats` beats; a job is a
//! read, a write, or a read followed by a dependent write. At most
//! `max_outstanding` jobs are in flight. With a non-zero period, activation
//! `k` starts at `max(start + k * period, end of activation k - 1)`.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::protocol::{BurstAttr, ChannelBeat, Direction, Resp, Tid, TxnDescriptor, TxnId};
use crate::simkernel::{AxiMgrPorts, Component, Io, Line, Sim};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManagerKind {
    CoreCopy,
    DmaBurst,
    PeriodicSchedule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mix {
    Read,
    Write,
    /// Read, then write the same data once the read completes.
    Copy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManagerSpec {
    pub kind: ManagerKind,
    pub mix: Mix,
    pub txn_len_beats: u16,
    pub beat_bytes: u16,
    /// 0 means unbounded.
    pub bytes_per_activation: u64,
    /// 0 runs activations back to back.
    pub activation_period: u64,
    pub max_activations: Option<u64>,
    pub start_cycle: u64,
    pub read_base: u64,
    pub write_base: u64,
    /// Addresses wrap inside `[base, base + region_bytes)`.
    pub region_bytes: u64,
    pub max_outstanding: usize,
    pub tid: u16,
    /// Consecutive jobs rotate through `tid..tid + num_tids`.
    pub num_tids: u16,
    pub burst: BurstAttr,
    /// Cycles from AW presentation to the first W beat.
    pub w_delay: u64,
    /// Cycles between consecutive W beats.
    pub w_interval: u64,
    /// Interrupt service latency.
    pub reaction_latency: u64,
    /// Re-issue transactions that completed with an error, after the
    /// interrupt (if wired) has been serviced.
    pub retry_errors: bool,
}

impl Default for ManagerSpec {
    fn default() -> Self {
        ManagerSpec {
            kind: ManagerKind::DmaBurst,
            mix: Mix::Read,
            txn_len_beats: 1,
            beat_bytes: 8,
            bytes_per_activation: 0,
            activation_period: 0,
            max_activations: None,
            start_cycle: 0,
            read_base: 0,
            write_base: 0,
            region_bytes: 1 << 16,
            max_outstanding: 1,
            tid: 0,
            num_tids: 1,
            burst: BurstAttr::default(),
            w_delay: 0,
            w_interval: 1,
            reaction_latency: 100,
            retry_errors: false,
        }
    }
}

impl ManagerSpec {
    /// Dependent single-beat copy of `bytes` bytes.
    pub fn core_copy(bytes: u64, read_base: u64, write_base: u64) -> Self {
        ManagerSpec {
            kind: ManagerKind::CoreCopy,
            mix: Mix::Copy,
            bytes_per_activation: bytes,
            max_activations: Some(1),
            read_base,
            write_base,
            ..Default::default()
        }
    }

    /// Unbounded back-to-back bursts.
    pub fn dma_burst(len: u16, mix: Mix, read_base: u64, write_base: u64) -> Self {
        ManagerSpec { kind: ManagerKind::DmaBurst, mix, txn_len_beats: len, read_base, write_base, ..Default::default() }
    }

    pub fn job_bytes(&self) -> u64 {
        u64::from(self.txn_len_beats) * u64::from(self.beat_bytes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Activation {
    pub start: u64,
    /// Cycle of the last completion, once done.
    pub end: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ManagerStats {
    pub bytes_completed: u64,
    pub txns_completed: u64,
    pub lat_sum: u64,
    pub lat_max: u64,
    /// (issue cycle, latency) per completed transaction.
    pub latencies: Vec<(u64, u64)>,
    pub first_issue: Option<u64>,
    pub last_completion: Option<u64>,
    pub errors: u64,
    pub activations: Vec<Activation>,
    pub notified_at: Option<u64>,
}

impl ManagerStats {
    pub fn mean_latency(&self) -> f64 {
        if self.txns_completed == 0 {
            0.0
        } else {
            self.lat_sum as f64 / self.txns_completed as f64
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Track {
    job: u64,
    direction: Direction,
    len: u16,
    addr: u64,
    tid: Tid,
    presented: Option<u64>,
    beats_seen: u16,
    resp: Resp,
}

#[derive(Debug, Clone, Copy)]
struct WStream {
    txn: TxnId,
    len: u16,
    sent: u16,
    next_ready: Option<u64>,
}

#[derive(Debug, Clone, Copy)]
struct Job {
    activation: usize,
    write_addr: u64,
    tid: Tid,
    bytes: u64,
}

pub struct Manager {
    name: String,
    id: usize,
    spec: ManagerSpec,
    ports: AxiMgrPorts,
    ar_q: VecDeque<TxnId>,
    aw_q: VecDeque<TxnId>,
    w_q: VecDeque<WStream>,
    txns: HashMap<TxnId, Track>,
    jobs: HashMap<u64, Job>,
    next_seq: u64,
    next_job: u64,
    issued_bytes: u64,
    inflight_by_act: HashMap<usize, usize>,
    retry: VecDeque<(Direction, u64, u16, Tid, u64)>,
    irq: Option<Line>,
    stats: ManagerStats,
    enabled: bool,
}

const ID_SHIFT: u32 = 36;

impl Manager {
    pub fn new(sim: &mut Sim, name: &str, id: usize, spec: ManagerSpec) -> Self {
        Manager {
            name: name.to_string(),
            id,
            ports: sim.axi_mgr_ports(name),
            spec,
            ar_q: VecDeque::new(),
            aw_q: VecDeque::new(),
            w_q: VecDeque::new(),
            txns: HashMap::new(),
            jobs: HashMap::new(),
            next_seq: 0,
            next_job: 0,
            issued_bytes: 0,
            inflight_by_act: HashMap::new(),
            retry: VecDeque::new(),
            irq: None,
            stats: ManagerStats::default(),
            enabled: true,
        }
    }

    pub fn ports(&self) -> &AxiMgrPorts {
        &self.ports
    }

    pub fn stats(&self) -> &ManagerStats {
        &self.stats
    }

    pub fn spec(&self) -> &ManagerSpec {
        &self.spec
    }

    pub fn id(&self) -> usize {
        self.id
    }

    /// A disabled manager issues nothing.
    pub fn set_enabled(&mut self, on: bool) {
        self.enabled = on;
    }

    pub fn set_irq_line(&mut self, line: Line) {
        self.irq = Some(line);
    }

    pub fn outstanding(&self) -> usize {
        self.txns.len()
    }

    /// All bounded activations finished and nothing in flight.
    pub fn is_done(&self) -> bool {
        match self.spec.max_activations {
            Some(n) => {
                self.stats.activations.len() as u64 >= n
                    && self.stats.activations.iter().all(|a| a.end.is_some())
                    && self.txns.is_empty()
                    && self.retry.is_empty()
            }
            None => !self.enabled && self.txns.is_empty(),
        }
    }

    fn current_activation(&self) -> Option<usize> {
        self.stats.activations.len().checked_sub(1)
    }

    fn activation_quota_left(&self) -> bool {
        self.spec.bytes_per_activation == 0 || self.issued_bytes < self.spec.bytes_per_activation
    }

    fn alloc_txn(&mut self) -> TxnId {
        self.next_seq += 1;
        TxnId(((self.id as u64 + 1) << ID_SHIFT) | self.next_seq)
    }

    fn descriptor(&self, id: TxnId, t: &Track) -> TxnDescriptor {
        TxnDescriptor {
            id,
            direction: t.direction,
            tid: t.tid,
            addr: t.addr,
            len_beats: t.len,
            beat_bytes: self.spec.beat_bytes,
            burst: self.spec.burst,
            manager_id: self.id,
            issue_cycle: t.presented.unwrap_or(0),
        }
    }

    fn enqueue(&mut self, job: u64, direction: Direction, addr: u64, len: u16, tid: Tid, cycle: u64) {
        let id = self.alloc_txn();
        let q = if direction == Direction::Read { &mut self.ar_q } else { &mut self.aw_q };
        let presented = q.is_empty().then_some(cycle + 1);
        q.push_back(id);
        self.txns.insert(id, Track { job, direction, len, addr, tid, presented, beats_seen: 0, resp: Resp::Okay });
        if direction == Direction::Write {
            let next_ready = presented.map(|p| p + self.spec.w_delay);
            self.w_q.push_back(WStream { txn: id, len, sent: 0, next_ready });
        }
    }

    fn wrap(&self, base: u64, offset: u64) -> u64 {
        base + offset % self.spec.region_bytes.max(self.spec.job_bytes())
    }

    fn maybe_start_activation(&mut self, cycle: u64) {
        if !self.enabled || cycle + 1 < self.spec.start_cycle {
            return;
        }
        let n = self.stats.activations.len() as u64;
        if self.spec.max_activations.is_some_and(|m| n >= m) {
            return;
        }
        let prev_done = match self.stats.activations.last() {
            None => true,
            Some(a) => a.end.is_some(),
        };
        if !prev_done {
            return;
        }
        let window = self.spec.start_cycle + n * self.spec.activation_period;
        // activations become visible on the next cycle
        let start = window.max(cycle + 1);
        if self.spec.activation_period > 0 && window > cycle + 1 {
            return;
        }
        self.stats.activations.push(Activation { start, end: None });
        self.issued_bytes = 0;
    }

    fn spawn_jobs(&mut self, cycle: u64) {
        let Some(act) = self.current_activation() else { return };
        if !self.enabled || self.stats.activations[act].end.is_some() {
            return;
        }
        while self.jobs.len() < self.spec.max_outstanding && self.activation_quota_left() {
            let job = self.next_job;
            self.next_job += 1;
            let tid = Tid(self.spec.tid + (job % u64::from(self.spec.num_tids.max(1))) as u16);
            let len = self.spec.txn_len_beats;
            let bytes = self.spec.job_bytes();
            let total_off = job * bytes;
            let read_addr = self.wrap(self.spec.read_base, total_off);
            let write_addr = self.wrap(self.spec.write_base, total_off);
            self.jobs.insert(job, Job { activation: act, write_addr, tid, bytes });
            *self.inflight_by_act.entry(act).or_default() += 1;
            match self.spec.mix {
                Mix::Read | Mix::Copy => self.enqueue(job, Direction::Read, read_addr, len, tid, cycle),
                Mix::Write => self.enqueue(job, Direction::Write, write_addr, len, tid, cycle),
            }
            self.issued_bytes += bytes;
        }
    }

    fn finish_job(&mut self, job: u64, cycle: u64) {
        let Some(j) = self.jobs.remove(&job) else { return };
        self.stats.bytes_completed += j.bytes;
        let left = self.inflight_by_act.entry(j.activation).or_default();
        *left -= 1;
        let drained = *left == 0;
        let quota_done = !self.activation_quota_left() || !self.enabled;
        if drained && quota_done && j.activation + 1 == self.stats.activations.len() {
            self.stats.activations[j.activation].end = Some(cycle);
        }
    }

    fn complete_txn(&mut self, id: TxnId, cycle: u64) {
        let t = self.txns.remove(&id).expect("response for tracked transaction");
        let issued = t.presented.unwrap_or(cycle);
        let lat = cycle - issued;
        self.stats.txns_completed += 1;
        self.stats.lat_sum += lat;
        self.stats.lat_max = self.stats.lat_max.max(lat);
        self.stats.latencies.push((issued, lat));
        self.stats.last_completion = Some(cycle);
        if t.resp != Resp::Okay {
            self.stats.errors += 1;
            if self.spec.retry_errors {
                self.retry.push_back((t.direction, t.addr, t.len, t.tid, t.job));
                return;
            }
        }
        if t.direction == Direction::Read && self.spec.mix == Mix::Copy {
            let j = self.jobs[&t.job];
            self.enqueue(t.job, Direction::Write, j.write_addr, t.len, j.tid, cycle);
        } else {
            self.finish_job(t.job, cycle);
        }
    }

    fn retry_allowed(&self, cycle: u64) -> bool {
        match &self.irq {
            None => true,
            Some(l) => l.raised_at().is_none() && self.stats.notified_at.is_some_and(|n| n <= cycle),
        }
    }

    fn service_irq(&mut self, cycle: u64) {
        let Some(l) = &self.irq else { return };
        if let Some(raised) = l.raised_at() {
            let notify = raised + self.spec.reaction_latency;
            if self.stats.notified_at.is_none_or(|n| n < raised) {
                self.stats.notified_at = Some(notify);
            }
            if cycle >= notify {
                l.clear();
            }
        }
    }

    fn pop_head(&mut self, read: bool, cycle: u64) {
        let q = if read { &mut self.ar_q } else { &mut self.aw_q };
        q.pop_front();
        if let Some(&next) = q.front() {
            let t = self.txns.get_mut(&next).expect("queued transaction tracked");
            t.presented = Some(cycle + 1);
            if !read {
                let delay = self.spec.w_delay;
                if let Some(w) = self.w_q.iter_mut().find(|w| w.txn == next) {
                    w.next_ready = Some(cycle + 1 + delay);
                }
            }
        }
    }
}

impl Component for Manager {
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&self, io: &mut Io) {
        let cycle = io.cycle();
        let ar = self.ar_q.front().map(|id| ChannelBeat::addr(self.descriptor(*id, &self.txns[id])));
        let aw = self.aw_q.front().map(|id| ChannelBeat::addr(self.descriptor(*id, &self.txns[id])));
        io.drive(self.ports.ar, ar);
        io.drive(self.ports.aw, aw);
        let w = self.w_q.front().and_then(|w| {
            w.next_ready
                .filter(|r| *r <= cycle)
                .map(|_| ChannelBeat::w(w.txn, self.id, w.sent, w.sent + 1 == w.len))
        });
        io.drive(self.ports.w, w);
        io.set_ready(self.ports.r, true);
        io.set_ready(self.ports.b, true);
    }

    fn commit(&mut self, io: &mut Io) {
        let cycle = io.cycle();
        if io.fired(self.ports.ar) {
            if self.stats.first_issue.is_none() {
                self.stats.first_issue = self.ar_q.front().and_then(|id| self.txns[id].presented);
            }
            self.pop_head(true, cycle);
        }
        if io.fired(self.ports.aw) {
            if self.stats.first_issue.is_none() {
                self.stats.first_issue = self.aw_q.front().and_then(|id| self.txns[id].presented);
            }
            self.pop_head(false, cycle);
        }
        if io.fired(self.ports.w) {
            let interval = self.spec.w_interval.max(1);
            let w = self.w_q.front_mut().expect("W fired from stream");
            w.sent += 1;
            w.next_ready = Some(cycle + interval);
            if w.sent == w.len {
                self.w_q.pop_front();
            }
        }
        if let Some(b) = io.transfer(self.ports.r).copied() {
            if let Some(t) = self.txns.get_mut(&b.txn) {
                t.beats_seen += 1;
                t.resp = t.resp.merge(b.resp.unwrap_or(Resp::Okay));
                if b.is_last {
                    self.complete_txn(b.txn, cycle);
                }
            }
        }
        if let Some(b) = io.transfer(self.ports.b).copied() {
            if let Some(t) = self.txns.get_mut(&b.txn) {
                t.resp = t.resp.merge(b.resp.unwrap_or(Resp::Okay));
                self.complete_txn(b.txn, cycle);
            }
        }
        self.service_irq(cycle);
        if self.retry_allowed(cycle) {
            while let Some((dir, addr, len, tid, job)) = self.retry.pop_front() {
                self.enqueue(job, dir, addr, len, tid, cycle);
            }
        }
        self.maybe_start_activation(cycle);
        self.spawn_jobs(cycle);
    }
}
