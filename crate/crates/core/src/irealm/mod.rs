//! Ingress regulation unit placed between one manager and the crossbar.
//!
//! Request path: splitter, then (writes) the write buffer, then the
//! regulation gate that checks isolation, the outstanding cap and the
//! region budget before a fragment leaves. Responses flow back through
//! combinational R-last gating and B coalescing. A bypassed unit is a set
//! of wires.

pub mod regulation;
pub mod splitter;
pub mod write_buffer;

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{ChannelBeat, Direction, Resp, Tid, TxnDescriptor, TxnId};
use crate::simkernel::{AxiMgrPorts, AxiSubPorts, Component, Io, Sim};

pub use regulation::{BudgetState, ProbeStats, RegionConfig};
use regulation::{account_beat, decode_region, renew_period, throttled_cap, update_throttle, validate_regions, RegionError};
use splitter::{can_split, fragment, fragment_count, needs_split};
use write_buffer::{check_depth, BufferTooSmall, WFrag, WriteBuffer};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IrealmConfig {
    pub regions: Vec<RegionConfig>,
    /// Fragment size for addresses outside every region.
    pub default_fragment_beats: u16,
    /// Fragments in flight downstream before throttling.
    pub num_pending: usize,
    pub write_buffer: bool,
    pub buffer_depth_beats: u16,
    pub throttle: bool,
    pub bypass: bool,
}

impl Default for IrealmConfig {
    fn default() -> Self {
        IrealmConfig {
            regions: Vec::new(),
            default_fragment_beats: 256,
            num_pending: 16,
            write_buffer: true,
            buffer_depth_beats: 256,
            throttle: true,
            bypass: true,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IrealmError {
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Buffer(#[from] BufferTooSmall),
    #[error("default fragment size outside 1..=256")]
    DefaultFragment,
    #[error("num_pending must be positive")]
    NumPending,
}

impl IrealmConfig {
    pub fn validate(&self) -> Result<(), IrealmError> {
        validate_regions(&self.regions)?;
        if !(1..=256).contains(&self.default_fragment_beats) {
            return Err(IrealmError::DefaultFragment);
        }
        if self.num_pending == 0 {
            return Err(IrealmError::NumPending);
        }
        if self.write_buffer {
            check_depth(self.default_fragment_beats, self.buffer_depth_beats)?;
            for r in &self.regions {
                check_depth(r.fragment_beats, self.buffer_depth_beats)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct ReadOrig {
    id: TxnId,
    len: u16,
    returned: u16,
    region: Option<usize>,
    first_fwd: u64,
}

#[derive(Debug, Clone, Copy)]
struct WriteOrig {
    id: TxnId,
    nfrags: u16,
    got: u16,
    resp: Resp,
    region: Option<usize>,
    first_fwd: Option<u64>,
}

/// Cumulative unit counters.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IrealmStats {
    pub isolated_cycles: u64,
    pub rejected: u64,
    pub renewals: u64,
    /// Per region: beats debited in each completed period.
    pub period_usage: Vec<Vec<u64>>,
}

pub struct IrealmUnit {
    name: String,
    cfg: IrealmConfig,
    up: AxiSubPorts,
    down: AxiMgrPorts,
    bypass: bool,
    pending_bypass: Option<bool>,
    force_isolate: bool,
    activated_at: u64,
    budgets: Vec<BudgetState>,
    used_this_period: Vec<u64>,
    /// One per region plus the default region last.
    probes: Vec<ProbeStats>,
    /// Upstream request accepted with its first fragment; the rest follow
    /// from here.
    ar_split: Option<(TxnDescriptor, u16)>,
    aw_split: Option<(TxnDescriptor, u16)>,
    ar_sticky: bool,
    aw_sticky: bool,
    outstanding: usize,
    reads: HashMap<Tid, VecDeque<ReadOrig>>,
    writes: HashMap<Tid, VecDeque<WriteOrig>>,
    wb: WriteBuffer,
    err_r: VecDeque<(TxnDescriptor, u16)>,
    err_b: VecDeque<TxnDescriptor>,
    bypass_inflight: i64,
    stats: IrealmStats,
}

impl IrealmUnit {
    pub fn new(sim: &mut Sim, name: &str, cfg: IrealmConfig) -> Result<Self, IrealmError> {
        cfg.validate()?;
        let n = cfg.regions.len();
        Ok(IrealmUnit {
            name: name.to_string(),
            up: sim.axi_sub_ports(name),
            down: sim.axi_mgr_ports(name),
            bypass: cfg.bypass,
            pending_bypass: None,
            force_isolate: false,
            activated_at: 0,
            budgets: cfg.regions.iter().map(BudgetState::fresh).collect(),
            used_this_period: vec![0; n],
            probes: vec![ProbeStats::default(); n + 1],
            ar_split: None,
            aw_split: None,
            ar_sticky: false,
            aw_sticky: false,
            outstanding: 0,
            reads: HashMap::new(),
            writes: HashMap::new(),
            wb: WriteBuffer::new(cfg.buffer_depth_beats),
            err_r: VecDeque::new(),
            err_b: VecDeque::new(),
            bypass_inflight: 0,
            stats: IrealmStats { period_usage: vec![Vec::new(); n], ..Default::default() },
            cfg,
        })
    }

    pub fn up_ports(&self) -> &AxiSubPorts {
        &self.up
    }

    pub fn down_ports(&self) -> &AxiMgrPorts {
        &self.down
    }

    pub fn config(&self) -> &IrealmConfig {
        &self.cfg
    }

    pub fn is_bypassed(&self) -> bool {
        self.bypass
    }

    pub fn budgets(&self) -> &[BudgetState] {
        &self.budgets
    }

    pub fn probes(&self) -> &[ProbeStats] {
        &self.probes
    }

    pub fn stats(&self) -> &IrealmStats {
        &self.stats
    }

    /// First cycle of the free-running period counters.
    pub fn activated_at(&self) -> u64 {
        self.activated_at
    }

    pub fn outstanding(&self) -> usize {
        self.outstanding
    }

    /// Requests a bypass change; it takes effect once the unit is idle.
    pub fn set_bypass(&mut self, on: bool) {
        self.pending_bypass = (on != self.bypass).then_some(on);
    }

    pub fn set_force_isolate(&mut self, on: bool) {
        self.force_isolate = on;
    }

    /// Replaces the region table; budgets restart full.
    pub fn set_config(&mut self, cfg: IrealmConfig) -> Result<(), IrealmError> {
        cfg.validate()?;
        let n = cfg.regions.len();
        self.budgets = cfg.regions.iter().map(BudgetState::fresh).collect();
        self.used_this_period = vec![0; n];
        self.probes.resize(n + 1, ProbeStats::default());
        self.stats.period_usage.resize(n, Vec::new());
        self.wb.depth_beats = cfg.buffer_depth_beats;
        if cfg.bypass != self.bypass {
            self.pending_bypass = Some(cfg.bypass);
        }
        self.cfg = cfg;
        Ok(())
    }

    pub fn is_isolated(&self) -> bool {
        self.force_isolate || self.pending_bypass.is_some() || self.budgets.iter().any(BudgetState::depleted)
    }

    fn idle(&self) -> bool {
        if self.bypass {
            self.bypass_inflight == 0
        } else {
            self.outstanding == 0
                && self.ar_split.is_none()
                && self.aw_split.is_none()
                && self.wb.is_empty()
                && self.err_r.is_empty()
                && self.err_b.is_empty()
                && self.reads.values().all(VecDeque::is_empty)
                && self.writes.values().all(VecDeque::is_empty)
        }
    }

    fn cap(&self) -> usize {
        let level = if self.cfg.throttle { self.budgets.iter().map(|b| b.throttle_level).max().unwrap_or(0) } else { 0 };
        throttled_cap(self.cfg.num_pending, level)
    }

    fn params(&self, d: &TxnDescriptor) -> (u16, Option<usize>) {
        let region = decode_region(d.addr, &self.cfg.regions);
        let g = region.map_or(self.cfg.default_fragment_beats, |r| self.cfg.regions[r].fragment_beats);
        (g, region)
    }

    fn rejected(d: &TxnDescriptor, g: u16) -> bool {
        needs_split(d, g) && !can_split(d)
    }

    fn probe_idx(&self, region: Option<usize>) -> usize {
        region.unwrap_or(self.cfg.regions.len())
    }

    /// Regulation gate for a fragment of `len` beats in `region`, given
    /// what has already been claimed this cycle.
    fn gate(&self, sticky: bool, len: u16, region: Option<usize>, claimed: &Claimed) -> bool {
        if sticky {
            return true;
        }
        if self.is_isolated() || self.outstanding + claimed.txns >= self.cap() {
            return false;
        }
        match region {
            None => true,
            Some(r) => {
                let already: u64 = claimed.beats.iter().filter(|(x, _)| *x == r).map(|(_, b)| b).sum();
                self.budgets[r].remaining_beats >= u64::from(len) + already
            }
        }
    }

    fn tid_busy(&self, dir: Direction, tid: Tid) -> bool {
        match dir {
            Direction::Read => self.reads.get(&tid).is_some_and(|q| !q.is_empty()),
            Direction::Write => self.writes.get(&tid).is_some_and(|q| !q.is_empty()),
        }
    }

    fn err_write_pending(&self) -> bool {
        !self.err_b.is_empty() || self.wb_has_sink()
    }

    fn wb_has_sink(&self) -> bool {
        self.wb.w_target().is_some_and(|f| f.sink)
    }

    /// Current AR fragment to present downstream, if any.
    fn ar_candidate(&self, io: &Io) -> Option<(TxnDescriptor, TxnDescriptor, u16, u16, Option<usize>)> {
        let (d, idx) = match self.ar_split {
            Some(held) => held,
            None => (io.peek(self.up.ar)?.desc?, 0),
        };
        let (g, region) = self.params(&d);
        if Self::rejected(&d, g) {
            return None;
        }
        Some((d, fragment(&d, g, idx), idx, fragment_count(d.len_beats, g).max(1), region))
    }

    /// AW fragment to admit from upstream this cycle, if any.
    fn aw_candidate(&self, io: &Io) -> Option<(TxnDescriptor, TxnDescriptor, u16, u16, Option<usize>)> {
        let (d, idx) = match self.aw_split {
            Some(held) => held,
            None => (io.peek(self.up.aw)?.desc?, 0),
        };
        let (g, region) = self.params(&d);
        if Self::rejected(&d, g) {
            return None;
        }
        Some((d, fragment(&d, g, idx), idx, fragment_count(d.len_beats, g).max(1), region))
    }

    fn up_reject_ready(&self, io: &Io, ch: Direction) -> bool {
        let port = if ch == Direction::Read { self.up.ar } else { self.up.aw };
        let Some(d) = io.peek(port).and_then(|b| b.desc) else { return false };
        let (g, _) = self.params(&d);
        let held = if ch == Direction::Read { self.ar_split.is_some() } else { self.aw_split.is_some() };
        if held || !Self::rejected(&d, g) || self.pending_bypass.is_some() {
            return false;
        }
        match ch {
            Direction::Read => self.err_r.is_empty() && !self.tid_busy(Direction::Read, d.tid),
            Direction::Write => !self.err_write_pending() && !self.tid_busy(Direction::Write, d.tid) && self.wb.is_empty(),
        }
    }

    fn eval_bypass(&self, io: &mut Io) {
        let (u, d) = (self.up, self.down);
        for (i, o) in [(u.ar, d.ar), (u.aw, d.aw), (u.w, d.w)] {
            let b = io.peek(i).copied();
            io.drive(o, b);
            let r = io.ready(o);
            io.set_ready(i, r);
        }
        for (i, o) in [(d.r, u.r), (d.b, u.b)] {
            let b = io.peek(i).copied();
            io.drive(o, b);
            let r = io.ready(o);
            io.set_ready(i, r);
        }
    }

    fn frag_beat(frag: &TxnDescriptor) -> ChannelBeat {
        let mut b = ChannelBeat::addr(*frag);
        b.manager = frag.manager_id;
        b
    }
}

#[derive(Default)]
struct Claimed {
    txns: usize,
    beats: Vec<(usize, u64)>,
}

impl Claimed {
    fn add(&mut self, region: Option<usize>, len: u16) {
        self.txns += 1;
        if let Some(r) = region {
            self.beats.push((r, u64::from(len)));
        }
    }
}

impl Component for IrealmUnit {
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&self, io: &mut Io) {
        if self.bypass {
            self.eval_bypass(io);
            return;
        }
        let (up, down) = (self.up, self.down);
        let mut claimed = Claimed::default();
        // an AW still waiting downstream has already passed the gate
        if self.aw_sticky {
            let held = if self.cfg.write_buffer { self.wb.forwardable().map(|f| f.desc) } else { self.aw_candidate(io).map(|c| c.1) };
            if let Some(f) = held {
                claimed.add(self.params(&f).1, f.len_beats);
            }
        }

        // AR: first fragment passes through in the same cycle
        let mut ar_out = None;
        let mut up_ar_ready = self.up_reject_ready(io, Direction::Read);
        if let Some((_, f, idx, _, region)) = self.ar_candidate(io) {
            let ok = self.err_r.is_empty() && self.gate(self.ar_sticky, f.len_beats, region, &claimed);
            if ok {
                ar_out = Some(Self::frag_beat(&f));
                claimed.add(region, f.len_beats);
                up_ar_ready = io.ready(down.ar) && idx == 0;
            }
        }
        io.drive(down.ar, ar_out);
        io.set_ready(up.ar, up_ar_ready);

        // AW into the buffer (or straight through when unbuffered)
        let mut aw_out = None;
        let mut up_aw_ready = self.up_reject_ready(io, Direction::Write);
        let mut admitting: Option<TxnDescriptor> = None;
        let no_err = !self.err_write_pending();
        if self.cfg.write_buffer {
            if let Some((_, f, idx, _, _)) = self.aw_candidate(io) {
                if no_err && !self.is_isolated() && self.wb.can_admit_aw() {
                    admitting = Some(f);
                    up_aw_ready = idx == 0;
                }
            }
            if let Some(wf) = self.wb.forwardable() {
                let (_, region) = self.params(&wf.desc);
                if self.gate(self.aw_sticky, wf.desc.len_beats, region, &claimed) {
                    let mut b = ChannelBeat::addr(wf.desc);
                    b.manager = wf.desc.manager_id;
                    aw_out = Some(b);
                }
            }
        } else if let Some((_, f, idx, _, region)) = self.aw_candidate(io) {
            if no_err && self.gate(self.aw_sticky, f.len_beats, region, &claimed) {
                aw_out = Some(Self::frag_beat(&f));
                up_aw_ready = io.ready(down.aw) && idx == 0;
                if io.ready(down.aw) {
                    admitting = Some(f);
                }
            }
        }
        io.drive(down.aw, aw_out);
        io.set_ready(up.aw, up_aw_ready);
        let aw_fires = aw_out.is_some() && io.ready(down.aw);

        // W
        let target: Option<WFrag> = self.wb.w_target().copied().or_else(|| {
            admitting.map(|desc| WFrag { desc, w_in: 0, w_out: 0, forwarded: !self.cfg.write_buffer, sink: false })
        });
        let up_w = io.peek(up.w).copied();
        if self.cfg.write_buffer {
            let out = self.wb.w_out(aw_fires);
            io.drive(down.w, out);
            let leaving = usize::from(out.is_some() && io.ready(down.w));
            let ready = match target {
                Some(t) if t.sink => true,
                Some(_) => self.wb.has_space(leaving),
                None => false,
            };
            io.set_ready(up.w, ready);
        } else {
            match (target, up_w) {
                (Some(t), _) if t.sink => {
                    io.drive(down.w, None);
                    io.set_ready(up.w, true);
                }
                (Some(t), Some(b)) if t.forwarded => {
                    io.drive(down.w, Some(WriteBuffer::retag(&t, b)));
                    let r = io.ready(down.w);
                    io.set_ready(up.w, r);
                }
                _ => {
                    io.drive(down.w, None);
                    io.set_ready(up.w, false);
                }
            }
        }

        // R with last gating
        let r_out = match io.peek(down.r).copied() {
            Some(b) => {
                let orig = b.tid.and_then(|t| self.reads.get(&t)).and_then(|q| q.front());
                Some(match orig {
                    Some(o) => {
                        let mut x = b;
                        x.txn = o.id;
                        x.beat_index = o.returned;
                        x.is_last = o.returned + 1 == o.len;
                        x
                    }
                    None => b,
                })
            }
            None => self.err_r.front().map(|(d, sent)| {
                ChannelBeat::r(d.id, d.tid, d.manager_id, *sent, *sent + 1 == d.len_beats, Resp::SlvErr)
            }),
        };
        io.drive(up.r, r_out);
        let r = io.ready(up.r);
        io.set_ready(down.r, r);

        // B coalescing
        let (b_out, absorb) = match io.peek(down.b).copied() {
            Some(b) => {
                let orig = b.tid.and_then(|t| self.writes.get(&t)).and_then(|q| q.front());
                match orig {
                    Some(o) if o.got + 1 < o.nfrags => (None, true),
                    Some(o) => {
                        let mut x = b;
                        x.txn = o.id;
                        x.resp = Some(o.resp.merge(b.resp.unwrap_or(Resp::Okay)));
                        (Some(x), false)
                    }
                    None => (Some(b), false),
                }
            }
            None => (self.err_b.front().map(|d| ChannelBeat::b(d.id, d.tid, d.manager_id, Resp::SlvErr)), false),
        };
        io.drive(up.b, b_out);
        let r = absorb || io.ready(up.b);
        io.set_ready(down.b, r);
    }

    fn commit(&mut self, io: &mut Io) {
        let cycle = io.cycle();
        let (up, down) = (self.up, self.down);
        if self.bypass {
            for p in [down.ar, down.aw] {
                if io.fired(p) {
                    self.bypass_inflight += 1;
                }
            }
            if io.transfer(down.r).is_some_and(|b| b.is_last) {
                self.bypass_inflight -= 1;
            }
            if io.fired(down.b) {
                self.bypass_inflight -= 1;
            }
            self.switch_mode(cycle);
            return;
        }
        if self.is_isolated() {
            self.stats.isolated_cycles += 1;
        }

        // decisions taken from this cycle's settled signals
        let ar_cand = self.ar_candidate(io);
        let aw_cand = self.aw_candidate(io);
        let aw_fwd_desc = if self.cfg.write_buffer { self.wb.forwardable().map(|f| f.desc) } else { None };
        let buffer_admit = self.cfg.write_buffer
            && aw_cand.is_some()
            && !self.err_write_pending()
            && !self.is_isolated()
            && self.wb.can_admit_aw();

        // AR
        if io.fired(down.ar) {
            let (d, f, idx, n, region) = ar_cand.expect("forwarded AR has a candidate");
            self.forwarded(&f, region, cycle);
            if idx == 0 {
                self.reads.entry(d.tid).or_default().push_back(ReadOrig {
                    id: d.id,
                    len: d.len_beats,
                    returned: 0,
                    region,
                    first_fwd: cycle,
                });
            }
            self.ar_split = (idx + 1 < n).then_some((d, idx + 1));
        } else if io.fired(up.ar) {
            let d = io.peek(up.ar).and_then(|b| b.desc).expect("AR descriptor");
            self.err_r.push_back((d, 0));
            self.stats.rejected += 1;
        }
        self.ar_sticky = io.peek(down.ar).is_some() && !io.fired(down.ar);

        // AW admission
        if self.cfg.write_buffer {
            if buffer_admit {
                let (d, f, idx, n, region) = aw_cand.expect("admission has a candidate");
                self.wb.admit_aw(f);
                if idx == 0 {
                    self.writes.entry(d.tid).or_default().push_back(WriteOrig {
                        id: d.id,
                        nfrags: n,
                        got: 0,
                        resp: Resp::Okay,
                        region,
                        first_fwd: None,
                    });
                }
                self.aw_split = (idx + 1 < n).then_some((d, idx + 1));
            }
            if io.fired(down.aw) {
                let f = aw_fwd_desc.expect("forwarded AW was forwardable");
                let (_, region) = self.params(&f);
                self.wb.mark_forwarded();
                self.forwarded(&f, region, cycle);
                self.mark_write_forwarded(&f, cycle);
            }
        } else if io.fired(down.aw) {
            let (d, f, idx, n, region) = aw_cand.expect("forwarded AW has a candidate");
            self.wb.admit_forwarded(f);
            self.forwarded(&f, region, cycle);
            if idx == 0 {
                self.writes.entry(d.tid).or_default().push_back(WriteOrig {
                    id: d.id,
                    nfrags: n,
                    got: 0,
                    resp: Resp::Okay,
                    region,
                    first_fwd: Some(cycle),
                });
            }
            self.aw_split = (idx + 1 < n).then_some((d, idx + 1));
        }
        if io.fired(up.aw) && aw_cand.is_none() {
            let d = io.peek(up.aw).and_then(|b| b.desc).expect("AW descriptor");
            self.wb.admit_sink(d);
            self.stats.rejected += 1;
        }
        self.aw_sticky = io.peek(down.aw).is_some() && !io.fired(down.aw);

        // W
        if self.cfg.write_buffer {
            if io.fired(down.w) {
                self.wb.pop_w_out();
            }
            if io.fired(up.w) {
                let sink = self.wb.w_target().is_some_and(|f| f.sink);
                if sink {
                    if let Some(done) = self.wb.consume_w() {
                        self.err_b.push_back(done.desc);
                    }
                } else {
                    let b = *io.peek(up.w).expect("fired");
                    self.wb.push_w(b);
                }
            }
        } else if io.fired(up.w) {
            if let Some(done) = self.wb.consume_w() {
                if done.sink {
                    self.err_b.push_back(done.desc);
                }
            }
        }

        // R
        if let Some(b) = io.transfer(down.r).copied() {
            let tid = b.tid.expect("R carries TID");
            if b.is_last {
                self.outstanding -= 1;
            }
            if let Some(q) = self.reads.get_mut(&tid) {
                let o = q.front_mut().expect("read tracked");
                o.returned += 1;
                if o.returned == o.len {
                    let o = q.pop_front().expect("front");
                    let p = self.probe_idx(o.region);
                    self.probes[p].complete(cycle - o.first_fwd);
                }
            }
        } else if io.fired(up.r) {
            let (d, sent) = self.err_r.front_mut().expect("error read");
            *sent += 1;
            if *sent == d.len_beats {
                self.err_r.pop_front();
            }
        }

        // B
        if let Some(b) = io.transfer(down.b).copied() {
            let tid = b.tid.expect("B carries TID");
            self.outstanding -= 1;
            if let Some(q) = self.writes.get_mut(&tid) {
                let o = q.front_mut().expect("write tracked");
                o.got += 1;
                o.resp = o.resp.merge(b.resp.unwrap_or(Resp::Okay));
                if o.got == o.nfrags {
                    let o = q.pop_front().expect("front");
                    let p = self.probe_idx(o.region);
                    self.probes[p].complete(cycle - o.first_fwd.unwrap_or(cycle));
                }
            }
        } else if io.fired(up.b) {
            self.err_b.pop_front();
        }

        self.tick_periods();
        self.switch_mode(cycle);
    }
}

impl IrealmUnit {
    fn forwarded(&mut self, f: &TxnDescriptor, region: Option<usize>, _cycle: u64) {
        self.outstanding += 1;
        let beats = u64::from(f.len_beats);
        if let Some(r) = region {
            account_beat(&mut self.budgets[r], beats);
            self.used_this_period[r] += beats;
        }
        let p = self.probe_idx(region);
        self.probes[p].forward(beats, u64::from(f.beat_bytes));
    }

    fn mark_write_forwarded(&mut self, f: &TxnDescriptor, cycle: u64) {
        let parent = f.id.parent();
        if let Some(o) = self
            .writes
            .get_mut(&f.tid)
            .and_then(|q| q.iter_mut().find(|o| o.id == parent || o.id == f.id))
        {
            o.first_fwd.get_or_insert(cycle);
        }
    }

    fn tick_periods(&mut self) {
        for (r, cfg) in self.cfg.regions.iter().enumerate() {
            let st = &mut self.budgets[r];
            if renew_period(st, cfg) {
                self.stats.renewals += 1;
                self.stats.period_usage[r].push(self.used_this_period[r]);
                self.used_this_period[r] = 0;
            } else if self.cfg.throttle {
                update_throttle(st, cfg);
            }
        }
    }

    fn switch_mode(&mut self, cycle: u64) {
        let Some(target) = self.pending_bypass else { return };
        if !self.idle() {
            return;
        }
        self.bypass = target;
        self.pending_bypass = None;
        self.bypass_inflight = 0;
        if !target {
            self.activated_at = cycle + 1;
            self.budgets = self.cfg.regions.iter().map(BudgetState::fresh).collect();
            self.used_this_period = vec![0; self.cfg.regions.len()];
        }
    }
}
