//! Two-phase cycle engine.
//!
//! Each cycle runs in a fixed order:
//! 1. clear all link signals,
//! 2. call [`Component::evaluate`] on every component in registration order,
//!    repeating until no signal changes (bounded),
//! 3. check valid/ready stability against the previous cycle,
//! 4. append one trace record per fired link,
//! 5. call [`Component::commit`] on every component in registration order.
//!
//! `evaluate` takes `&self`, so combinational logic cannot mutate state.

use std::any::Any;
use std::cell::Cell;
use std::rc::Rc;

use thiserror::Error;

use crate::protocol::{Channel, ChannelBeat, TraceRecord};

/// Upper bound on settle iterations before a combinational loop is reported.
pub const MAX_SETTLE_ITERATIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CompId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PortDir {
    Out,
    In,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("channel mismatch: {src} -> {dst}")]
    ChannelMismatch { src: Channel, dst: Channel },
    #[error("direction mismatch: connect expects OUT -> IN")]
    DirectionMismatch,
    #[error("port {0:?} is already connected")]
    AlreadyConnected(PortId),
    #[error("combinational loop: no convergence after {0} iterations")]
    CombinationalLoop(usize),
    #[error("handshake stability violated on {link} at cycle {cycle}")]
    HandshakeViolation { link: String, cycle: u64 },
}

#[derive(Debug, Clone)]
struct PortInfo {
    owner: String,
    channel: Channel,
    dir: PortDir,
    link: Option<usize>,
}

#[derive(Debug, Clone, Default)]
struct LinkSig {
    payload: Option<ChannelBeat>,
    ready: bool,
}

#[derive(Debug, Clone)]
struct Link {
    label: String,
    owner: String,
    peer: String,
    /// Beat presented but not accepted on the previous cycle.
    pending: Option<ChannelBeat>,
    /// Set by [`Io::abort`]: the next cycle may drop `pending`.
    aborted: bool,
}

/// Signal view handed to components during evaluate and commit.
pub struct Io {
    ports: Vec<PortInfo>,
    sigs: Vec<LinkSig>,
    aborts: Vec<usize>,
    changed: bool,
    cycle: u64,
}

impl Io {
    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    fn link(&self, port: PortId) -> Option<usize> {
        self.ports[port.0].link
    }

    /// Presents `beat` (or nothing) on an OUT port.
    pub fn drive(&mut self, port: PortId, beat: Option<ChannelBeat>) {
        debug_assert_eq!(self.ports[port.0].dir, PortDir::Out);
        if let Some(l) = self.link(port) {
            if self.sigs[l].payload != beat {
                self.sigs[l].payload = beat;
                self.changed = true;
            }
        }
    }

    /// Drives ready on an IN port.
    pub fn set_ready(&mut self, port: PortId, ready: bool) {
        debug_assert_eq!(self.ports[port.0].dir, PortDir::In);
        if let Some(l) = self.link(port) {
            if self.sigs[l].ready != ready {
                self.sigs[l].ready = ready;
                self.changed = true;
            }
        }
    }

    /// Beat currently presented on the link behind `port`.
    pub fn peek(&self, port: PortId) -> Option<&ChannelBeat> {
        self.link(port).and_then(|l| self.sigs[l].payload.as_ref())
    }

    /// Ready currently driven toward an OUT port.
    pub fn ready(&self, port: PortId) -> bool {
        self.link(port).is_some_and(|l| self.sigs[l].ready)
    }

    /// Whether the link behind `port` transfers this cycle.
    pub fn fired(&self, port: PortId) -> bool {
        self.link(port).is_some_and(|l| self.sigs[l].ready && self.sigs[l].payload.is_some())
    }

    /// The beat transferred on `port` this cycle, if any.
    pub fn transfer(&self, port: PortId) -> Option<&ChannelBeat> {
        if self.fired(port) {
            self.peek(port)
        } else {
            None
        }
    }

    /// Marks an OUT port as reset: a beat left pending there may be dropped
    /// next cycle without a stability violation.
    pub fn abort(&mut self, port: PortId) {
        if let Some(l) = self.link(port) {
            self.aborts.push(l);
        }
    }
}

pub trait Component: Any {
    fn name(&self) -> &str;
    /// Combinational phase. Must depend only on registered state and `io`.
    fn evaluate(&self, io: &mut Io);
    /// Sequential phase. `io` holds the settled signals of this cycle.
    fn commit(&mut self, io: &mut Io);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    /// Predicate held after `cycles` steps.
    Done { cycles: u64 },
    /// Cap reached without the predicate holding.
    Timeout { cycles: u64 },
}

impl RunOutcome {
    pub fn is_timeout(&self) -> bool {
        matches!(self, RunOutcome::Timeout { .. })
    }
}

pub struct Sim {
    comps: Vec<Box<dyn Component>>,
    links: Vec<Link>,
    io: Io,
    trace: Vec<TraceRecord>,
    trace_enabled: bool,
    occupancy: Option<Vec<String>>,
}

impl Default for Sim {
    fn default() -> Self {
        Self::new()
    }
}

impl Sim {
    pub fn new() -> Self {
        Sim {
            comps: Vec::new(),
            links: Vec::new(),
            io: Io { ports: Vec::new(), sigs: Vec::new(), aborts: Vec::new(), changed: false, cycle: 0 },
            trace: Vec::new(),
            trace_enabled: true,
            occupancy: None,
        }
    }

    pub fn cycle(&self) -> u64 {
        self.io.cycle
    }

    pub fn set_trace(&mut self, enabled: bool) {
        self.trace_enabled = enabled;
    }

    /// Enables the per-cycle `cycle,link,valid,ready` dump.
    pub fn enable_occupancy_dump(&mut self) {
        self.occupancy = Some(Vec::new());
    }

    pub fn occupancy_dump(&self) -> &[String] {
        self.occupancy.as_deref().unwrap_or(&[])
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    /// Records on links driven by or driving into `component`.
    pub fn trace_of<'a>(&'a self, component: &'a str) -> impl Iterator<Item = &'a TraceRecord> + 'a {
        self.trace.iter().filter(move |r| r.component == component || r.peer == component)
    }

    pub fn take_trace(&mut self) -> Vec<TraceRecord> {
        std::mem::take(&mut self.trace)
    }

    fn port(&mut self, owner: &str, channel: Channel, dir: PortDir) -> PortId {
        self.io.ports.push(PortInfo { owner: owner.to_string(), channel, dir, link: None });
        PortId(self.io.ports.len() - 1)
    }

    pub fn out_port(&mut self, owner: &str, channel: Channel) -> PortId {
        self.port(owner, channel, PortDir::Out)
    }

    pub fn in_port(&mut self, owner: &str, channel: Channel) -> PortId {
        self.port(owner, channel, PortDir::In)
    }

    pub fn connect(&mut self, src: PortId, dst: PortId) -> Result<(), SimError> {
        let (s, d) = (&self.io.ports[src.0], &self.io.ports[dst.0]);
        if s.dir != PortDir::Out || d.dir != PortDir::In {
            return Err(SimError::DirectionMismatch);
        }
        if s.channel != d.channel {
            return Err(SimError::ChannelMismatch { src: s.channel, dst: d.channel });
        }
        if d.link.is_some() {
            return Err(SimError::AlreadyConnected(dst));
        }
        if s.link.is_some() {
            return Err(SimError::AlreadyConnected(src));
        }
        let label = format!("{}->{}.{}", s.owner, d.owner, s.channel);
        let owner = s.owner.clone();
        let peer = d.owner.clone();
        let l = self.links.len();
        self.links.push(Link { label, owner, peer, pending: None, aborted: false });
        self.io.sigs.push(LinkSig::default());
        self.io.ports[src.0].link = Some(l);
        self.io.ports[dst.0].link = Some(l);
        Ok(())
    }

    pub fn add<C: Component>(&mut self, comp: C) -> CompId {
        self.comps.push(Box::new(comp));
        CompId(self.comps.len() - 1)
    }

    pub fn get<C: Component>(&self, id: CompId) -> Option<&C> {
        let c: &dyn Any = self.comps[id.0].as_ref();
        c.downcast_ref::<C>()
    }

    pub fn get_mut<C: Component>(&mut self, id: CompId) -> Option<&mut C> {
        let c: &mut dyn Any = self.comps[id.0].as_mut();
        c.downcast_mut::<C>()
    }

    pub fn step(&mut self) -> Result<(), SimError> {
        for s in &mut self.io.sigs {
            *s = LinkSig::default();
        }
        let mut settled = false;
        for _ in 0..MAX_SETTLE_ITERATIONS {
            self.io.changed = false;
            for c in &self.comps {
                c.evaluate(&mut self.io);
            }
            if !self.io.changed {
                settled = true;
                break;
            }
        }
        if !settled {
            return Err(SimError::CombinationalLoop(MAX_SETTLE_ITERATIONS));
        }
        let cycle = self.io.cycle;
        for (l, link) in self.links.iter_mut().enumerate() {
            let sig = &self.io.sigs[l];
            if let Some(prev) = link.pending {
                if !link.aborted && sig.payload != Some(prev) {
                    return Err(SimError::HandshakeViolation { link: link.label.clone(), cycle });
                }
            }
            link.aborted = false;
            let fired = sig.ready && sig.payload.is_some();
            link.pending = if fired { None } else { sig.payload };
            if fired && self.trace_enabled {
                let mut beat = sig.payload.expect("fired link has payload");
                beat.cycle = cycle;
                self.trace.push(TraceRecord { cycle, component: link.owner.clone(), peer: link.peer.clone(), beat });
            }
            if let Some(dump) = &mut self.occupancy {
                dump.push(format!("{},{},{},{}", cycle, link.label, u8::from(sig.payload.is_some()), u8::from(sig.ready)));
            }
        }
        for c in &mut self.comps {
            c.commit(&mut self.io);
        }
        for l in std::mem::take(&mut self.io.aborts) {
            self.links[l].aborted = true;
        }
        self.io.cycle += 1;
        Ok(())
    }

    /// Steps until `done` holds (checked before each step) or `max_cycles`
    /// steps have run.
    pub fn run_until<F: FnMut(&Sim) -> bool>(&mut self, mut done: F, max_cycles: u64) -> Result<RunOutcome, SimError> {
        let start = self.io.cycle;
        loop {
            if done(self) {
                return Ok(RunOutcome::Done { cycles: self.io.cycle - start });
            }
            if self.io.cycle - start >= max_cycles {
                return Ok(RunOutcome::Timeout { cycles: self.io.cycle - start });
            }
            self.step()?;
        }
    }

    pub fn run(&mut self, cycles: u64) -> Result<(), SimError> {
        for _ in 0..cycles {
            self.step()?;
        }
        Ok(())
    }
}

/// Manager-side AXI port bundle: requests out, responses in.
#[derive(Debug, Clone, Copy)]
pub struct AxiMgrPorts {
    pub ar: PortId,
    pub aw: PortId,
    pub w: PortId,
    pub r: PortId,
    pub b: PortId,
}

/// Subordinate-side AXI port bundle: requests in, responses out.
#[derive(Debug, Clone, Copy)]
pub struct AxiSubPorts {
    pub ar: PortId,
    pub aw: PortId,
    pub w: PortId,
    pub r: PortId,
    pub b: PortId,
}

impl Sim {
    pub fn axi_mgr_ports(&mut self, owner: &str) -> AxiMgrPorts {
        AxiMgrPorts {
            ar: self.out_port(owner, Channel::AR),
            aw: self.out_port(owner, Channel::AW),
            w: self.out_port(owner, Channel::W),
            r: self.in_port(owner, Channel::R),
            b: self.in_port(owner, Channel::B),
        }
    }

    pub fn axi_sub_ports(&mut self, owner: &str) -> AxiSubPorts {
        AxiSubPorts {
            ar: self.in_port(owner, Channel::AR),
            aw: self.in_port(owner, Channel::AW),
            w: self.in_port(owner, Channel::W),
            r: self.out_port(owner, Channel::R),
            b: self.out_port(owner, Channel::B),
        }
    }

    pub fn connect_axi(&mut self, mgr: &AxiMgrPorts, sub: &AxiSubPorts) -> Result<(), SimError> {
        self.connect(mgr.ar, sub.ar)?;
        self.connect(mgr.aw, sub.aw)?;
        self.connect(mgr.w, sub.w)?;
        self.connect(sub.r, mgr.r)?;
        self.connect(sub.b, mgr.b)?;
        Ok(())
    }
}

/// Sideband wire outside the handshake fabric (reset pulses, interrupts).
///
/// The driver records the cycle at which the line goes high; readers
/// compare against their own cycle, so component order does not matter as
/// long as the line is raised for a later cycle.
#[derive(Debug, Clone, Default)]
pub struct Line(Rc<Cell<Option<u64>>>);

impl Line {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn raise_at(&self, cycle: u64) {
        self.0.set(Some(cycle));
    }

    pub fn clear(&self) {
        self.0.set(None);
    }

    pub fn raised_at(&self) -> Option<u64> {
        self.0.get()
    }

    /// Level view: high from the raise cycle until cleared.
    pub fn is_high(&self, cycle: u64) -> bool {
        self.0.get().is_some_and(|c| c <= cycle)
    }

    /// Pulse view: high only on the raise cycle.
    pub fn pulses(&self, cycle: u64) -> bool {
        self.0.get() == Some(cycle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{Tid, TxnId};

    struct Producer {
        out: PortId,
        queue: Vec<ChannelBeat>,
    }

    impl Component for Producer {
        fn name(&self) -> &str {
            "prod"
        }
        fn evaluate(&self, io: &mut Io) {
            io.drive(self.out, self.queue.first().copied());
        }
        fn commit(&mut self, io: &mut Io) {
            if io.fired(self.out) {
                self.queue.remove(0);
            }
        }
    }

    struct Consumer {
        inp: PortId,
        ready_from: u64,
        got: Vec<(u64, ChannelBeat)>,
    }

    impl Component for Consumer {
        fn name(&self) -> &str {
            "cons"
        }
        fn evaluate(&self, io: &mut Io) {
            let r = io.cycle() >= self.ready_from;
            io.set_ready(self.inp, r);
        }
        fn commit(&mut self, io: &mut Io) {
            if let Some(b) = io.transfer(self.inp) {
                self.got.push((io.cycle(), *b));
            }
        }
    }

    fn beat(i: u64) -> ChannelBeat {
        ChannelBeat::b(TxnId(i), Tid(0), 0, crate::protocol::Resp::Okay)
    }

    fn pair(ready_from: u64, n: u64) -> (Sim, CompId) {
        let mut sim = Sim::new();
        let o = sim.out_port("prod", Channel::B);
        let i = sim.in_port("cons", Channel::B);
        sim.connect(o, i).unwrap();
        sim.add(Producer { out: o, queue: (0..n).map(beat).collect() });
        let c = sim.add(Consumer { inp: i, ready_from, got: vec![] });
        (sim, c)
    }

    #[test]
    fn empty_design_steps() {
        let mut sim = Sim::new();
        sim.step().unwrap();
        assert_eq!(sim.cycle(), 1);
        assert!(sim.trace().is_empty());
    }

    #[test]
    fn connect_errors() {
        let mut sim = Sim::new();
        let aw = sim.out_port("a", Channel::AW);
        let w_in = sim.in_port("b", Channel::W);
        let aw_in = sim.in_port("b", Channel::AW);
        let aw2 = sim.out_port("c", Channel::AW);
        assert_eq!(sim.connect(aw, w_in), Err(SimError::ChannelMismatch { src: Channel::AW, dst: Channel::W }));
        assert_eq!(sim.connect(aw_in, aw), Err(SimError::DirectionMismatch));
        sim.connect(aw, aw_in).unwrap();
        assert_eq!(sim.connect(aw2, aw_in), Err(SimError::AlreadyConnected(aw_in)));
    }

    #[test]
    fn single_transfer() {
        let (mut sim, _) = pair(0, 1);
        sim.step().unwrap();
        assert_eq!(sim.trace().len(), 1);
    }

    #[test]
    fn backpressure_holds_payload() {
        let (mut sim, c) = pair(6, 1);
        sim.run(10).unwrap();
        let got = &sim.get::<Consumer>(c).unwrap().got;
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].0, 6);
        assert_eq!(got[0].1.txn, TxnId(0));
        assert_eq!(sim.trace()[0].cycle, 6);
    }

    struct Fickle {
        out: PortId,
    }

    impl Component for Fickle {
        fn name(&self) -> &str {
            "fickle"
        }
        fn evaluate(&self, io: &mut Io) {
            let b = if io.cycle() == 0 { Some(beat(1)) } else { None };
            io.drive(self.out, b);
        }
        fn commit(&mut self, _io: &mut Io) {}
    }

    #[test]
    fn withdrawn_valid_is_a_violation() {
        let mut sim = Sim::new();
        let o = sim.out_port("fickle", Channel::B);
        let i = sim.in_port("cons", Channel::B);
        sim.connect(o, i).unwrap();
        sim.add(Fickle { out: o });
        sim.add(Consumer { inp: i, ready_from: 100, got: vec![] });
        sim.step().unwrap();
        assert!(matches!(sim.step(), Err(SimError::HandshakeViolation { cycle: 1, .. })));
    }

    struct Loop {
        a: PortId,
        b: PortId,
    }

    impl Component for Loop {
        fn name(&self) -> &str {
            "loop"
        }
        fn evaluate(&self, io: &mut Io) {
            // ready toggles on its own output: never settles
            let r = io.ready(self.a);
            io.set_ready(self.b, !r);
            io.drive(self.a, Some(beat(0)));
        }
        fn commit(&mut self, _io: &mut Io) {}
    }

    #[test]
    fn combinational_loop_detected() {
        let mut sim = Sim::new();
        let a = sim.out_port("loop", Channel::B);
        let b = sim.in_port("loop", Channel::B);
        sim.connect(a, b).unwrap();
        sim.add(Loop { a, b });
        assert_eq!(sim.step(), Err(SimError::CombinationalLoop(MAX_SETTLE_ITERATIONS)));
    }

    #[test]
    fn run_until_distinguishes_timeout() {
        let (mut sim, c) = pair(0, 3);
        let out = sim
            .run_until(|s| s.get::<Consumer>(c).unwrap().got.len() == 3, 100)
            .unwrap();
        assert_eq!(out, RunOutcome::Done { cycles: 3 });
        let out = sim.run_until(|_| false, 5).unwrap();
        assert!(out.is_timeout());
    }

    #[test]
    fn occupancy_dump_lines() {
        let (mut sim, _) = pair(1, 1);
        sim.enable_occupancy_dump();
        sim.run(2).unwrap();
        assert_eq!(sim.occupancy_dump(), &["0,prod->cons.B,1,0".to_string(), "1,prod->cons.B,1,1".to_string()]);
    }
}
