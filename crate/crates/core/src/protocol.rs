//! AXI4 transaction and beat vocabulary, plus an ordering-rule oracle.
//!
//! Everything in here is plain data and pure functions. Other modules use
//! [`check_ordering`] to validate the per-port traces they produce.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum burst length of an AXI4 INCR burst.
pub const MAX_BURST_BEATS: u16 = 256;

/// Transaction identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Tid(pub u16);

impl Tid {
    /// Builds a TID that fits in `width` bits (1..=8).
    pub fn new(value: u16, width: u8) -> Result<Self, ProtocolError> {
        if !(1..=8).contains(&width) {
            return Err(ProtocolError::TidWidth(width));
        }
        if u32::from(value) >= 1u32 << width {
            return Err(ProtocolError::TidOutOfRange { value, width });
        }
        Ok(Tid(value))
    }
}

impl fmt::Display for Tid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    AR,
    AW,
    W,
    R,
    B,
}

impl Channel {
    pub const ALL: [Channel; 5] = [Channel::AR, Channel::AW, Channel::W, Channel::R, Channel::B];

    pub fn is_request(self) -> bool {
        matches!(self, Channel::AR | Channel::AW | Channel::W)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::AR => "AR",
            Channel::AW => "AW",
            Channel::W => "W",
            Channel::R => "R",
            Channel::B => "B",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BurstKind {
    Incr,
    Fixed,
    Wrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BurstAttr {
    pub kind: BurstKind,
    pub modifiable: bool,
    pub atomic: bool,
}

impl Default for BurstAttr {
    fn default() -> Self {
        BurstAttr { kind: BurstKind::Incr, modifiable: true, atomic: false }
    }
}

/// Response code carried on R and B beats. Ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Resp {
    Okay,
    SlvErr,
    DecErr,
}

impl Resp {
    /// Worst-of merge: DECERR > SLVERR > OKAY.
    pub fn merge(self, other: Resp) -> Resp {
        self.max(other)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Resp::Okay => "OKAY",
            Resp::SlvErr => "SLVERR",
            Resp::DecErr => "DECERR",
        }
    }
}

/// Simulator-wide transaction reference. Fragments created by a burst
/// splitter share the low 48 bits of their parent and carry the fragment
/// index (plus one) in the upper bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TxnId(pub u64);

const FRAG_SHIFT: u32 = 48;

impl TxnId {
    pub fn fragment(self, index: u16) -> TxnId {
        TxnId((self.0 & ((1 << FRAG_SHIFT) - 1)) | ((u64::from(index) + 1) << FRAG_SHIFT))
    }

    pub fn parent(self) -> TxnId {
        TxnId(self.0 & ((1 << FRAG_SHIFT) - 1))
    }

    pub fn is_fragment(self) -> bool {
        self.0 >> FRAG_SHIFT != 0
    }
}

impl fmt::Display for TxnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_fragment() {
            write!(f, "{}.{}", self.parent().0, (self.0 >> FRAG_SHIFT) - 1)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Address-phase description of one transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TxnDescriptor {
    pub id: TxnId,
    pub direction: Direction,
    pub tid: Tid,
    pub addr: u64,
    pub len_beats: u16,
    pub beat_bytes: u16,
    pub burst: BurstAttr,
    pub manager_id: usize,
    pub issue_cycle: u64,
}

impl TxnDescriptor {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.len_beats == 0 || self.len_beats > MAX_BURST_BEATS {
            return Err(ProtocolError::BurstLength(self.len_beats));
        }
        if self.beat_bytes == 0 || !self.beat_bytes.is_power_of_two() {
            return Err(ProtocolError::BeatSize(self.beat_bytes));
        }
        if self.burst.kind == BurstKind::Incr && self.addr % u64::from(self.beat_bytes) != 0 {
            return Err(ProtocolError::Unaligned { addr: self.addr, beat_bytes: self.beat_bytes });
        }
        Ok(())
    }

    pub fn bytes(&self) -> u64 {
        u64::from(self.len_beats) * u64::from(self.beat_bytes)
    }

    /// Half-open byte range touched by an INCR burst.
    pub fn byte_range(&self) -> std::ops::Range<u64> {
        self.addr..self.addr + self.bytes()
    }

    pub fn addr_channel(&self) -> Channel {
        match self.direction {
            Direction::Read => Channel::AR,
            Direction::Write => Channel::AW,
        }
    }
}

/// One transfer on one channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelBeat {
    pub channel: Channel,
    pub txn: TxnId,
    /// Absent on W beats.
    pub tid: Option<Tid>,
    /// Routing tag of the originating manager (simulator metadata).
    pub manager: usize,
    pub beat_index: u16,
    /// Only meaningful on W and R.
    pub is_last: bool,
    /// Only present on R and B.
    pub resp: Option<Resp>,
    /// Present on AR and AW.
    pub desc: Option<TxnDescriptor>,
    pub cycle: u64,
}

impl ChannelBeat {
    pub fn addr(desc: TxnDescriptor) -> Self {
        ChannelBeat {
            channel: desc.addr_channel(),
            txn: desc.id,
            tid: Some(desc.tid),
            manager: desc.manager_id,
            beat_index: 0,
            is_last: true,
            resp: None,
            desc: Some(desc),
            cycle: 0,
        }
    }

    pub fn w(txn: TxnId, manager: usize, beat_index: u16, is_last: bool) -> Self {
        ChannelBeat {
            channel: Channel::W,
            txn,
            tid: None,
            manager,
            beat_index,
            is_last,
            resp: None,
            desc: None,
            cycle: 0,
        }
    }

    pub fn r(txn: TxnId, tid: Tid, manager: usize, beat_index: u16, is_last: bool, resp: Resp) -> Self {
        ChannelBeat {
            channel: Channel::R,
            txn,
            tid: Some(tid),
            manager,
            beat_index,
            is_last,
            resp: Some(resp),
            desc: None,
            cycle: 0,
        }
    }

    pub fn b(txn: TxnId, tid: Tid, manager: usize, resp: Resp) -> Self {
        ChannelBeat {
            channel: Channel::B,
            txn,
            tid: Some(tid),
            manager,
            beat_index: 0,
            is_last: true,
            resp: Some(resp),
            desc: None,
            cycle: 0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("TID width {0} outside 1..=8")]
    TidWidth(u8),
    #[error("TID {value} does not fit in {width} bits")]
    TidOutOfRange { value: u16, width: u8 },
    #[error("burst length {0} outside 1..=256")]
    BurstLength(u16),
    #[error("beat size {0} is not a power of two")]
    BeatSize(u16),
    #[error("address {addr:#x} not aligned to {beat_bytes}-byte beats")]
    Unaligned { addr: u64, beat_bytes: u16 },
}

/// Enumerates every beat of `txn` in protocol order: the address beat,
/// then the data beats (W for writes, R for reads), then B for writes.
pub fn expand_beats(txn: &TxnDescriptor) -> Vec<ChannelBeat> {
    let n = txn.len_beats;
    let mut beats = Vec::with_capacity(usize::from(n) + 2);
    beats.push(ChannelBeat::addr(*txn));
    for i in 0..n {
        let last = i + 1 == n;
        beats.push(match txn.direction {
            Direction::Write => ChannelBeat::w(txn.id, txn.manager_id, i, last),
            Direction::Read => ChannelBeat::r(txn.id, txn.tid, txn.manager_id, i, last, Resp::Okay),
        });
    }
    if txn.direction == Direction::Write {
        beats.push(ChannelBeat::b(txn.id, txn.tid, txn.manager_id, Resp::Okay));
    }
    for (i, b) in beats.iter_mut().enumerate() {
        b.cycle = i as u64;
    }
    beats
}

/// Whether a burst splitter may cut `txn` into shorter transactions.
pub fn is_fragmentable(txn: &TxnDescriptor) -> bool {
    !(txn.burst.atomic || (!txn.burst.modifiable && txn.len_beats <= 16))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    /// W data out of AW order.
    Rule1,
    /// Same-TID transactions completed (or streamed) out of issue order.
    Rule3,
    MalformedTrace,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderingViolation {
    pub kind: ViolationKind,
    pub index: usize,
    pub txn: TxnId,
    pub detail: String,
}

struct OpenTxn {
    desc: TxnDescriptor,
    data_seen: u16,
    w_done: bool,
}

/// Checks the three AXI4 ordering rules over the complete event log of one
/// manager port. Rule 2 (no constraint across TIDs) is never flagged.
pub fn check_ordering(trace: &[ChannelBeat]) -> Vec<OrderingViolation> {
    let mut out = Vec::new();
    let mut open: HashMap<TxnId, OpenTxn> = HashMap::new();
    // per (direction, tid): issue order of outstanding transactions
    let mut tid_order: HashMap<(Direction, Tid), VecDeque<TxnId>> = HashMap::new();
    // AW order of writes whose W burst is incomplete
    let mut w_order: VecDeque<TxnId> = VecDeque::new();

    let flag = |out: &mut Vec<OrderingViolation>, kind, index, txn, detail: String| {
        out.push(OrderingViolation { kind, index, txn, detail });
    };

    for (index, beat) in trace.iter().enumerate() {
        match beat.channel {
            Channel::AR | Channel::AW => {
                let Some(desc) = beat.desc else {
                    flag(&mut out, ViolationKind::MalformedTrace, index, beat.txn, "address beat without descriptor".into());
                    continue;
                };
                if open.contains_key(&desc.id) {
                    flag(&mut out, ViolationKind::MalformedTrace, index, desc.id, "duplicate address beat".into());
                    continue;
                }
                tid_order.entry((desc.direction, desc.tid)).or_default().push_back(desc.id);
                if desc.direction == Direction::Write {
                    w_order.push_back(desc.id);
                }
                open.insert(desc.id, OpenTxn { desc, data_seen: 0, w_done: false });
            }
            Channel::W => {
                let Some(t) = open.get_mut(&beat.txn) else {
                    flag(&mut out, ViolationKind::MalformedTrace, index, beat.txn, "orphan W beat".into());
                    continue;
                };
                if t.w_done {
                    flag(&mut out, ViolationKind::MalformedTrace, index, beat.txn, "W beat after last".into());
                    continue;
                }
                if w_order.front() != Some(&beat.txn) {
                    flag(&mut out, ViolationKind::Rule1, index, beat.txn, "W data out of AW order".into());
                }
                t.data_seen += 1;
                let expect_last = t.data_seen == t.desc.len_beats;
                if beat.is_last != expect_last {
                    flag(&mut out, ViolationKind::MalformedTrace, index, beat.txn, "W last flag does not match burst length".into());
                }
                if beat.is_last || expect_last {
                    t.w_done = true;
                    if let Some(pos) = w_order.iter().position(|x| *x == beat.txn) {
                        w_order.remove(pos);
                    }
                }
            }
            Channel::R | Channel::B => {
                let Some(t) = open.get_mut(&beat.txn) else {
                    flag(&mut out, ViolationKind::MalformedTrace, index, beat.txn, "orphan response beat".into());
                    continue;
                };
                let dir = t.desc.direction;
                let expected_dir = if beat.channel == Channel::R { Direction::Read } else { Direction::Write };
                if dir != expected_dir {
                    flag(&mut out, ViolationKind::MalformedTrace, index, beat.txn, "response on wrong channel".into());
                    continue;
                }
                if beat.tid != Some(t.desc.tid) {
                    flag(&mut out, ViolationKind::MalformedTrace, index, beat.txn, "response TID differs from request".into());
                }
                let completes = match beat.channel {
                    Channel::R => {
                        t.data_seen += 1;
                        let expect_last = t.data_seen == t.desc.len_beats;
                        if beat.is_last != expect_last {
                            flag(&mut out, ViolationKind::MalformedTrace, index, beat.txn, "R last flag does not match burst length".into());
                        }
                        beat.is_last || t.data_seen >= t.desc.len_beats
                    }
                    _ => {
                        if !t.w_done {
                            flag(&mut out, ViolationKind::MalformedTrace, index, beat.txn, "B before last W".into());
                        }
                        true
                    }
                };
                let queue = tid_order.entry((dir, t.desc.tid)).or_default();
                if queue.front() != Some(&beat.txn) {
                    flag(&mut out, ViolationKind::Rule3, index, beat.txn, "same-TID transaction served out of order".into());
                }
                if completes {
                    if let Some(pos) = queue.iter().position(|x| *x == beat.txn) {
                        queue.remove(pos);
                    }
                    open.remove(&beat.txn);
                }
            }
        }
    }
    out
}

/// One line of an exported event log:
/// `cycle,component,channel,txn_id,tid,beat_index,is_last,resp`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub cycle: u64,
    /// Driver of the link.
    pub component: String,
    /// Receiver of the link (not part of the exported line).
    pub peer: String,
    pub beat: ChannelBeat,
}

impl TraceRecord {
    pub const HEADER: &'static str = "cycle,component,channel,txn_id,tid,beat_index,is_last,resp";

    pub fn to_line(&self) -> String {
        let b = &self.beat;
        format!(
            "{},{},{},{},{},{},{},{}",
            self.cycle,
            self.component,
            b.channel,
            b.txn,
            b.tid.map(|t| t.to_string()).unwrap_or_default(),
            b.beat_index,
            u8::from(b.is_last),
            b.resp.map(Resp::as_str).unwrap_or(""),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn desc(id: u64, dir: Direction, tid: u16, len: u16) -> TxnDescriptor {
        TxnDescriptor {
            id: TxnId(id),
            direction: dir,
            tid: Tid(tid),
            addr: 0x1000 * id,
            len_beats: len,
            beat_bytes: 8,
            burst: BurstAttr::default(),
            manager_id: 0,
            issue_cycle: 0,
        }
    }

    #[test]
    fn expand_minimal_write() {
        let beats = expand_beats(&desc(1, Direction::Write, 0, 1));
        let chans: Vec<_> = beats.iter().map(|b| b.channel).collect();
        assert_eq!(chans, vec![Channel::AW, Channel::W, Channel::B]);
        assert!(beats[1].is_last);
        assert!(beats[1].tid.is_none());
    }

    #[test]
    fn expand_read_four() {
        let beats = expand_beats(&desc(1, Direction::Read, 0, 4));
        let chans: Vec<_> = beats.iter().map(|b| b.channel).collect();
        assert_eq!(chans, vec![Channel::AR, Channel::R, Channel::R, Channel::R, Channel::R]);
        let lasts: Vec<_> = beats[1..].iter().map(|b| b.is_last).collect();
        assert_eq!(lasts, vec![false, false, false, true]);
    }

    #[test]
    fn expand_max_write_counts() {
        let beats = expand_beats(&desc(1, Direction::Write, 0, 256));
        let count = |c| beats.iter().filter(|b| b.channel == c).count();
        assert_eq!(beats.len(), 258);
        assert_eq!((count(Channel::AW), count(Channel::W), count(Channel::B)), (1, 256, 1));
    }

    #[test]
    fn fragmentability() {
        let mut d = desc(1, Direction::Read, 0, 4);
        d.burst.atomic = true;
        assert!(!is_fragmentable(&d));
        let mut d = desc(1, Direction::Read, 0, 16);
        d.burst.modifiable = false;
        assert!(!is_fragmentable(&d));
        d.len_beats = 17;
        assert!(is_fragmentable(&d));
        assert!(is_fragmentable(&desc(1, Direction::Read, 0, 256)));
    }

    #[test]
    fn validate_rejects_bad_descriptors() {
        let mut d = desc(1, Direction::Read, 0, 1);
        d.len_beats = 0;
        assert_eq!(d.validate(), Err(ProtocolError::BurstLength(0)));
        let mut d = desc(1, Direction::Read, 0, 1);
        d.addr = 3;
        assert!(matches!(d.validate(), Err(ProtocolError::Unaligned { .. })));
        assert!(Tid::new(256, 8).is_err());
        assert_eq!(Tid::new(255, 8), Ok(Tid(255)));
    }

    fn w_burst(id: u64, len: u16) -> Vec<ChannelBeat> {
        (0..len).map(|i| ChannelBeat::w(TxnId(id), 0, i, i + 1 == len)).collect()
    }

    #[test]
    fn in_order_writes_clean() {
        let a = desc(1, Direction::Write, 1, 2);
        let b = desc(2, Direction::Write, 2, 2);
        let mut t = vec![ChannelBeat::addr(a), ChannelBeat::addr(b)];
        t.extend(w_burst(1, 2));
        t.extend(w_burst(2, 2));
        assert!(check_ordering(&t).is_empty());
    }

    #[test]
    fn swapped_w_bursts_violate_rule1() {
        let a = desc(1, Direction::Write, 1, 2);
        let b = desc(2, Direction::Write, 2, 2);
        let mut t = vec![ChannelBeat::addr(a), ChannelBeat::addr(b)];
        t.extend(w_burst(2, 2));
        t.extend(w_burst(1, 2));
        let v = check_ordering(&t);
        assert!(!v.is_empty());
        assert!(v.iter().all(|x| x.kind == ViolationKind::Rule1));
    }

    #[test]
    fn same_tid_b_reordered_violates_rule3() {
        let a = desc(1, Direction::Write, 3, 1);
        let b = desc(2, Direction::Write, 3, 1);
        let mut t = vec![ChannelBeat::addr(a), ChannelBeat::addr(b)];
        t.extend(w_burst(1, 1));
        t.extend(w_burst(2, 1));
        t.push(ChannelBeat::b(TxnId(2), Tid(3), 0, Resp::Okay));
        t.push(ChannelBeat::b(TxnId(1), Tid(3), 0, Resp::Okay));
        let v = check_ordering(&t);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Rule3);
    }

    #[test]
    fn different_tids_may_complete_in_any_order() {
        let a = desc(1, Direction::Read, 1, 2);
        let b = desc(2, Direction::Read, 2, 2);
        let t = vec![
            ChannelBeat::addr(a),
            ChannelBeat::addr(b),
            ChannelBeat::r(TxnId(2), Tid(2), 0, 0, false, Resp::Okay),
            ChannelBeat::r(TxnId(1), Tid(1), 0, 0, false, Resp::Okay),
            ChannelBeat::r(TxnId(2), Tid(2), 0, 1, true, Resp::Okay),
            ChannelBeat::r(TxnId(1), Tid(1), 0, 1, true, Resp::Okay),
        ];
        assert!(check_ordering(&t).is_empty());
    }

    #[test]
    fn malformed_traces_are_distinct() {
        let t = vec![ChannelBeat::b(TxnId(9), Tid(0), 0, Resp::Okay)];
        assert_eq!(check_ordering(&t)[0].kind, ViolationKind::MalformedTrace);

        let a = desc(1, Direction::Read, 0, 1);
        let t = vec![
            ChannelBeat::addr(a),
            ChannelBeat::r(TxnId(1), Tid(0), 0, 0, true, Resp::Okay),
            ChannelBeat::r(TxnId(1), Tid(0), 0, 1, true, Resp::Okay),
        ];
        assert_eq!(check_ordering(&t)[0].kind, ViolationKind::MalformedTrace);
    }

    #[test]
    fn fragment_ids_round_trip() {
        let id = TxnId(0x1234);
        let f = id.fragment(7);
        assert!(f.is_fragment());
        assert_eq!(f.parent(), id);
        assert_eq!(f.to_string(), "4660.7");
    }

    #[test]
    fn trace_line_format() {
        let rec = TraceRecord {
            cycle: 5,
            component: "m0".into(),
            peer: "x".into(),
            beat: ChannelBeat::r(TxnId(3), Tid(1), 0, 2, true, Resp::SlvErr),
        };
        assert_eq!(rec.to_line(), "5,m0,R,3,1,2,1,SLVERR");
        let w = TraceRecord { cycle: 1, component: "x".into(), peer: "y".into(), beat: ChannelBeat::w(TxnId(3), 0, 0, false) };
        assert_eq!(w.to_line(), "1,x,W,3,,0,0,");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_desc() -> impl Strategy<Value = TxnDescriptor> {
            (any::<bool>(), 0u16..16, 1u16..=256, 0u64..1024).prop_map(|(w, tid, len, a)| TxnDescriptor {
                id: TxnId(1),
                direction: if w { Direction::Write } else { Direction::Read },
                tid: Tid(tid),
                addr: a * 8,
                len_beats: len,
                beat_bytes: 8,
                burst: BurstAttr::default(),
                manager_id: 0,
                issue_cycle: 0,
            })
        }

        proptest! {
            #[test]
            fn expansion_counts_and_single_last(d in any_desc()) {
                let beats = expand_beats(&d);
                let data = if d.direction == Direction::Write { Channel::W } else { Channel::R };
                let n = beats.iter().filter(|b| b.channel == data).count();
                prop_assert_eq!(n, usize::from(d.len_beats));
                let lasts = beats.iter().filter(|b| b.channel == data && b.is_last).count();
                prop_assert_eq!(lasts, 1);
                let extra = if d.direction == Direction::Write { 2 } else { 1 };
                prop_assert_eq!(beats.len(), usize::from(d.len_beats) + extra);
            }

            #[test]
            fn single_transaction_is_always_ordered(d in any_desc()) {
                let beats = expand_beats(&d);
                prop_assert!(check_ordering(&beats).is_empty());
                prop_assert_eq!(check_ordering(&beats), check_ordering(&beats));
            }
        }
    }
}
