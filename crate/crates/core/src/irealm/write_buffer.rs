//! Write buffer: holds up to two fragment AWs and the data of one fragment.
//! An AW leaves only once all its W beats are resident, so a slow writer
//! cannot hold the downstream W channel.

use std::collections::VecDeque;

use thiserror::Error;

use crate::protocol::{ChannelBeat, TxnDescriptor};

/// Pending AW descriptors the buffer can hold.
pub const AW_SLOTS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("fragment of {fragment} beats exceeds write buffer depth {depth}")]
pub struct BufferTooSmall {
    pub fragment: u16,
    pub depth: u16,
}

pub fn check_depth(fragment: u16, depth: u16) -> Result<(), BufferTooSmall> {
    if fragment > depth {
        Err(BufferTooSmall { fragment, depth })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WFrag {
    pub desc: TxnDescriptor,
    pub w_in: u16,
    pub w_out: u16,
    pub forwarded: bool,
    /// Rejected write: its W beats are consumed and dropped.
    pub sink: bool,
}

#[derive(Debug, Clone, Default)]
pub struct WriteBuffer {
    pub depth_beats: u16,
    frags: VecDeque<WFrag>,
    data: VecDeque<ChannelBeat>,
}

impl WriteBuffer {
    pub fn new(depth_beats: u16) -> Self {
        WriteBuffer { depth_beats, frags: VecDeque::new(), data: VecDeque::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.frags.is_empty() && self.data.is_empty()
    }

    fn unforwarded(&self) -> usize {
        self.frags.iter().filter(|f| !f.forwarded && !f.sink).count()
    }

    fn next_unforwarded(&self) -> Option<&WFrag> {
        self.frags.iter().find(|f| !f.forwarded && !f.sink)
    }

    pub fn can_admit_aw(&self) -> bool {
        self.unforwarded() < AW_SLOTS
    }

    pub fn admit_aw(&mut self, desc: TxnDescriptor) {
        debug_assert!(self.can_admit_aw());
        self.frags.push_back(WFrag { desc, w_in: 0, w_out: 0, forwarded: false, sink: false });
    }

    /// Records a fragment that went downstream without buffering.
    pub fn admit_forwarded(&mut self, desc: TxnDescriptor) {
        self.frags.push_back(WFrag { desc, w_in: 0, w_out: 0, forwarded: true, sink: false });
    }

    pub fn admit_sink(&mut self, desc: TxnDescriptor) {
        self.frags.push_back(WFrag { desc, w_in: 0, w_out: 0, forwarded: false, sink: true });
    }

    /// `beat` retagged as the next beat of fragment `f`.
    pub fn retag(f: &WFrag, mut beat: ChannelBeat) -> ChannelBeat {
        beat.txn = f.desc.id;
        beat.beat_index = f.w_in;
        beat.is_last = f.w_in + 1 == f.desc.len_beats;
        beat
    }

    /// Consumes a W beat without storing it (sink or pass-through). Returns
    /// the fragment once its last beat has been seen.
    pub fn consume_w(&mut self) -> Option<WFrag> {
        let f = self.frags.iter_mut().find(|f| f.w_in < f.desc.len_beats).expect("W beat without AW");
        f.w_in += 1;
        f.w_out = f.w_in;
        let done = (f.w_in == f.desc.len_beats).then_some(*f);
        self.gc();
        done
    }

    fn gc(&mut self) {
        while self
            .frags
            .front()
            .is_some_and(|f| (f.forwarded || f.sink) && f.w_out == f.desc.len_beats)
        {
            self.frags.pop_front();
        }
    }

    /// Fragment that the next incoming W beat belongs to.
    pub fn w_target(&self) -> Option<&WFrag> {
        self.frags.iter().find(|f| f.w_in < f.desc.len_beats)
    }

    pub fn resident(&self) -> usize {
        self.data.len()
    }

    pub fn has_space(&self, leaving: usize) -> bool {
        self.data.len() - leaving.min(self.data.len()) < usize::from(self.depth_beats)
    }

    /// Stores a W beat, retagged to its fragment with the fragment's last flag.
    pub fn push_w(&mut self, beat: ChannelBeat) {
        let f = self.frags.iter_mut().find(|f| f.w_in < f.desc.len_beats).expect("W beat without AW");
        let beat = Self::retag(f, beat);
        f.w_in += 1;
        self.data.push_back(beat);
    }

    /// Oldest unforwarded fragment, if all its data is resident.
    pub fn forwardable(&self) -> Option<&WFrag> {
        self.next_unforwarded().filter(|f| f.w_in == f.desc.len_beats)
    }

    pub fn mark_forwarded(&mut self) {
        let f = self.frags.iter_mut().find(|f| !f.forwarded && !f.sink).expect("fragment to forward");
        f.forwarded = true;
    }

    /// Head data beat, if its AW has gone (or `aw_now` is going) downstream.
    pub fn w_out(&self, aw_now: bool) -> Option<ChannelBeat> {
        let b = self.data.front()?;
        let f = self.frags.iter().find(|f| f.desc.id == b.txn)?;
        let next_unforwarded = self.next_unforwarded().map(|f| f.desc.id);
        (f.forwarded || (aw_now && next_unforwarded == Some(f.desc.id))).then_some(*b)
    }

    pub fn pop_w_out(&mut self) {
        let b = self.data.pop_front().expect("W out");
        let f = self.frags.iter_mut().find(|f| f.desc.id == b.txn).expect("tracked fragment");
        f.w_out += 1;
        self.gc();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{BurstAttr, Direction, Tid, TxnId};

    fn aw(id: u64, len: u16) -> TxnDescriptor {
        TxnDescriptor {
            id: TxnId(id),
            direction: Direction::Write,
            tid: Tid(0),
            addr: 0,
            len_beats: len,
            beat_bytes: 8,
            burst: BurstAttr::default(),
            manager_id: 0,
            issue_cycle: 0,
        }
    }

    #[test]
    fn capacity_two_aws() {
        let mut wb = WriteBuffer::new(4);
        wb.admit_aw(aw(1, 2));
        wb.admit_aw(aw(2, 2));
        assert!(!wb.can_admit_aw());
    }

    #[test]
    fn aw_held_until_data_resident() {
        let mut wb = WriteBuffer::new(4);
        wb.admit_aw(aw(1, 3));
        for i in 0..3 {
            assert!(wb.forwardable().is_none());
            wb.push_w(ChannelBeat::w(TxnId(1), 0, i, false));
        }
        assert_eq!(wb.forwardable().map(|f| f.desc.id), Some(TxnId(1)));
        assert!(wb.w_out(false).is_none());
        let b = wb.w_out(true).unwrap();
        assert_eq!(b.beat_index, 0);
        wb.mark_forwarded();
        let lasts: Vec<bool> = (0..3)
            .map(|_| {
                let b = wb.w_out(false).unwrap();
                wb.pop_w_out();
                b.is_last
            })
            .collect();
        assert_eq!(lasts, vec![false, false, true]);
        assert!(wb.is_empty());
    }

    #[test]
    fn depth_check() {
        assert!(check_depth(8, 8).is_ok());
        assert_eq!(check_depth(16, 8), Err(BufferTooSmall { fragment: 16, depth: 8 }));
    }
}
