//! Dynamic outstanding-transaction queue: ID remapper, head-tail table,
//! linked data table and the data-order table, all fixed-size.

use std::collections::VecDeque;

use crate::protocol::{Tid, TxnDescriptor};

use super::stages::Stage;

/// Maps sparse external TIDs onto `num_slots` compact slots.
#[derive(Debug, Clone)]
pub struct IdRemap {
    slots: Vec<Option<Tid>>,
}

impl IdRemap {
    pub fn new(num_slots: usize) -> Self {
        IdRemap { slots: vec![None; num_slots] }
    }

    pub fn lookup(&self, tid: Tid) -> Option<usize> {
        self.slots.iter().position(|s| *s == Some(tid))
    }

    /// Existing slot for `tid`, else the lowest free one.
    pub fn remap_in(&mut self, tid: Tid) -> Option<usize> {
        if let Some(s) = self.lookup(tid) {
            return Some(s);
        }
        let s = self.slots.iter().position(Option::is_none)?;
        self.slots[s] = Some(tid);
        Some(s)
    }

    pub fn can_map(&self, tid: Tid) -> bool {
        self.lookup(tid).is_some() || self.slots.iter().any(Option::is_none)
    }

    pub fn release(&mut self, slot: usize) {
        self.slots[slot] = None;
    }

    pub fn mapped(&self) -> usize {
        self.slots.iter().flatten().count()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HtEntry {
    pub head: Option<usize>,
    pub tail: Option<usize>,
    pub outstanding: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LdEntry {
    pub slot: usize,
    pub desc: TxnDescriptor,
    /// Routing tag of the address beat, reused for synthesized responses.
    pub manager: usize,
    pub stage: Stage,
    pub stage_start: u64,
    pub elapsed: u64,
    pub budget: u64,
    /// Data beats transferred so far.
    pub beats: u16,
    pub next: Option<usize>,
    /// Global arrival order across both directions.
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InsertError {
    Full,
}

/// One queue per direction.
#[derive(Debug, Clone)]
pub struct Dotq {
    pub remap: IdRemap,
    ht: Vec<HtEntry>,
    ld: Vec<Option<LdEntry>>,
    free: Vec<usize>,
    per_tid: usize,
    /// Data-order table: LD indices in address-handshake order.
    order: VecDeque<usize>,
}

impl Dotq {
    pub fn new(num_slots: usize, per_tid: usize) -> Self {
        let cap = num_slots * per_tid;
        Dotq {
            remap: IdRemap::new(num_slots),
            ht: vec![HtEntry::default(); num_slots],
            ld: vec![None; cap],
            free: (0..cap).rev().collect(),
            per_tid,
            order: VecDeque::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.ld.len()
    }

    pub fn len(&self) -> usize {
        self.ld.len() - self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn can_insert(&self, tid: Tid) -> bool {
        match self.remap.lookup(tid) {
            Some(s) => self.ht[s].outstanding < self.per_tid,
            None => self.remap.can_map(tid),
        }
    }

    /// Appends an entry at the tail of its TID chain.
    pub fn insert(&mut self, mut e: LdEntry) -> Result<usize, InsertError> {
        if !self.can_insert(e.desc.tid) {
            return Err(InsertError::Full);
        }
        let slot = self.remap.remap_in(e.desc.tid).ok_or(InsertError::Full)?;
        let idx = self.free.pop().ok_or(InsertError::Full)?;
        e.slot = slot;
        e.next = None;
        self.ld[idx] = Some(e);
        let ht = &mut self.ht[slot];
        match ht.tail {
            Some(t) => self.ld[t].as_mut().expect("tail live").next = Some(idx),
            None => ht.head = Some(idx),
        }
        ht.tail = Some(idx);
        ht.outstanding += 1;
        Ok(idx)
    }

    pub fn get(&self, idx: usize) -> &LdEntry {
        self.ld[idx].as_ref().expect("live LD entry")
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut LdEntry {
        self.ld[idx].as_mut().expect("live LD entry")
    }

    pub fn slot_of(&self, tid: Tid) -> Option<usize> {
        self.remap.lookup(tid)
    }

    /// Oldest outstanding entry of `tid`.
    pub fn head(&self, tid: Tid) -> Option<usize> {
        self.slot_of(tid).and_then(|s| self.ht[s].head)
    }

    pub fn chain(&self, tid: Tid) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = self.head(tid);
        while let Some(i) = cur {
            out.push(i);
            cur = self.get(i).next;
        }
        out
    }

    pub fn outstanding(&self, tid: Tid) -> usize {
        self.slot_of(tid).map_or(0, |s| self.ht[s].outstanding)
    }

    pub fn push_order(&mut self, idx: usize) {
        self.order.push_back(idx);
    }

    pub fn order_head(&self) -> Option<usize> {
        self.order.front().copied()
    }

    pub fn pop_order(&mut self) {
        self.order.pop_front();
    }

    /// Retires the head of its chain; frees the slot when the chain empties.
    pub fn retire(&mut self, idx: usize) {
        let e = self.ld[idx].take().expect("retiring live entry");
        let ht = &mut self.ht[e.slot];
        debug_assert_eq!(ht.head, Some(idx), "retire out of order");
        ht.head = e.next;
        if ht.head.is_none() {
            ht.tail = None;
        }
        ht.outstanding -= 1;
        if ht.outstanding == 0 {
            self.remap.release(e.slot);
        }
        self.order.retain(|&i| i != idx);
        self.free.push(idx);
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, &LdEntry)> {
        self.ld.iter().enumerate().filter_map(|(i, e)| e.as_ref().map(|e| (i, e)))
    }

    pub fn indices(&self) -> Vec<usize> {
        self.entries().map(|(i, _)| i).collect()
    }

    pub fn clear(&mut self) {
        let (slots, per_tid) = (self.ht.len(), self.per_tid);
        *self = Dotq::new(slots, per_tid);
    }

    /// Chain lengths agree with the HT counters and every entry is reachable.
    pub fn consistent(&self) -> bool {
        let mut seen = 0;
        for (s, ht) in self.ht.iter().enumerate() {
            let mut n = 0;
            let mut cur = ht.head;
            let mut last = None;
            while let Some(i) = cur {
                let Some(e) = self.ld[i].as_ref() else { return false };
                if e.slot != s {
                    return false;
                }
                n += 1;
                last = Some(i);
                cur = e.next;
            }
            if n != ht.outstanding || last != ht.tail || (n > 0) != self.remap.slots[s].is_some() {
                return false;
            }
            seen += n;
        }
        seen == self.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{BurstAttr, Direction, TxnId};

    fn entry(id: u64, tid: u16) -> LdEntry {
        LdEntry {
            slot: 0,
            desc: TxnDescriptor {
                id: TxnId(id),
                direction: Direction::Read,
                tid: Tid(tid),
                addr: 0,
                len_beats: 4,
                beat_bytes: 8,
                burst: BurstAttr::default(),
                manager_id: 0,
                issue_cycle: 0,
            },
            manager: 0,
            stage: Stage::AxHs,
            stage_start: 0,
            elapsed: 0,
            budget: 1,
            beats: 0,
            next: None,
            seq: id,
        }
    }

    #[test]
    fn remap_compacts() {
        let mut r = IdRemap::new(2);
        assert_eq!(r.remap_in(Tid(7)), Some(0));
        assert_eq!(r.remap_in(Tid(300)), Some(1));
        assert_eq!(r.remap_in(Tid(7)), Some(0));
        assert_eq!(r.remap_in(Tid(9)), None);
    }

    #[test]
    fn same_tid_chain_fifo() {
        let mut q = Dotq::new(2, 2);
        let a = q.insert(entry(1, 5)).unwrap();
        let b = q.insert(entry(2, 5)).unwrap();
        assert_eq!(q.outstanding(Tid(5)), 2);
        assert_eq!(q.chain(Tid(5)), vec![a, b]);
        assert!(!q.can_insert(Tid(5)));
        assert_eq!(q.insert(entry(3, 5)), Err(InsertError::Full));
        q.retire(a);
        assert_eq!(q.head(Tid(5)), Some(b));
        q.retire(b);
        assert_eq!(q.slot_of(Tid(5)), None);
        assert!(q.consistent());
    }

    #[test]
    fn third_tid_stalls() {
        let mut q = Dotq::new(2, 2);
        q.insert(entry(1, 7)).unwrap();
        q.insert(entry(2, 300)).unwrap();
        assert!(!q.can_insert(Tid(9)));
        let h = q.head(Tid(7)).unwrap();
        q.retire(h);
        assert!(q.can_insert(Tid(9)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn never_exceeds_capacity(ops in proptest::collection::vec((0u16..6, any::<bool>()), 1..200)) {
                let mut q = Dotq::new(3, 2);
                let mut id = 0;
                for (tid, ins) in ops {
                    if ins {
                        id += 1;
                        let ok = q.can_insert(Tid(tid));
                        prop_assert_eq!(q.insert(entry(id, tid)).is_ok(), ok);
                    } else if let Some(h) = q.head(Tid(tid)) {
                        q.retire(h);
                    }
                    prop_assert!(q.len() <= q.capacity());
                    prop_assert!(q.remap.mapped() <= 3);
                    prop_assert!(q.consistent());
                }
            }
        }
    }
}
