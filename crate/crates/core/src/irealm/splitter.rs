//! Burst fragmentation and the response-side transforms that hide it.

use thiserror::Error;

use crate::protocol::{is_fragmentable, BurstKind, Resp, TxnDescriptor, MAX_BURST_BEATS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SplitError {
    #[error("fragment size {0} outside 1..=256")]
    Granularity(u16),
    #[error("transaction cannot be fragmented")]
    NotFragmentable,
}

/// Whether `txn` has to be cut at granularity `g`, and whether it legally
/// can be. Only modifiable INCR bursts may be cut.
pub fn needs_split(txn: &TxnDescriptor, g: u16) -> bool {
    txn.len_beats > g
}

pub fn can_split(txn: &TxnDescriptor) -> bool {
    is_fragmentable(txn) && txn.burst.kind == BurstKind::Incr
}

/// Length of fragment `index` of an `len`-beat burst cut at `g`.
pub fn fragment_len(len: u16, g: u16, index: u16) -> u16 {
    let done = u32::from(index) * u32::from(g);
    (u32::from(len) - done).min(u32::from(g)) as u16
}

pub fn fragment_count(len: u16, g: u16) -> u16 {
    len.div_ceil(g)
}

/// Descriptor of fragment `index`. A burst that needs no cutting is
/// returned unchanged, including its id.
pub fn fragment(txn: &TxnDescriptor, g: u16, index: u16) -> TxnDescriptor {
    if !needs_split(txn, g) {
        return *txn;
    }
    let mut f = *txn;
    f.id = txn.id.fragment(index);
    f.len_beats = fragment_len(txn.len_beats, g, index);
    f.addr = txn.addr + u64::from(index) * u64::from(g) * u64::from(txn.beat_bytes);
    f
}

/// Cuts `txn` into `ceil(len / g)` fragments of at most `g` beats.
pub fn split_request(txn: &TxnDescriptor, g: u16) -> Result<Vec<TxnDescriptor>, SplitError> {
    if g == 0 || g > MAX_BURST_BEATS {
        return Err(SplitError::Granularity(g));
    }
    if needs_split(txn, g) && !can_split(txn) {
        return Err(SplitError::NotFragmentable);
    }
    Ok((0..fragment_count(txn.len_beats, g)).map(|i| fragment(txn, g, i)).collect())
}

/// Worst-of merge over fragment responses.
pub fn coalesce_write_responses(resps: &[Resp]) -> Resp {
    resps.iter().fold(Resp::Okay, |acc, r| acc.merge(*r))
}

/// Manager-visible last flags for the R beats of an `original_len`-beat
/// read, whatever the fragmentation.
pub fn gate_r_last(fragment_lasts: &[bool], original_len: u16) -> Vec<bool> {
    (0..fragment_lasts.len()).map(|i| i + 1 == usize::from(original_len)).collect()
}
