//! Region decode, budget/period bookkeeping, throttling and probes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionConfig {
    pub region_id: usize,
    pub base: u64,
    /// Exclusive.
    pub limit: u64,
    pub fragment_beats: u16,
    pub budget_beats: u64,
    pub period_cycles: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegionError {
    #[error("region {0}: fragment size outside 1..=256")]
    Fragment(usize),
    #[error("region {0}: period must be at least 1")]
    Period(usize),
    #[error("region {0}: empty address range")]
    Empty(usize),
    #[error("regions {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("region {0}: fragment of {1} beats can never fit a budget of {2}")]
    FragmentOverBudget(usize, u16, u64),
}

pub fn validate_regions(regions: &[RegionConfig]) -> Result<(), RegionError> {
    for (i, r) in regions.iter().enumerate() {
        if !(1..=256).contains(&r.fragment_beats) {
            return Err(RegionError::Fragment(r.region_id));
        }
        if r.period_cycles == 0 {
            return Err(RegionError::Period(r.region_id));
        }
        if r.base >= r.limit {
            return Err(RegionError::Empty(r.region_id));
        }
        if r.budget_beats > 0 && u64::from(r.fragment_beats) > r.budget_beats {
            return Err(RegionError::FragmentOverBudget(r.region_id, r.fragment_beats, r.budget_beats));
        }
        for q in &regions[..i] {
            if r.base < q.limit && q.base < r.limit {
                return Err(RegionError::Overlap(q.region_id, r.region_id));
            }
        }
    }
    Ok(())
}

/// Index into the region list, or `None` for the unlimited default region.
pub fn decode_region(addr: u64, regions: &[RegionConfig]) -> Option<usize> {
    regions.iter().position(|r| r.base <= addr && addr < r.limit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct BudgetState {
    pub remaining_beats: u64,
    pub period_elapsed: u64,
    pub throttle_level: u32,
    /// Consumption was above the pro-rata line at the last check.
    pub above_line: bool,
}

impl BudgetState {
    pub fn fresh(cfg: &RegionConfig) -> Self {
        BudgetState { remaining_beats: cfg.budget_beats, ..Default::default() }
    }

    pub fn depleted(&self) -> bool {
        self.remaining_beats == 0
    }
}

/// Debits `beats` forwarded beats. Never underflows.
pub fn account_beat(state: &mut BudgetState, beats: u64) {
    state.remaining_beats = state.remaining_beats.saturating_sub(beats);
}

/// Advances the period timer by one cycle; renews (no carry-over) when the
/// period expires. Returns whether a renewal happened.
pub fn renew_period(state: &mut BudgetState, cfg: &RegionConfig) -> bool {
    state.period_elapsed += 1;
    if state.period_elapsed >= cfg.period_cycles {
        *state = BudgetState::fresh(cfg);
        true
    } else {
        false
    }
}

/// Raises the throttle level on each upward crossing of the pro-rata line
/// `consumed > budget * elapsed / period`.
pub fn update_throttle(state: &mut BudgetState, cfg: &RegionConfig) {
    let consumed = cfg.budget_beats - state.remaining_beats.min(cfg.budget_beats);
    // consumed / budget > elapsed / period, in integers
    let above = u128::from(consumed) * u128::from(cfg.period_cycles)
        > u128::from(cfg.budget_beats) * u128::from(state.period_elapsed);
    if above && !state.above_line {
        state.throttle_level += 1;
    }
    state.above_line = above;
}

/// Outstanding-transaction cap for a throttle level: halves per level, floor 1.
pub fn throttled_cap(base: usize, level: u32) -> usize {
    base.checked_shr(level).unwrap_or(0).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ProbeStats {
    pub beats_forwarded: u64,
    pub bytes_forwarded: u64,
    pub completed_txns: u64,
    pub cumulative_latency_cycles: u64,
    pub max_latency_cycles: u64,
}

impl ProbeStats {
    pub fn forward(&mut self, beats: u64, beat_bytes: u64) {
        self.beats_forwarded += beats;
        self.bytes_forwarded += beats * beat_bytes;
    }

    pub fn complete(&mut self, latency: u64) {
        self.completed_txns += 1;
        self.cumulative_latency_cycles += latency;
        self.max_latency_cycles = self.max_latency_cycles.max(latency);
    }

    pub fn average_latency(&self) -> f64 {
        if self.completed_txns == 0 {
            0.0
        } else {
            self.cumulative_latency_cycles as f64 / self.completed_txns as f64
        }
    }
}
