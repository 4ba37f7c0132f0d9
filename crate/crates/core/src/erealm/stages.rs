//! Transaction stages, their budgets and fault records.

use serde::{Deserialize, Serialize};

use crate::protocol::{Direction, Tid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    /// Address valid to address ready (both directions).
    AxHs,
    AwToW,
    WFirstHs,
    WData,
    WLastToB,
    BHs,
    ArToR,
    RData,
    RResp,
}

impl Stage {
    pub const WRITE: [Stage; 6] = [Stage::AxHs, Stage::AwToW, Stage::WFirstHs, Stage::WData, Stage::WLastToB, Stage::BHs];
    pub const READ: [Stage; 4] = [Stage::AxHs, Stage::ArToR, Stage::RData, Stage::RResp];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::AxHs => "ax_hs",
            Stage::AwToW => "aw_to_wvalid",
            Stage::WFirstHs => "w_first_hs",
            Stage::WData => "w_first_to_last",
            Stage::WLastToB => "wlast_to_bvalid",
            Stage::BHs => "b_hs",
            Stage::ArToR => "ar_to_rvalid",
            Stage::RData => "r_first_to_last",
            Stage::RResp => "r_resp",
        }
    }

    pub fn is_data(self) -> bool {
        matches!(self, Stage::WData | Stage::RData)
    }

    /// Stages that end with the subordinate's data service still ahead.
    pub fn before_data_done(self) -> bool {
        matches!(self, Stage::AxHs | Stage::AwToW | Stage::WFirstHs | Stage::WData | Stage::ArToR | Stage::RData)
    }

    /// Stages whose progress waits on the subordinate working through
    /// older transactions first.
    pub fn queued(self) -> bool {
        matches!(self, Stage::AxHs | Stage::ArToR | Stage::WLastToB)
    }
}

/// Per-stage budgets in cycles. Data stages are per word and get scaled by
/// the burst length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageBudgets {
    pub aw_hs: u64,
    pub aw_to_wvalid: u64,
    pub w_first_hs: u64,
    pub w_first_to_last_per_word: u64,
    pub wlast_to_bvalid: u64,
    pub b_hs: u64,
    pub ar_hs: u64,
    pub ar_to_rvalid: u64,
    pub r_first_to_last_per_word: u64,
    pub r_resp: u64,
}

impl Default for StageBudgets {
    fn default() -> Self {
        StageBudgets::uniform(1000, 16)
    }
}

impl StageBudgets {
    pub fn uniform(stage: u64, per_word: u64) -> Self {
        StageBudgets {
            aw_hs: stage,
            aw_to_wvalid: stage,
            w_first_hs: stage,
            w_first_to_last_per_word: per_word,
            wlast_to_bvalid: stage,
            b_hs: stage,
            ar_hs: stage,
            ar_to_rvalid: stage,
            r_first_to_last_per_word: per_word,
            r_resp: stage,
        }
    }

    pub fn all_positive(&self) -> bool {
        [
            self.aw_hs,
            self.aw_to_wvalid,
            self.w_first_hs,
            self.w_first_to_last_per_word,
            self.wlast_to_bvalid,
            self.b_hs,
            self.ar_hs,
            self.ar_to_rvalid,
            self.r_first_to_last_per_word,
            self.r_resp,
        ]
        .iter()
        .all(|&b| b >= 1)
    }

    /// Budget of `stage` for a `len`-beat transaction.
    pub fn budget(&self, dir: Direction, stage: Stage, len: u16) -> u64 {
        let len = u64::from(len);
        match (dir, stage) {
            (Direction::Write, Stage::AxHs) => self.aw_hs,
            (Direction::Read, Stage::AxHs) => self.ar_hs,
            (_, Stage::AwToW) => self.aw_to_wvalid,
            (_, Stage::WFirstHs) => self.w_first_hs,
            (_, Stage::WData) => self.w_first_to_last_per_word * len,
            (_, Stage::WLastToB) => self.wlast_to_bvalid,
            (_, Stage::BHs) => self.b_hs,
            (_, Stage::ArToR) => self.ar_to_rvalid,
            (_, Stage::RData) => self.r_first_to_last_per_word * len,
            (_, Stage::RResp) => self.r_resp,
        }
    }

    /// Largest budget any stage can reach for bursts up to `max_len` beats.
    pub fn worst_case(&self, max_len: u16) -> u64 {
        let mut m = 0;
        for s in Stage::WRITE {
            m = m.max(self.budget(Direction::Write, s, max_len));
        }
        for s in Stage::READ {
            m = m.max(self.budget(Direction::Read, s, max_len));
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultCause {
    Timeout,
    TidMismatch,
    SuperfluousHandshake,
    Protocol,
}

impl FaultCause {
    pub fn as_str(self) -> &'static str {
        match self {
            FaultCause::Timeout => "TIMEOUT",
            FaultCause::TidMismatch => "TID_MISMATCH",
            FaultCause::SuperfluousHandshake => "SUPERFLUOUS_HANDSHAKE",
            FaultCause::Protocol => "PROTOCOL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FaultRecord {
    pub cause: FaultCause,
    pub direction: Direction,
    pub tid: Tid,
    /// Compact slot, if the TID was mapped.
    pub slot: Option<usize>,
    pub addr: u64,
    pub stage: Option<Stage>,
    /// Cycle the faulting stage opened.
    pub stage_start: Option<u64>,
    pub detected_at: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_counts() {
        assert_eq!(Stage::WRITE.len(), 6);
        assert_eq!(Stage::READ.len(), 4);
    }

    #[test]
    fn data_budget_scales_with_length() {
        let b = StageBudgets::uniform(20, 1);
        assert_eq!(b.budget(Direction::Read, Stage::RData, 256), 256);
        assert_eq!(b.budget(Direction::Write, Stage::WData, 4), 4);
        assert_eq!(b.budget(Direction::Read, Stage::ArToR, 256), 20);
    }

    #[test]
    fn worst_case_is_largest_stage() {
        let b = StageBudgets::uniform(20, 75);
        assert_eq!(b.worst_case(4), 300);
        assert_eq!(b.worst_case(1), 75);
        assert_eq!(StageBudgets::uniform(20, 1).worst_case(4), 20);
    }

    #[test]
    fn positivity() {
        assert!(StageBudgets::default().all_positive());
        let mut b = StageBudgets::default();
        b.r_resp = 0;
        assert!(!b.all_positive());
    }
}
