//! Ownership gate over the configuration space.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct GuardState {
    owner: Option<usize>,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum GuardError {
    #[error("configuration space not claimed")]
    Unclaimed,
    #[error("manager {requester} is not the owner (owner {owner})")]
    NotOwner { requester: usize, owner: usize },
}

/// Value written to the guard register: 0 releases, `m + 1` names manager `m`.
pub fn encode_owner(owner: Option<usize>) -> u64 {
    owner.map_or(0, |m| m as u64 + 1)
}

impl GuardState {
    pub fn owner(&self) -> Option<usize> {
        self.owner
    }

    pub fn claimed(&self) -> bool {
        self.owner.is_some()
    }

    /// Checks a non-guard register access.
    pub fn check(&self, requester: usize) -> Result<(), GuardError> {
        match self.owner {
            None => Err(GuardError::Unclaimed),
            Some(o) if o == requester => Ok(()),
            Some(o) => Err(GuardError::NotOwner { requester, owner: o }),
        }
    }

    /// Guard register read. Anyone may read while unclaimed.
    pub fn read(&self, requester: usize) -> Result<u64, GuardError> {
        match self.owner {
            Some(o) if o != requester => Err(GuardError::NotOwner { requester, owner: o }),
            _ => Ok(encode_owner(self.owner)),
        }
    }

    /// Guard register write. Unclaimed: any write claims for the requester.
    /// Claimed: the owner may hand over (`m + 1`) or release (0).
    pub fn write(&mut self, requester: usize, value: u64) -> Result<(), GuardError> {
        match self.owner {
            None => {
                self.owner = Some(requester);
                Ok(())
            }
            Some(o) if o == requester => {
                self.owner = value.checked_sub(1).map(|m| m as usize);
                Ok(())
            }
            Some(o) => Err(GuardError::NotOwner { requester, owner: o }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unclaimed_rejects_everything_but_guard() {
        let g = GuardState::default();
        assert_eq!(g.check(0), Err(GuardError::Unclaimed));
        assert_eq!(g.read(3), Ok(0));
    }

    #[test]
    fn claim_then_exclusive() {
        let mut g = GuardState::default();
        g.write(0, 1).unwrap();
        assert_eq!(g.owner(), Some(0));
        assert!(g.check(0).is_ok());
        assert_eq!(g.check(1), Err(GuardError::NotOwner { requester: 1, owner: 0 }));
        assert!(g.write(1, 2).is_err());
    }

    #[test]
    fn handover_and_release() {
        let mut g = GuardState::default();
        g.write(0, 1).unwrap();
        g.write(0, encode_owner(Some(1))).unwrap();
        assert!(g.check(1).is_ok());
        assert!(g.check(0).is_err());
        g.write(1, 0).unwrap();
        assert!(!g.claimed());
        g.write(2, 0).unwrap();
        assert_eq!(g.owner(), Some(2));
    }
}
