//! Named, address-mapped configuration registers.
//!
//! The file only stores values and enforces the guard and access rights;
//! the platform turns register contents into unit configuration and
//! supplies the read-only status fields.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use super::guard::{GuardError, GuardState};
use crate::erealm::StageBudgets;
use crate::protocol::Resp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Access {
    Rw,
    Ro,
    /// Write-one command; reads as zero.
    W1,
}

impl Access {
    pub fn as_str(self) -> &'static str {
        match self {
            Access::Rw => "RW",
            Access::Ro => "RO",
            Access::W1 => "W1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RegionField {
    Base,
    Limit,
    Frag,
    Budget,
    Period,
    Remaining,
    Bytes,
    AvgLatency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum IrField {
    Bypass,
    Isolate,
    Throttle,
    WriteBuffer,
    NumPending,
    DefaultFrag,
    ConfigError,
    Isolated,
    Region(usize, RegionField),
}

/// Stage budget indices, in the order of the budget table.
pub const STAGE_BUDGET_NAMES: [&str; 10] = [
    "aw_hs",
    "aw_to_wvalid",
    "w_first_hs",
    "w_first_to_last_per_word",
    "wlast_to_bvalid",
    "b_hs",
    "ar_hs",
    "ar_to_rvalid",
    "r_first_to_last_per_word",
    "r_resp",
];

pub fn budgets_to_array(b: &StageBudgets) -> [u64; 10] {
    [
        b.aw_hs,
        b.aw_to_wvalid,
        b.w_first_hs,
        b.w_first_to_last_per_word,
        b.wlast_to_bvalid,
        b.b_hs,
        b.ar_hs,
        b.ar_to_rvalid,
        b.r_first_to_last_per_word,
        b.r_resp,
    ]
}

pub fn budgets_from_array(a: [u64; 10]) -> StageBudgets {
    StageBudgets {
        aw_hs: a[0],
        aw_to_wvalid: a[1],
        w_first_hs: a[2],
        w_first_to_last_per_word: a[3],
        wlast_to_bvalid: a[4],
        b_hs: a[5],
        ar_hs: a[6],
        ar_to_rvalid: a[7],
        r_first_to_last_per_word: a[8],
        r_resp: a[9],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ErField {
    Enable,
    AutoReset,
    ResetLatency,
    Notify,
    Budget(usize),
    ResetCmd,
    ClearFault,
    FaultValid,
    FaultCause,
    FaultTid,
    FaultAddr,
    FaultStage,
    FaultCycle,
    Tracked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Field {
    Guard,
    Irealm(usize, IrField),
    Erealm(usize, ErField),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegDesc {
    pub name: String,
    pub offset: u64,
    pub width: u8,
    pub reset: u64,
    pub access: Access,
    pub field: Field,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegError {
    #[error(transparent)]
    Guard(#[from] GuardError),
    #[error("no register named {0}")]
    Unknown(String),
    #[error("register {0} is read-only")]
    ReadOnly(String),
}

impl RegError {
    /// Bus response the access would get.
    pub fn resp(&self) -> Resp {
        match self {
            RegError::Unknown(_) => Resp::DecErr,
            _ => Resp::SlvErr,
        }
    }
}

pub const IREALM_BASE: u64 = 0x1000;
pub const IREALM_STRIDE: u64 = 0x1000;
pub const REGION_BASE: u64 = 0x100;
pub const REGION_STRIDE: u64 = 0x80;
pub const EREALM_BASE: u64 = 0x10_0000;
pub const EREALM_STRIDE: u64 = 0x1000;

/// Shape of the register file: regions per iREALM unit and eREALM count.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct RegLayout {
    pub irealm_regions: Vec<usize>,
    pub erealm_units: usize,
}

fn layout_descs(l: &RegLayout) -> Vec<RegDesc> {
    let mut v = vec![RegDesc { name: "guard".into(), offset: 0, width: 16, reset: 0, access: Access::Rw, field: Field::Guard }];
    let mut push = |name: String, offset: u64, width: u8, reset: u64, access: Access, field: Field| {
        v.push(RegDesc { name, offset, width, reset, access, field });
    };
    for (u, &nr) in l.irealm_regions.iter().enumerate() {
        let base = IREALM_BASE + u as u64 * IREALM_STRIDE;
        let p = format!("irealm{u}");
        let f = |x| Field::Irealm(u, x);
        push(format!("{p}.bypass"), base, 1, 1, Access::Rw, f(IrField::Bypass));
        push(format!("{p}.isolate"), base + 0x08, 1, 0, Access::Rw, f(IrField::Isolate));
        push(format!("{p}.throttle"), base + 0x10, 1, 0, Access::Rw, f(IrField::Throttle));
        push(format!("{p}.write_buffer"), base + 0x18, 1, 1, Access::Rw, f(IrField::WriteBuffer));
        push(format!("{p}.num_pending"), base + 0x20, 8, 16, Access::Rw, f(IrField::NumPending));
        push(format!("{p}.default_frag"), base + 0x28, 9, 256, Access::Rw, f(IrField::DefaultFrag));
        push(format!("{p}.config_error"), base + 0x30, 1, 0, Access::Ro, f(IrField::ConfigError));
        push(format!("{p}.isolated"), base + 0x38, 1, 0, Access::Ro, f(IrField::Isolated));
        for r in 0..nr {
            let rb = base + REGION_BASE + r as u64 * REGION_STRIDE;
            let q = format!("{p}.r{r}");
            let g = |x| Field::Irealm(u, IrField::Region(r, x));
            push(format!("{q}.base"), rb, 48, 0, Access::Rw, g(RegionField::Base));
            push(format!("{q}.limit"), rb + 0x08, 48, 0, Access::Rw, g(RegionField::Limit));
            push(format!("{q}.frag"), rb + 0x10, 9, 256, Access::Rw, g(RegionField::Frag));
            push(format!("{q}.budget"), rb + 0x18, 32, 0, Access::Rw, g(RegionField::Budget));
            push(format!("{q}.period"), rb + 0x20, 32, 0, Access::Rw, g(RegionField::Period));
            push(format!("{q}.remaining"), rb + 0x28, 32, 0, Access::Ro, g(RegionField::Remaining));
            push(format!("{q}.bytes"), rb + 0x30, 64, 0, Access::Ro, g(RegionField::Bytes));
            push(format!("{q}.avg_latency"), rb + 0x38, 32, 0, Access::Ro, g(RegionField::AvgLatency));
        }
    }
    let defaults = budgets_to_array(&StageBudgets::default());
    for e in 0..l.erealm_units {
        let base = EREALM_BASE + e as u64 * EREALM_STRIDE;
        let p = format!("erealm{e}");
        let f = |x| Field::Erealm(e, x);
        push(format!("{p}.enable"), base, 1, 0, Access::Rw, f(ErField::Enable));
        push(format!("{p}.auto_reset"), base + 0x08, 1, 1, Access::Rw, f(ErField::AutoReset));
        push(format!("{p}.reset_latency"), base + 0x10, 2, 1, Access::Rw, f(ErField::ResetLatency));
        push(format!("{p}.notify"), base + 0x18, 1, 0, Access::Rw, f(ErField::Notify));
        for (i, n) in STAGE_BUDGET_NAMES.iter().enumerate() {
            push(format!("{p}.budget.{n}"), base + 0x40 + 8 * i as u64, 32, defaults[i], Access::Rw, f(ErField::Budget(i)));
        }
        push(format!("{p}.reset_cmd"), base + 0x100, 1, 0, Access::W1, f(ErField::ResetCmd));
        push(format!("{p}.clear_fault"), base + 0x108, 1, 0, Access::W1, f(ErField::ClearFault));
        push(format!("{p}.fault_valid"), base + 0x110, 1, 0, Access::Ro, f(ErField::FaultValid));
        push(format!("{p}.fault_cause"), base + 0x118, 2, 0, Access::Ro, f(ErField::FaultCause));
        push(format!("{p}.fault_tid"), base + 0x120, 16, 0, Access::Ro, f(ErField::FaultTid));
        push(format!("{p}.fault_addr"), base + 0x128, 48, 0, Access::Ro, f(ErField::FaultAddr));
        push(format!("{p}.fault_stage"), base + 0x130, 4, 0, Access::Ro, f(ErField::FaultStage));
        push(format!("{p}.fault_cycle"), base + 0x138, 64, 0, Access::Ro, f(ErField::FaultCycle));
        push(format!("{p}.tracked"), base + 0x140, 8, 0, Access::Ro, f(ErField::Tracked));
    }
    v
}

fn mask(width: u8) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

#[derive(Debug, Clone)]
pub struct RegisterFile {
    descs: Vec<RegDesc>,
    values: Vec<u64>,
    by_name: HashMap<String, usize>,
    by_field: HashMap<Field, usize>,
    guard: GuardState,
}

impl RegisterFile {
    pub fn new(layout: &RegLayout) -> Self {
        let descs = layout_descs(layout);
        let values = descs.iter().map(|d| d.reset).collect();
        let by_name = descs.iter().enumerate().map(|(i, d)| (d.name.clone(), i)).collect();
        let by_field = descs.iter().enumerate().map(|(i, d)| (d.field, i)).collect();
        RegisterFile { descs, values, by_name, by_field, guard: GuardState::default() }
    }

    pub fn descs(&self) -> &[RegDesc] {
        &self.descs
    }

    pub fn guard(&self) -> &GuardState {
        &self.guard
    }

    pub fn desc(&self, name: &str) -> Result<&RegDesc, RegError> {
        self.by_name.get(name).map(|&i| &self.descs[i]).ok_or_else(|| RegError::Unknown(name.to_string()))
    }

    pub fn name_at(&self, offset: u64) -> Option<&str> {
        self.descs.iter().find(|d| d.offset == offset).map(|d| d.name.as_str())
    }

    /// Stored value of a field, bypassing the guard.
    pub fn value(&self, f: Field) -> u64 {
        self.by_field.get(&f).map_or(0, |&i| self.values[i])
    }

    /// Direct store used by the platform to mirror state, bypassing the guard.
    pub fn set_value(&mut self, f: Field, v: u64) {
        if let Some(&i) = self.by_field.get(&f) {
            self.values[i] = v & mask(self.descs[i].width);
        }
    }

    /// Checks a read and returns the stored value; read-only fields are
    /// filled in by the caller.
    pub fn read(&self, requester: usize, name: &str) -> Result<(Field, u64), RegError> {
        let d = self.desc(name)?;
        if d.field == Field::Guard {
            return Ok((Field::Guard, self.guard.read(requester)?));
        }
        self.guard.check(requester)?;
        let v = if d.access == Access::W1 { 0 } else { self.values[self.by_name[name]] };
        Ok((d.field, v))
    }

    /// Stores a write; returns the field so the caller can apply it.
    pub fn write(&mut self, requester: usize, name: &str, value: u64) -> Result<Field, RegError> {
        let i = *self.by_name.get(name).ok_or_else(|| RegError::Unknown(name.to_string()))?;
        let d = &self.descs[i];
        if d.field == Field::Guard {
            self.guard.write(requester, value)?;
            self.values[i] = super::guard::encode_owner(self.guard.owner());
            return Ok(Field::Guard);
        }
        self.guard.check(requester)?;
        match d.access {
            Access::Ro => Err(RegError::ReadOnly(name.to_string())),
            Access::W1 => Ok(d.field),
            Access::Rw => {
                self.values[i] = value & mask(d.width);
                Ok(d.field)
            }
        }
    }

    /// `name, offset, width, reset, access` table.
    pub fn table(&self) -> String {
        let mut s = String::from("name,offset,width,reset,access\n");
        for d in &self.descs {
            let _ = writeln!(s, "{},0x{:x},{},{},{}", d.name, d.offset, d.width, d.reset, d.access.as_str());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file() -> RegisterFile {
        RegisterFile::new(&RegLayout { irealm_regions: vec![2, 1], erealm_units: 1 })
    }

    #[test]
    fn reset_defaults_inert() {
        let r = file();
        assert_eq!(r.value(Field::Irealm(0, IrField::Bypass)), 1);
        assert_eq!(r.value(Field::Irealm(1, IrField::Bypass)), 1);
        assert_eq!(r.value(Field::Erealm(0, ErField::Enable)), 0);
    }

    #[test]
    fn unclaimed_write_errors() {
        let mut r = file();
        let e = r.write(0, "irealm0.r0.budget", 5).unwrap_err();
        assert_eq!(e.resp(), Resp::SlvErr);
        assert_eq!(r.write(0, "nope", 1).unwrap_err().resp(), Resp::DecErr);
    }

    #[test]
    fn owner_round_trip() {
        let mut r = file();
        r.write(0, "guard", 1).unwrap();
        let names: Vec<(String, u8)> =
            r.descs().iter().filter(|d| d.access == Access::Rw && d.field != Field::Guard).map(|d| (d.name.clone(), d.width)).collect();
        for (i, (n, w)) in names.iter().enumerate() {
            let v = (i as u64 * 7 + 1) & mask(*w);
            r.write(0, n, v).unwrap();
            assert_eq!(r.read(0, n).unwrap().1, v, "{n}");
        }
        assert!(r.write(1, "irealm0.bypass", 0).is_err());
        assert!(matches!(r.write(0, "irealm0.isolated", 1), Err(RegError::ReadOnly(_))));
    }

    #[test]
    fn offsets_unique() {
        let r = file();
        let mut offs: Vec<u64> = r.descs().iter().map(|d| d.offset).collect();
        offs.sort_unstable();
        offs.dedup();
        assert_eq!(offs.len(), r.descs().len());
        assert_eq!(r.name_at(IREALM_BASE), Some("irealm0.bypass"));
        assert!(r.table().lines().count() == r.descs().len() + 1);
    }

    #[test]
    fn budget_array_round_trip() {
        let b = StageBudgets::uniform(20, 75);
        assert_eq!(budgets_from_array(budgets_to_array(&b)), b);
    }
}
