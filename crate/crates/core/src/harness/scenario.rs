//! Scenario files: platform, unit programming, run length and sweep axis.
//!
//! Scenarios are TOML. Managers and subordinates are referenced by name.
//! Unit programs are written through the register file by `config_owner`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::erealm::ErealmConfig;
use crate::irealm::IrealmConfig;
use crate::platform::{FaultInjection, ManagerSpec, PlatformSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrealmProgram {
    pub manager: String,
    pub config: IrealmConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErealmProgram {
    pub subordinate: String,
    pub config: ErealmConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegWrite {
    #[serde(default)]
    pub requester: usize,
    pub name: String,
    pub value: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManagerOverride {
    pub name: String,
    pub spec: ManagerSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultCase {
    pub label: String,
    pub subordinate: String,
    pub injection: FaultInjection,
    /// Workload changes for this case only.
    #[serde(default)]
    pub managers: Vec<ManagerOverride>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "snake_case")]
pub enum Sweep {
    /// Fragment size of one manager's unit, applied to the default region
    /// and every configured region.
    Fragmentation {
        manager: String,
        values: Vec<u16>,
        /// Also run with the unit bypassed.
        #[serde(default)]
        unregulated: bool,
    },
    /// Splits `total_beats` per `period` between the first region of two
    /// units as `critical : other = ratio : 1`.
    BudgetRatio {
        critical: String,
        other: String,
        total_beats: u64,
        period: u64,
        ratios: Vec<f64>,
    },
    /// Sets the period of the first region of each listed unit; the budget
    /// is `budget_fraction` of the beats transferable in one period.
    Period {
        managers: Vec<String>,
        values: Vec<u64>,
        #[serde(default = "half")]
        budget_fraction: f64,
    },
    Fault {
        cases: Vec<FaultCase>,
    },
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub platform: PlatformSpec,
    #[serde(default)]
    pub config_owner: usize,
    #[serde(default)]
    pub irealm: Vec<IrealmProgram>,
    #[serde(default)]
    pub erealm: Vec<ErealmProgram>,
    /// Applied after the unit programs.
    #[serde(default)]
    pub registers: Vec<RegWrite>,
    /// Manager whose fraction of isolated performance is the headline.
    #[serde(default)]
    pub critical: String,
    pub max_cycles: u64,
    #[serde(default)]
    pub seed: u64,
    /// Each manager's start is delayed by a seeded draw from `0..=start_jitter`.
    #[serde(default)]
    pub start_jitter: u64,
    /// Run isolated baselines and report fractions.
    #[serde(default = "yes")]
    pub baseline: bool,
    #[serde(default)]
    pub sweep: Option<Sweep>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown manager {0:?}")]
    UnknownManager(String),
    #[error("unknown subordinate {0:?}")]
    UnknownSubordinate(String),
    #[error("manager {0:?} has no iREALM unit")]
    NoIrealm(String),
    #[error("subordinate {0:?} has no eREALM unit")]
    NoErealm(String),
    #[error("duplicate name {0:?}")]
    Duplicate(String),
    #[error("invalid sweep: {0}")]
    Sweep(String),
    #[error("max_cycles must be positive")]
    Cycles,
}

/// One concrete configuration of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub label: String,
    pub value: Option<f64>,
    pub cfg: ScenarioConfig,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn manager_index(&self, name: &str) -> Result<usize, ScenarioError> {
        self.platform
            .managers
            .iter()
            .position(|m| m.name == name)
            .ok_or_else(|| ScenarioError::UnknownManager(name.to_string()))
    }

    pub fn subordinate_index(&self, name: &str) -> Result<usize, ScenarioError> {
        self.platform
            .subordinates
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| ScenarioError::UnknownSubordinate(name.to_string()))
    }

    fn regulated(&self, name: &str) -> Result<usize, ScenarioError> {
        let i = self.manager_index(name)?;
        if self.platform.managers[i].irealm.is_none() {
            return Err(ScenarioError::NoIrealm(name.to_string()));
        }
        Ok(i)
    }

    fn program_mut(&mut self, manager: &str) -> Result<&mut IrealmConfig, ScenarioError> {
        self.regulated(manager)?;
        if !self.irealm.iter().any(|p| p.manager == manager) {
            self.irealm.push(IrealmProgram { manager: manager.to_string(), config: IrealmConfig::default() });
        }
        Ok(&mut self.irealm.iter_mut().find(|p| p.manager == manager).expect("program").config)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.max_cycles == 0 {
            return Err(ScenarioError::Cycles);
        }
        let mut seen = HashSet::new();
        let names = self.platform.managers.iter().map(|m| &m.name).chain(self.platform.subordinates.iter().map(|s| &s.name));
        for n in names {
            if !seen.insert(n) {
                return Err(ScenarioError::Duplicate(n.clone()));
            }
        }
        if !self.critical.is_empty() {
            self.manager_index(&self.critical)?;
        }
        for p in &self.irealm {
            self.regulated(&p.manager)?;
        }
        for p in &self.erealm {
            let j = self.subordinate_index(&p.subordinate)?;
            if self.platform.subordinates[j].erealm.is_none() {
                return Err(ScenarioError::NoErealm(p.subordinate.clone()));
            }
        }
        match &self.sweep {
            None => {}
            Some(Sweep::Fragmentation { manager, values, .. }) => {
                self.regulated(manager)?;
                if let Some(g) = values.iter().find(|&&g| !(1..=256).contains(&g)) {
                    return Err(ScenarioError::Sweep(format!("fragment size {g} outside 1..=256")));
                }
            }
            Some(Sweep::BudgetRatio { critical, other, total_beats, period, ratios }) => {
                self.regulated(critical)?;
                self.regulated(other)?;
                if *total_beats == 0 || *period == 0 {
                    return Err(ScenarioError::Sweep("budget and period must be positive".into()));
                }
                if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                    return Err(ScenarioError::Sweep("ratios must be positive".into()));
                }
            }
            Some(Sweep::Period { managers, values, budget_fraction }) => {
                for m in managers {
                    self.regulated(m)?;
                }
                if values.contains(&0) {
                    return Err(ScenarioError::Sweep("period must be positive".into()));
                }
                if !(*budget_fraction > 0.0 && *budget_fraction <= 1.0) {
                    return Err(ScenarioError::Sweep("budget fraction outside (0, 1]".into()));
                }
            }
            Some(Sweep::Fault { cases }) => {
                for c in cases {
                    self.subordinate_index(&c.subordinate)?;
                    for o in &c.managers {
                        self.manager_index(&o.name)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// The concrete configurations of the sweep, or the scenario itself.
    pub fn expand(&self) -> Result<Vec<SweepPoint>, ScenarioError> {
        self.validate()?;
        let mut base = self.clone();
        base.sweep = None;
        let Some(sweep) = &self.sweep else {
            return Ok(vec![SweepPoint { label: "base".into(), value: None, cfg: base }]);
        };
        let mut out = Vec::new();
        match sweep {
            Sweep::Fragmentation { manager, values, unregulated } => {
                if *unregulated {
                    let mut c = base.clone();
                    c.program_mut(manager)?.bypass = true;
                    out.push(SweepPoint { label: "unregulated".into(), value: None, cfg: c });
                }
                for &g in values {
                    let mut c = base.clone();
                    let p = c.program_mut(manager)?;
                    p.bypass = false;
                    p.default_fragment_beats = g;
                    for r in &mut p.regions {
                        r.fragment_beats = g;
                    }
                    out.push(SweepPoint { label: g.to_string(), value: Some(f64::from(g)), cfg: c });
                }
            }
            Sweep::BudgetRatio { critical, other, total_beats, period, ratios } => {
                for &r in ratios {
                    let mut c = base.clone();
                    let crit = ((*total_beats as f64) * r / (1.0 + r)).round().max(1.0) as u64;
                    let rest = total_beats.saturating_sub(crit).max(1);
                    for (m, b) in [(critical, crit), (other, rest)] {
                        set_first_region(c.program_mut(m)?, b, *period)?;
                    }
                    out.push(SweepPoint { label: format!("{r}"), value: Some(r), cfg: c });
                }
            }
            Sweep::Period { managers, values, budget_fraction } => {
                for &t in values {
                    let mut c = base.clone();
                    let b = ((t as f64) * budget_fraction).floor().max(1.0) as u64;
                    for m in managers {
                        set_first_region(c.program_mut(m)?, b, t)?;
                    }
                    out.push(SweepPoint { label: t.to_string(), value: Some(t as f64), cfg: c });
                }
            }
            Sweep::Fault { cases } => {
                for case in cases {
                    let mut c = base.clone();
                    let j = c.subordinate_index(&case.subordinate)?;
                    c.platform.subordinates[j].spec.fault_plan = Some(case.injection);
                    for o in &case.managers {
                        let i = c.manager_index(&o.name)?;
                        c.platform.managers[i].spec = o.spec.clone();
                    }
                    out.push(SweepPoint { label: case.label.clone(), value: None, cfg: c });
                }
            }
        }
        Ok(out)
    }
}

fn set_first_region(cfg: &mut IrealmConfig, budget: u64, period: u64) -> Result<(), ScenarioError> {
    let r = cfg.regions.first_mut().ok_or_else(|| ScenarioError::Sweep("regulated unit needs a region".into()))?;
    r.budget_beats = budget;
    r.period_cycles = period;
    r.fragment_beats = r.fragment_beats.min(u16::try_from(budget).unwrap_or(u16::MAX)).max(1);
    cfg.bypass = false;
    Ok(())
}
