//! Linear gate-equivalent area model.
//!
//! Each block contributes `sum(param_i * weight_i) + constant`. Blocks are
//! instantiated once per system (PS), per unit (PU) or per unit and region
//! (PUR).

use serde::{Deserialize, Serialize};

/// Parameter axes, in table order.
pub const AXES: [&str; 8] =
    ["addr_width", "data_width", "num_pending", "num_tids", "buffer_depth", "storage_size", "num_counters", "counter_storage"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scope {
    System,
    Unit,
    UnitRegion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsystem {
    Irealm,
    Erealm,
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Block {
    pub name: &'static str,
    pub subsystem: Subsystem,
    pub scope: Scope,
    pub weights: [f64; 8],
    pub constant: f64,
}

const fn blk(name: &'static str, subsystem: Subsystem, scope: Scope, weights: [f64; 8], constant: f64) -> Block {
    Block { name, subsystem, scope, weights, constant }
}

const Z: [f64; 8] = [0.0; 8];

const fn w(i: usize, v: f64) -> [f64; 8] {
    let mut a = Z;
    a[i] = v;
    a
}

/// Weights in GE.
pub const WEIGHTS: [Block; 19] = [
    blk("cfg_status", Subsystem::Irealm, Scope::UnitRegion, Z, 24.6),
    blk("cfg_budget_period", Subsystem::Irealm, Scope::UnitRegion, Z, 1320.0),
    blk("cfg_region_bound", Subsystem::Irealm, Scope::UnitRegion, w(0, 20.6), 0.0),
    blk("cfg_config", Subsystem::Irealm, Scope::Unit, Z, 83.5),
    blk("cfg_e_status_config", Subsystem::Erealm, Scope::Unit, Z, 9.7),
    blk("cfg_e_rw_budget", Subsystem::Erealm, Scope::Unit, w(6, 770.0), 0.0),
    blk("bus_guard", Subsystem::Shared, Scope::System, Z, 261.0),
    blk("tracking_counters", Subsystem::Irealm, Scope::UnitRegion, Z, 1930.0),
    blk("region_decoders", Subsystem::Irealm, Scope::UnitRegion, w(0, 20.8), 0.0),
    blk("isolate_throttle", Subsystem::Irealm, Scope::Unit, [3.5, 2.7, 9.0, 0.0, 0.0, 0.0, 0.0, 0.0], 267.0),
    blk("burst_splitter", Subsystem::Irealm, Scope::Unit, [49.3, 1.5, 729.0, 0.0, 0.0, 0.0, 0.0, 0.0], 4840.0),
    blk("meta_buffer", Subsystem::Irealm, Scope::Unit, w(0, 38.1), 1310.0),
    blk("write_buffer", Subsystem::Irealm, Scope::Unit, w(5, 264.0), 11.4),
    blk("id_remap", Subsystem::Erealm, Scope::Unit, Z, 0.0),
    blk("stage_counters", Subsystem::Erealm, Scope::Unit, w(7, 129.0), 735.0),
    blk("ht_table", Subsystem::Erealm, Scope::Unit, w(2, 201.0), 0.0),
    blk("ld_table", Subsystem::Erealm, Scope::Unit, w(3, 51.0), 0.0),
    blk("rw_table_ctrl", Subsystem::Erealm, Scope::Unit, w(6, 329.0), 356.0),
    blk("reset_ctrl", Subsystem::Erealm, Scope::Unit, Z, 1270.0),
];

/// Parameters of one subsystem instance family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UnitParams {
    pub units: u32,
    pub regions: u32,
    pub addr_width: f64,
    pub data_width: f64,
    pub num_pending: f64,
    pub num_tids: f64,
    pub buffer_depth: f64,
    /// Derived as buffer depth times data width when absent.
    pub storage_size: Option<f64>,
    /// Derived as pending times TIDs when absent.
    pub num_counters: Option<f64>,
    pub counter_width: f64,
    /// Derived as counters times counter width when absent.
    pub counter_storage: Option<f64>,
}

impl Default for UnitParams {
    fn default() -> Self {
        UnitParams {
            units: 0,
            regions: 0,
            addr_width: 48.0,
            data_width: 64.0,
            num_pending: 0.0,
            num_tids: 0.0,
            buffer_depth: 0.0,
            storage_size: None,
            num_counters: None,
            counter_width: 10.0,
            counter_storage: None,
        }
    }
}

impl UnitParams {
    pub fn vector(&self) -> [f64; 8] {
        let storage = self.storage_size.unwrap_or(self.buffer_depth * self.data_width);
        let counters = self.num_counters.unwrap_or(self.num_pending * self.num_tids);
        let counter_storage = self.counter_storage.unwrap_or(counters * self.counter_width);
        [
            self.addr_width,
            self.data_width,
            self.num_pending,
            self.num_tids,
            self.buffer_depth,
            storage,
            counters,
            counter_storage,
        ]
    }

    /// Parameters outside the range the weights were fitted on.
    pub fn range_warnings(&self) -> Vec<String> {
        let v = self.vector();
        let mut out = Vec::new();
        for (i, lo, hi) in [(0, 32.0, 64.0), (1, 32.0, 64.0), (2, 2.0, 16.0), (4, 2.0, 16.0), (5, 256.0, 8192.0)] {
            if v[i] != 0.0 && !(lo..=hi).contains(&v[i]) {
                out.push(format!("{} = {} outside evaluated range {}..{}", AXES[i], v[i], lo, hi));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AreaParams {
    pub irealm: UnitParams,
    pub erealm: UnitParams,
}

impl AreaParams {
    /// The configuration of the reference mixed-criticality system.
    pub fn hermes() -> Self {
        AreaParams {
            irealm: UnitParams {
                units: 3,
                regions: 2,
                num_pending: 16.0,
                buffer_depth: 4.0,
                ..UnitParams::default()
            },
            erealm: UnitParams {
                units: 1,
                num_pending: 2.0,
                num_tids: 2.0,
                num_counters: Some(20.0),
                counter_storage: Some(200.0),
                ..UnitParams::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockArea {
    pub name: &'static str,
    pub subsystem: Subsystem,
    /// Area of one instance.
    pub each_ge: f64,
    pub instances: u32,
    pub total_ge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaReport {
    pub blocks: Vec<BlockArea>,
    pub irealm_ge: f64,
    pub erealm_ge: f64,
    pub shared_ge: f64,
    pub total_ge: f64,
    pub warnings: Vec<String>,
}

pub fn block_area(b: &Block, params: &[f64; 8]) -> f64 {
    b.weights.iter().zip(params).map(|(w, p)| w * p).sum::<f64>() + b.constant
}

pub fn area_estimate(p: &AreaParams) -> AreaReport {
    let mut blocks = Vec::new();
    let (mut ir, mut er, mut sh) = (0.0, 0.0, 0.0);
    let present = p.irealm.units > 0 || p.erealm.units > 0;
    for b in &WEIGHTS {
        let up = match b.subsystem {
            Subsystem::Erealm => &p.erealm,
            _ => &p.irealm,
        };
        let instances = match b.scope {
            Scope::System => u32::from(present),
            Scope::Unit => up.units,
            Scope::UnitRegion => up.units * up.regions,
        };
        let each = block_area(b, &up.vector());
        let total = each * f64::from(instances);
        match b.subsystem {
            Subsystem::Irealm => ir += total,
            Subsystem::Erealm => er += total,
            Subsystem::Shared => sh += total,
        }
        blocks.push(BlockArea { name: b.name, subsystem: b.subsystem, each_ge: each, instances, total_ge: total });
    }
    let mut warnings = Vec::new();
    if p.irealm.units > 0 {
        warnings.extend(p.irealm.range_warnings().into_iter().map(|w| format!("irealm: {w}")));
    }
    if p.erealm.units > 0 {
        warnings.extend(p.erealm.range_warnings().into_iter().map(|w| format!("erealm: {w}")));
    }
    AreaReport { blocks, irealm_ge: ir, erealm_ge: er, shared_ge: sh, total_ge: ir + er + sh, warnings }
}

/// Rounds to `sig` significant figures.
pub fn round_sig(x: f64, sig: i32) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let mag = x.abs().log10().floor() as i32;
    let f = 10f64.powi(sig - 1 - mag);
    (x * f).round() / f
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_buffer_worked_example() {
        let b = WEIGHTS.iter().find(|b| b.name == "write_buffer").unwrap();
        let p = UnitParams { buffer_depth: 4.0, ..UnitParams::default() };
        let each = block_area(b, &p.vector());
        assert!((each - (264.0 * 256.0 + 11.4)).abs() < 1e-9);
        assert_eq!(round_sig(each / 1000.0, 3), 67.6);
        assert_eq!(round_sig(3.0 * each / 1000.0, 3), 203.0);
    }

    #[test]
    fn derived_parameters() {
        let p = UnitParams { buffer_depth: 8.0, data_width: 32.0, num_pending: 3.0, num_tids: 5.0, counter_width: 12.0, ..UnitParams::default() };
        let v = p.vector();
        assert_eq!(v[5], 256.0);
        assert_eq!(v[6], 15.0);
        assert_eq!(v[7], 180.0);
    }

    #[test]
    fn bus_guard_once() {
        let mut p = AreaParams::hermes();
        let a = area_estimate(&p).shared_ge;
        p.irealm.units = 7;
        assert_eq!(area_estimate(&p).shared_ge, a);
        assert_eq!(a, 261.0);
        assert_eq!(area_estimate(&AreaParams::default()).total_ge, 0.0);
    }

    #[test]
    fn round_sig_values() {
        assert_eq!(round_sig(303_178.5, 3), 303_000.0);
        assert_eq!(round_sig(0.012345, 2), 0.012);
        assert_eq!(round_sig(50.6547, 3), 50.7);
    }

    #[test]
    fn range_warning() {
        let p = UnitParams { units: 1, num_pending: 32.0, ..UnitParams::default() };
        assert_eq!(p.range_warnings().len(), 1);
    }
}
