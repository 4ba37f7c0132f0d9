//! Report types and the fraction-of-isolated metric.
//!
//! Runtime of a manager depends on its workload:
//! - bounded: first activation start to last completion;
//! - periodic with a fixed activation count: nominal start of the second
//!   activation to the last completion, so the first activation is warm-up.
//!   Overruns delay later activations and so lengthen the runtime;
//! - unbounded: not defined; the fraction uses completed bytes over the
//!   same window instead.

use serde::Serialize;

use crate::erealm::{FaultCause, FaultRecord, Stage};
use crate::platform::{ManagerSpec, ManagerStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Workload {
    Bounded,
    Periodic,
    Unbounded,
}

pub fn workload(spec: &ManagerSpec) -> Workload {
    match spec.max_activations {
        _ if spec.bytes_per_activation == 0 => Workload::Unbounded,
        None => Workload::Unbounded,
        Some(n) if spec.activation_period > 0 && n >= 2 => Workload::Periodic,
        Some(_) => Workload::Bounded,
    }
}

/// Runtime in cycles, or `None` unless every activation completed.
pub fn runtime(spec: &ManagerSpec, stats: &ManagerStats) -> Option<f64> {
    let kind = workload(spec);
    let n = spec.max_activations? as usize;
    let acts = &stats.activations;
    if kind == Workload::Unbounded || n == 0 || acts.len() < n || acts.iter().any(|a| a.end.is_none()) {
        return None;
    }
    let end = acts[..n].iter().filter_map(|a| a.end).max()?;
    let from = match kind {
        Workload::Periodic => acts[0].start + spec.activation_period,
        _ => acts[0].start,
    };
    Some(end.saturating_sub(from) as f64)
}

/// Isolated over contended performance of the same workload.
pub fn fraction_of_isolated(spec: &ManagerSpec, contended: &ManagerStats, isolated: &ManagerStats) -> Option<f64> {
    match workload(spec) {
        Workload::Unbounded => {
            (isolated.bytes_completed > 0).then(|| contended.bytes_completed as f64 / isolated.bytes_completed as f64)
        }
        _ => match (runtime(spec, isolated), runtime(spec, contended)) {
            (Some(i), Some(c)) if c > 0.0 => Some(i / c),
            _ => None,
        },
    }
}

/// Mean latency over the second half of completed transactions.
pub fn steady_latency(stats: &ManagerStats) -> f64 {
    let l = &stats.latencies;
    let tail = &l[l.len() / 2..];
    if tail.is_empty() {
        0.0
    } else {
        tail.iter().map(|x| x.1).sum::<u64>() as f64 / tail.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManagerMetrics {
    pub name: String,
    pub enabled: bool,
    pub workload: Workload,
    pub bytes: u64,
    pub txns: u64,
    pub errors: u64,
    pub runtime_cycles: Option<f64>,
    pub mean_lat: f64,
    pub steady_lat: f64,
    pub max_lat: u64,
    /// Beats per cycle over the whole run.
    pub bandwidth: f64,
    pub isolated_runtime: Option<f64>,
    pub isolated_bytes: Option<u64>,
    pub isolated_mean_lat: Option<f64>,
    pub frac_isolated: Option<f64>,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionUtilization {
    pub manager: String,
    pub region: usize,
    pub budget_beats: u64,
    pub period_cycles: u64,
    /// Beats debited in each completed period.
    pub usage: Vec<u64>,
}

impl RegionUtilization {
    pub fn mean_fraction(&self) -> f64 {
        if self.usage.is_empty() || self.budget_beats == 0 {
            return 0.0;
        }
        self.usage.iter().sum::<u64>() as f64 / (self.usage.len() as f64 * self.budget_beats as f64)
    }

    pub fn max_used(&self) -> u64 {
        self.usage.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoggedFault {
    pub unit: String,
    pub record: FaultRecord,
}

/// Timeline of the first fault at one subordinate.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct FaultTimeline {
    pub subordinate: String,
    pub activated_at: Option<u64>,
    /// First cycle the fault is visible on the subordinate's ports.
    pub fault_at: Option<u64>,
    pub detected_at: Option<u64>,
    pub cause: Option<FaultCause>,
    pub stage: Option<Stage>,
    pub stage_start: Option<u64>,
    pub reset_at: Option<u64>,
    pub notified_at: Option<u64>,
}

impl FaultTimeline {
    pub fn fault_to_detect(&self) -> Option<u64> {
        Some(self.detected_at?.checked_sub(self.fault_at?)?)
    }

    /// Cycles the faulting stage had been open at detection.
    pub fn into_stage(&self) -> Option<u64> {
        Some(self.detected_at?.checked_sub(self.stage_start?)?)
    }

    pub fn detect_to_reset(&self) -> Option<u64> {
        Some(self.reset_at?.checked_sub(self.detected_at?)?)
    }

    pub fn fault_to_notified(&self) -> Option<u64> {
        Some(self.notified_at?.checked_sub(self.fault_at?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub sweep_label: String,
    pub sweep_value: Option<f64>,
    pub cycles: u64,
    /// Every bounded manager finished within the cycle limit.
    pub complete: bool,
    pub critical: Option<String>,
    pub managers: Vec<ManagerMetrics>,
    pub regions: Vec<RegionUtilization>,
    pub faults: Vec<LoggedFault>,
    pub timelines: Vec<FaultTimeline>,
}

impl MetricsReport {
    pub fn manager(&self, name: &str) -> Option<&ManagerMetrics> {
        self.managers.iter().find(|m| m.name == name)
    }

    pub fn critical_fraction(&self) -> Option<f64> {
        self.manager(self.critical.as_deref()?)?.frac_isolated
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::platform::{Activation, ManagerKind};

    fn stats(acts: &[(u64, Option<u64>)], bytes: u64) -> ManagerStats {
        ManagerStats {
            bytes_completed: bytes,
            activations: acts.iter().map(|&(start, end)| Activation { start, end }).collect(),
            ..Default::default()
        }
    }

    #[test]
    fn bounded_runtime() {
        let s = ManagerSpec { bytes_per_activation: 64, max_activations: Some(1), ..Default::default() };
        assert_eq!(workload(&s), Workload::Bounded);
        assert_eq!(runtime(&s, &stats(&[(0, Some(100))], 64)), Some(100.0));
        assert_eq!(runtime(&s, &stats(&[(0, None)], 0)), None);
        let f = fraction_of_isolated(&s, &stats(&[(0, Some(400))], 64), &stats(&[(0, Some(100))], 64));
        assert_eq!(f, Some(0.25));
    }

    #[test]
    fn self_ratio_is_one() {
        let s = ManagerSpec { bytes_per_activation: 64, max_activations: Some(1), ..Default::default() };
        let a = stats(&[(3, Some(77))], 64);
        assert_eq!(fraction_of_isolated(&s, &a, &a), Some(1.0));
    }

    #[test]
    fn periodic_skips_warmup() {
        let s = ManagerSpec {
            kind: ManagerKind::PeriodicSchedule,
            bytes_per_activation: 64,
            activation_period: 100,
            max_activations: Some(3),
            ..Default::default()
        };
        assert_eq!(workload(&s), Workload::Periodic);
        let st = stats(&[(0, Some(90)), (100, Some(140)), (200, Some(260))], 0);
        assert_eq!(runtime(&s, &st), Some(160.0));
        // an overrun pushes the later activations back
        let late = stats(&[(0, Some(150)), (150, Some(260)), (260, Some(370))], 0);
        assert_eq!(runtime(&s, &late), Some(270.0));
        assert_eq!(runtime(&s, &stats(&[(0, Some(90)), (100, None)], 0)), None);
        let open = ManagerSpec { max_activations: None, ..s };
        assert_eq!(workload(&open), Workload::Unbounded);
    }

    #[test]
    fn unbounded_uses_bytes() {
        let s = ManagerSpec::default();
        assert_eq!(workload(&s), Workload::Unbounded);
        assert_eq!(fraction_of_isolated(&s, &stats(&[], 30), &stats(&[], 120)), Some(0.25));
        assert_eq!(fraction_of_isolated(&s, &stats(&[], 30), &stats(&[], 0)), None);
    }

    #[test]
    fn timeline_deltas() {
        let t = FaultTimeline {
            fault_at: Some(13),
            detected_at: Some(312),
            stage_start: Some(12),
            reset_at: Some(313),
            notified_at: Some(413),
            ..Default::default()
        };
        assert_eq!(t.fault_to_detect(), Some(299));
        assert_eq!(t.into_stage(), Some(300));
        assert_eq!(t.detect_to_reset(), Some(1));
        assert_eq!(t.fault_to_notified(), Some(400));
        assert_eq!(FaultTimeline::default().fault_to_detect(), None);
    }
}
