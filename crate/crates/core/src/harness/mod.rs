//! Experiment runner: scenarios, sweeps, metrics, fault timelines, area
//! model and export.

pub mod area;
pub mod export;
pub mod metrics;
pub mod presets;
pub mod runner;
pub mod scenario;

pub use area::{area_estimate, AreaParams, AreaReport};
pub use metrics::{FaultTimeline, ManagerMetrics, MetricsReport};
pub use runner::{build_platform, run_point, run_scenario, run_sweep, HarnessError, RunOutput};
pub use scenario::{ScenarioConfig, ScenarioError, Sweep, SweepPoint};
