//! Helpers shared by the CLI entry point.

use crate::runner::RunMetrics;
use crate::trace::record_line;
use mrnav_core::tracking::{TebReport, TrackerParams};
use mrnav_core::TrackingErrorBound;
use serde::{Deserialize, Serialize};

/// Input document for `validate-teb`.
#[derive(Debug, Clone, Deserialize)]
pub struct ValidateTebRequest {
    #[serde(default)]
    pub tracker: TrackerParams,
    pub teb: TrackingErrorBound,
    pub v_ref: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_steps() -> usize {
    10_000
}

/// Output document for `validate-teb`.
#[derive(Debug, Clone, Serialize)]
pub struct ValidateTebReport {
    pub teb: TrackingErrorBound,
    pub greedy: TebReport,
    pub random: TebReport,
    pub contained: bool,
}

/// Output document for `plan-bench`.
#[derive(Debug, Clone, Serialize)]
pub struct PlanBenchReport {
    pub completed: bool,
    pub rounds: usize,
    pub plan_time_stats: crate::runner::TimingStats,
    pub prediction_time_stats: crate::runner::TimingStats,
}

/// Single-line JSON with the trace float formatting.
pub fn to_json_line<T: Serialize>(value: &T) -> String {
    record_line(value)
}

/// Metrics document written next to the trace.
pub fn metrics_json(metrics: &RunMetrics) -> String {
    record_line(metrics)
}
