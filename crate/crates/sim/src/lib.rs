//! Scenario simulation on top of the core library: potential-field
//! pedestrians, the per-tick sense/predict/replan/track loop, metrics, and
//! deterministic trace output. The `mrnav` binary wraps this.

pub mod cli_support;
pub mod oracle_check;
pub mod pedestrian;
pub mod runner;
pub mod trace;
