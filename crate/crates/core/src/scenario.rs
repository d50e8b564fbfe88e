//! Scenario configuration: the JSON schema describing a run, plus exhaustive
//! validation.
//!
//! Lengths are meters, times seconds, probabilities unitless. Points are
//! `[x, y]` arrays.

use crate::geometry::{Aabb, Vec2};
use crate::tracking::TrackerParams;
use crate::types::{GridSpec, KeepOutSpec, TrackingErrorBound};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Rectangular world region; grids and agents live inside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub origin: Vec2,
    pub size: Vec2,
}

impl WorldSpec {
    pub fn bounds(&self) -> Aabb {
        Aabb::new(self.origin, self.origin + self.size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotConfig {
    pub start: Vec2,
    pub goal: Vec2,
    pub teb: TrackingErrorBound,
    /// 1-based; priority 1 plans first.
    pub priority: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanConfig {
    pub start: Vec2,
    /// Where the simulated pedestrian actually walks.
    pub true_goal: Vec2,
    /// Goal hypotheses available to the predictor.
    pub candidate_goals: Vec<Vec2>,
    /// Set when `true_goal` is deliberately absent from `candidate_goals`.
    #[serde(default)]
    pub unmodeled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionConfig {
    pub horizon_s: f64,
    pub dt: f64,
    pub resolution: f64,
    pub beta_grid: Vec<f64>,
}

impl PredictionConfig {
    pub fn horizon_steps(&self) -> usize {
        (self.horizon_s / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub resolution: f64,
    pub collision_check_step_m: f64,
    pub v_max_plan: f64,
}

fn default_replan_period() -> f64 {
    1.0
}

fn default_goal_tolerance() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub seed: u64,
    pub max_duration_s: f64,
    #[serde(default = "default_replan_period")]
    pub replan_period_s: f64,
    #[serde(default = "default_goal_tolerance")]
    pub goal_tolerance_m: f64,
}

/// Potential-field pedestrian constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedestrianParams {
    /// Goal attraction gain, 1/s.
    pub k_attract: f64,
    /// Inverse-square repulsion gain, m^3/s.
    pub k_repulse: f64,
    /// Neighbors beyond this distance exert no push, m.
    pub repulse_radius: f64,
    /// Walking speed cap, m/s.
    pub v_max_ped: f64,
    /// Std-like half-width of optional per-axis velocity jitter, m/s.
    #[serde(default)]
    pub jitter: f64,
}

impl Default for PedestrianParams {
    fn default() -> Self {
        PedestrianParams {
            k_attract: 0.5,
            k_repulse: 1.0,
            repulse_radius: 2.0,
            v_max_ped: 1.0,
            jitter: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub world: WorldSpec,
    #[serde(default)]
    pub static_obstacles: Vec<Aabb>,
    pub robots: Vec<RobotConfig>,
    #[serde(default)]
    pub humans: Vec<HumanConfig>,
    pub p_th: f64,
    pub prediction: PredictionConfig,
    pub planner: PlannerConfig,
    pub sim: SimConfig,
    #[serde(default)]
    pub pedestrians: PedestrianParams,
    #[serde(default)]
    pub keepout: KeepOutSpec,
    #[serde(default)]
    pub tracker: TrackerParams,
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("p_th must lie in (0, 1), got {0}")]
    PTh(f64),
    #[error("robots[].priority values must form a permutation of 1..={0}")]
    Priorities(usize),
    #[error("world.size components must be positive")]
    WorldSize,
    #[error("prediction.{0} must be positive")]
    PredictionPositive(&'static str),
    #[error("prediction.horizon_s must be an integer multiple of prediction.dt")]
    HorizonNotMultiple,
    #[error("prediction.beta_grid must be nonempty with nonnegative entries")]
    BetaGrid,
    #[error("planner.{0} must be positive")]
    PlannerPositive(&'static str),
    #[error("sim.{0} must be positive")]
    SimPositive(&'static str),
    #[error("sim.replan_period_s must not exceed the planning step (planner.resolution / planner.v_max_plan)")]
    ReplanPeriodTooLong,
    #[error("robots[{0}].teb half-widths must be positive")]
    Teb(usize),
    #[error("robots[{0}].{1} lies outside the world bounds")]
    RobotOutOfWorld(usize, &'static str),
    #[error("humans[{0}].{1} lies outside the world bounds")]
    HumanOutOfWorld(usize, &'static str),
    #[error("humans[{0}].candidate_goals must be nonempty")]
    NoCandidates(usize),
    #[error("humans[{0}].true_goal is not among candidate_goals; set unmodeled: true if intended")]
    TrueGoalNotCandidate(usize),
    #[error("static_obstacles[{0}] is inverted (min > max)")]
    BadObstacle(usize),
    #[error("keepout margins must be nonnegative")]
    Keepout,
    #[error("pedestrians.{0} must be positive")]
    PedestrianPositive(&'static str),
    #[error("tracker parameters invalid: need a_max > d_max >= 0, dt_sim > 0, k_p > 0")]
    Tracker,
    #[error("tracker.dt_sim must equal sim.dt (the tracker integrates once per tick)")]
    TrackerDtMismatch,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Grid for human predictions, covering the world region.
    pub fn prediction_grid(&self) -> GridSpec {
        grid_covering(&self.world, self.prediction.resolution)
    }

    /// Grid for the planner, covering the world region.
    pub fn planner_grid_spec(&self) -> GridSpec {
        grid_covering(&self.world, self.planner.resolution)
    }

    /// Every problem with the config, not just the first.
    pub fn validate(&self) -> Result<(), Vec<ConfigError>> {
        let mut errors = Vec::new();
        let world = self.world.bounds();

        if self.world.size.x <= 0.0 || self.world.size.y <= 0.0 {
            errors.push(ConfigError::WorldSize);
        }
        if !(self.p_th > 0.0 && self.p_th < 1.0) {
            errors.push(ConfigError::PTh(self.p_th));
        }

        let priorities: Vec<u32> = self.robots.iter().map(|r| r.priority).collect();
        if crate::coordination::PriorityOrder::from_priorities(&priorities).is_err() {
            errors.push(ConfigError::Priorities(self.robots.len()));
        }

        for (field, v) in [
            ("horizon_s", self.prediction.horizon_s),
            ("dt", self.prediction.dt),
            ("resolution", self.prediction.resolution),
        ] {
            if v <= 0.0 {
                errors.push(ConfigError::PredictionPositive(field));
            }
        }
        if self.prediction.dt > 0.0 {
            let steps = self.prediction.horizon_s / self.prediction.dt;
            if (steps - steps.round()).abs() > 1e-9 || steps.round() < 1.0 {
                errors.push(ConfigError::HorizonNotMultiple);
            }
        }
        if self.prediction.beta_grid.is_empty()
            || self.prediction.beta_grid.iter().any(|&b| b < 0.0)
        {
            errors.push(ConfigError::BetaGrid);
        }

        for (field, v) in [
            ("resolution", self.planner.resolution),
            (
                "collision_check_step_m",
                self.planner.collision_check_step_m,
            ),
            ("v_max_plan", self.planner.v_max_plan),
        ] {
            if v <= 0.0 {
                errors.push(ConfigError::PlannerPositive(field));
            }
        }

        for (field, v) in [
            ("dt", self.sim.dt),
            ("max_duration_s", self.sim.max_duration_s),
            ("replan_period_s", self.sim.replan_period_s),
            ("goal_tolerance_m", self.sim.goal_tolerance_m),
        ] {
            if v <= 0.0 {
                errors.push(ConfigError::SimPositive(field));
            }
        }
        // The round-to-round keep-out argument needs a fresh sweep at least
        // once per planning step.
        if self.planner.v_max_plan > 0.0
            && self.sim.replan_period_s > self.planner.resolution / self.planner.v_max_plan + 1e-9
        {
            errors.push(ConfigError::ReplanPeriodTooLong);
        }

        for (i, r) in self.robots.iter().enumerate() {
            if r.teb.half_width_x <= 0.0 || r.teb.half_width_y <= 0.0 {
                errors.push(ConfigError::Teb(i));
            }
            if !world.contains(r.start) {
                errors.push(ConfigError::RobotOutOfWorld(i, "start"));
            }
            if !world.contains(r.goal) {
                errors.push(ConfigError::RobotOutOfWorld(i, "goal"));
            }
        }

        for (i, hmn) in self.humans.iter().enumerate() {
            if !world.contains(hmn.start) {
                errors.push(ConfigError::HumanOutOfWorld(i, "start"));
            }
            if !world.contains(hmn.true_goal) {
                errors.push(ConfigError::HumanOutOfWorld(i, "true_goal"));
            }
            if hmn.candidate_goals.is_empty() {
                errors.push(ConfigError::NoCandidates(i));
            }
            let modeled = hmn
                .candidate_goals
                .iter()
                .any(|g| g.dist(hmn.true_goal) < 1e-9);
            if !modeled && !hmn.unmodeled {
                errors.push(ConfigError::TrueGoalNotCandidate(i));
            }
        }

        for (i, b) in self.static_obstacles.iter().enumerate() {
            if b.min.x > b.max.x || b.min.y > b.max.y {
                errors.push(ConfigError::BadObstacle(i));
            }
        }

        if self.keepout.robot_robot_margin < 0.0 || self.keepout.robot_human_margin < 0.0 {
            errors.push(ConfigError::Keepout);
        }

        for (field, v) in [
            ("k_attract", self.pedestrians.k_attract),
            ("k_repulse", self.pedestrians.k_repulse),
            ("repulse_radius", self.pedestrians.repulse_radius),
            ("v_max_ped", self.pedestrians.v_max_ped),
        ] {
            if v <= 0.0 {
                errors.push(ConfigError::PedestrianPositive(field));
            }
        }

        if !self.tracker.validate() {
            errors.push(ConfigError::Tracker);
        }
        if (self.tracker.dt_sim - self.sim.dt).abs() > 1e-9 {
            errors.push(ConfigError::TrackerDtMismatch);
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

fn grid_covering(world: &WorldSpec, resolution: f64) -> GridSpec {
    let w = ((world.size.x / resolution) + 1e-9).floor().max(1.0) as usize;
    let h = ((world.size.y / resolution) + 1e-9).floor().max(1.0) as usize;
    GridSpec::new(world.origin, resolution, w, h)
}
