//! Time-varying grid search over a stack of obstacle maps.
//!
//! The planner runs A* on the (cell, time-step) product graph with
//! 8-connected moves plus wait, one move per time step. Every edge is
//! collision-checked by sampling along it at a fixed spatial step against
//! three obstacle classes: static boxes, higher-priority robot tubes, and
//! human prediction stacks thresholded at `p_th`. Cost is arrival time; the
//! heuristic is the per-axis straight-line distance over the per-axis speed
//! limit (i.e. the exact free-space step count times the step length), which
//! is admissible and consistent on this graph.

use crate::coordination::{TimeVaryingTube, TubeSlice};
use crate::geometry::{Aabb, Vec2};
use crate::prediction::collision_prob_marginal;
use crate::types::{
    teb_box_at, GridSpec, KeepOutSpec, PlanarState, PredictionStack, TrackingErrorBound,
    Trajectory, MOORE_STEPS,
};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

/// Everything a single robot plans against.
///
/// Tube boxes already include the robot-robot keep-out margin (applied once,
/// at tube construction); the planner checks its bare TEB box against them.
/// The robot-human margin is applied here, around the TEB box, when querying
/// prediction mass.
pub struct ObstacleStack<'a> {
    pub static_boxes: &'a [Aabb],
    pub tubes: &'a [TimeVaryingTube],
    /// Boxes that no planned edge may sweep over while their time window is
    /// active: the parked positions of robots that have not replanned yet.
    /// Unlike tubes, these are checked against the edge's swept hull, so the
    /// published tube of the resulting plan is guaranteed clear of them.
    pub presence: &'a [TubeSlice],
    pub humans: &'a [PredictionStack],
    /// Time the human prediction stacks are rooted at; step `tau` of a stack
    /// covers `prediction_t0 + tau * stack.dt`.
    pub prediction_t0: f64,
    /// Maximum tolerated marginal collision probability at any single state.
    pub p_th: f64,
    pub keepout: KeepOutSpec,
}

impl ObstacleStack<'_> {
    pub const EMPTY: ObstacleStack<'static> = ObstacleStack {
        static_boxes: &[],
        tubes: &[],
        presence: &[],
        humans: &[],
        prediction_t0: 0.0,
        p_th: 0.05,
        keepout: KeepOutSpec {
            robot_robot_margin: 0.0,
            robot_human_margin: 0.0,
        },
    };

    /// Prediction step for a state at time `t`: nearest step with ties toward
    /// the later step, clamped up to 1. `None` beyond the horizon (humans
    /// impose no constraint there) or when there are no humans.
    fn prediction_step(&self, t: f64) -> Option<usize> {
        let stack = self.humans.first()?;
        let tau = ((t - self.prediction_t0) / stack.dt + 0.5).floor() as i64;
        let tau = tau.max(1);
        (tau as usize <= stack.horizon_steps()).then_some(tau as usize)
    }

    /// Marginal collision probability against all humans at time `t`, or 0
    /// beyond the prediction horizon.
    pub fn human_collision_prob(&self, s: &PlanarState, teb: &TrackingErrorBound) -> f64 {
        match self.prediction_step(s.t) {
            Some(tau) => {
                collision_prob_marginal(s, teb, self.keepout.robot_human_margin, self.humans, tau)
            }
            None => 0.0,
        }
    }
}

/// True iff the TEB box at `s` overlaps no static box, no tube slice active
/// at `s.t`, and the marginal human collision probability at the nearest
/// prediction step stays within `p_th`.
pub fn state_safe(s: &PlanarState, teb: &TrackingErrorBound, stack: &ObstacleStack) -> bool {
    let own = teb_box_at(s, teb, 0.0);
    if stack.static_boxes.iter().any(|b| own.intersects(b)) {
        return false;
    }
    for tube in stack.tubes {
        if let Some(slice) = tube.slice_at(s.t) {
            if own.intersects(&slice.bounds) {
                return false;
            }
        }
    }
    stack.human_collision_prob(s, teb) <= stack.p_th
}

/// Check a motion segment by sampling it (endpoint included, start excluded)
/// at most `step_m` apart in space; wait segments sample the end state.
/// Presence boxes are checked against the segment's swept hull, because the
/// tube slice this edge turns into is exactly that hull.
pub fn edge_is_safe(
    from: &PlanarState,
    to: &PlanarState,
    teb: &TrackingErrorBound,
    stack: &ObstacleStack,
    step_m: f64,
) -> bool {
    if !stack.presence.is_empty() {
        let hull = teb_box_at(from, teb, 0.0).hull(&teb_box_at(to, teb, 0.0));
        for p in stack.presence {
            if from.t < p.t_end && p.t_start < to.t && hull.intersects(&p.bounds) {
                return false;
            }
        }
    }
    let dist = from.pos().dist(to.pos());
    let n = ((dist / step_m).ceil() as usize).max(1);
    for i in 1..=n {
        let a = i as f64 / n as f64;
        let s = PlanarState::new(
            from.x + (to.x - from.x) * a,
            from.y + (to.y - from.y) * a,
            from.t + (to.t - from.t) * a,
        );
        if !state_safe(&s, teb, stack) {
            return false;
        }
    }
    true
}

/// Search grid and kinematic limits for the planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerGrid {
    pub spec: GridSpec,
    /// Per-axis speed limit of the planning model.
    pub v_max_plan: f64,
    /// One grid move per step: resolution / v_max_plan.
    pub dt_plan: f64,
    /// Spatial sampling step for edge collision checks.
    pub collision_check_step_m: f64,
    /// Search gives up past this horizon.
    pub plan_horizon_s: f64,
}

impl PlannerGrid {
    pub fn new(spec: GridSpec, v_max_plan: f64, collision_check_step_m: f64) -> Self {
        assert!(v_max_plan > 0.0 && collision_check_step_m > 0.0);
        PlannerGrid {
            spec,
            v_max_plan,
            dt_plan: spec.resolution / v_max_plan,
            collision_check_step_m,
            plan_horizon_s: 60.0,
        }
    }

    pub fn max_steps(&self) -> usize {
        (self.plan_horizon_s / self.dt_plan).ceil() as usize
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("start state violates the obstacle stack")]
    StartUnsafe,
    #[error("no safe path within the planning horizon")]
    NoPath,
}

#[derive(Clone, Copy)]
struct OpenNode {
    f: f64,
    h: f64,
    ix: usize,
    iy: usize,
    k: usize,
    arena: usize,
}

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenNode {}

impl Ord for OpenNode {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert so the smallest
        // (f, h, ix, iy, k) pops first. The full lexicographic key makes
        // expansion order, and therefore traces, reproducible.
        other
            .f
            .total_cmp(&self.f)
            .then(other.h.total_cmp(&self.h))
            .then(other.ix.cmp(&self.ix))
            .then(other.iy.cmp(&self.iy))
            .then(other.k.cmp(&self.k))
    }
}

impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Plan a timestamped trajectory from `start` to the cell containing `goal`.
///
/// The start position is snapped to its cell center; samples are cell
/// centers `dt_plan` apart starting at `start.t`. Every edge of the returned
/// trajectory passed the sampled safety check, so its max marginal collision
/// probability stays within `p_th`.
pub fn plan(
    start: PlanarState,
    goal: Vec2,
    teb: &TrackingErrorBound,
    stack: &ObstacleStack,
    grid: &PlannerGrid,
) -> Result<Trajectory, PlanError> {
    let spec = &grid.spec;
    let start_cell = spec
        .world_to_cell(start.pos())
        .ok_or(PlanError::StartUnsafe)?;
    let goal_cell = spec.world_to_cell(goal).ok_or(PlanError::NoPath)?;

    let start_state = PlanarState::new(
        spec.cell_center(start_cell).x,
        spec.cell_center(start_cell).y,
        start.t,
    );
    if !state_safe(&start_state, teb, stack) {
        return Err(PlanError::StartUnsafe);
    }

    let k_max = grid.max_steps();
    let dt = grid.dt_plan;
    let w = spec.width;
    let h = spec.height;

    let heuristic = |ix: usize, iy: usize| -> f64 {
        let dx = (ix as i64 - goal_cell.ix as i64).unsigned_abs();
        let dy = (iy as i64 - goal_cell.iy as i64).unsigned_abs();
        dx.max(dy) as f64 * dt
    };

    // Every path to (cell, k) costs exactly k steps, so the first insertion
    // of a node is optimal and a seen-set at push time suffices.
    let mut seen = vec![false; w * h * (k_max + 1)];
    let node_id = |ix: usize, iy: usize, k: usize| (k * h + iy) * w + ix;

    // Arena of (cell, k, parent) for path reconstruction.
    let mut arena: Vec<(usize, usize, usize, usize)> = Vec::new();
    let mut open = BinaryHeap::new();

    seen[node_id(start_cell.ix, start_cell.iy, 0)] = true;
    arena.push((start_cell.ix, start_cell.iy, 0, usize::MAX));
    open.push(OpenNode {
        f: heuristic(start_cell.ix, start_cell.iy),
        h: heuristic(start_cell.ix, start_cell.iy),
        ix: start_cell.ix,
        iy: start_cell.iy,
        k: 0,
        arena: 0,
    });

    while let Some(node) = open.pop() {
        if node.ix == goal_cell.ix && node.iy == goal_cell.iy {
            // Reconstruct cells start..goal.
            let mut cells = Vec::new();
            let mut cursor = node.arena;
            while cursor != usize::MAX {
                let (ix, iy, k, parent) = arena[cursor];
                cells.push((ix, iy, k));
                cursor = parent;
            }
            cells.reverse();
            let samples = cells
                .into_iter()
                .map(|(ix, iy, k)| {
                    let c = spec.cell_center(crate::types::Cell::new(ix, iy));
                    PlanarState::new(c.x, c.y, start.t + k as f64 * dt)
                })
                .collect();
            return Ok(Trajectory::new(samples));
        }
        if node.k == k_max {
            continue;
        }

        let from = PlanarState::new(
            spec.cell_center(crate::types::Cell::new(node.ix, node.iy))
                .x,
            spec.cell_center(crate::types::Cell::new(node.ix, node.iy))
                .y,
            start.t + node.k as f64 * dt,
        );
        for (dx, dy) in MOORE_STEPS {
            let nx = node.ix as i64 + dx as i64;
            let ny = node.iy as i64 + dy as i64;
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            let nk = node.k + 1;
            let id = node_id(nx, ny, nk);
            if seen[id] {
                continue;
            }
            let to = PlanarState::new(
                spec.cell_center(crate::types::Cell::new(nx, ny)).x,
                spec.cell_center(crate::types::Cell::new(nx, ny)).y,
                start.t + nk as f64 * dt,
            );
            if !edge_is_safe(&from, &to, teb, stack, grid.collision_check_step_m) {
                continue;
            }
            seen[id] = true;
            arena.push((nx, ny, nk, node.arena));
            let hh = heuristic(nx, ny);
            open.push(OpenNode {
                f: nk as f64 * dt + hh,
                h: hh,
                ix: nx,
                iy: ny,
                k: nk,
                arena: arena.len() - 1,
            });
        }
    }

    Err(PlanError::NoPath)
}

/// Whether the active trajectory should be regenerated now: the replan timer
/// elapsed, the trajectory expired short of the goal, or any remaining sample
/// violates the current obstacle stack.
pub fn replan_needed(
    traj: &Trajectory,
    now: f64,
    teb: &TrackingErrorBound,
    stack: &ObstacleStack,
    goal: Vec2,
    goal_tolerance: f64,
    timer_elapsed: bool,
) -> bool {
    if timer_elapsed {
        return true;
    }
    let last = traj.last();
    if now > last.t && last.pos().dist(goal) > goal_tolerance {
        return true;
    }
    traj.samples()
        .iter()
        .filter(|s| s.t >= now)
        .any(|s| !state_safe(s, teb, stack))
}
