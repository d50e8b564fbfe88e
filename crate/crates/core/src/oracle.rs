//! Brute-force reference searches for validating the planner.
//!
//! These deliberately share only the edge predicate with the A* planner:
//! the search itself is an exhaustive uniform-cost sweep with no heuristic,
//! so an optimality bug in the planner cannot hide here.

use crate::geometry::Vec2;
use crate::planning::{edge_is_safe, state_safe, ObstacleStack, PlannerGrid};
use crate::types::TrackingErrorBound;
use crate::types::{Cell, PlanarState, MOORE_STEPS};

/// Optimal arrival step count on the (cell, time-step) product graph, by
/// exhaustive layer-by-layer expansion (uniform edge costs make this
/// Dijkstra). `None` mirrors the planner's `NoPath`/`StartUnsafe`.
pub fn dijkstra_arrival_steps(
    start: PlanarState,
    goal: Vec2,
    teb: &TrackingErrorBound,
    stack: &ObstacleStack,
    grid: &PlannerGrid,
) -> Option<usize> {
    let spec = &grid.spec;
    let start_cell = spec.world_to_cell(start.pos())?;
    let goal_cell = spec.world_to_cell(goal)?;
    let start_state = PlanarState::new(
        spec.cell_center(start_cell).x,
        spec.cell_center(start_cell).y,
        start.t,
    );
    if !state_safe(&start_state, teb, stack) {
        return None;
    }
    if start_cell == goal_cell {
        return Some(0);
    }

    let (w, h) = (spec.width, spec.height);
    let dt = grid.dt_plan;
    let mut frontier = vec![false; w * h];
    frontier[spec.index(start_cell)] = true;

    for k in 0..grid.max_steps() {
        let t_from = start.t + k as f64 * dt;
        let t_to = t_from + dt;
        let mut next = vec![false; w * h];
        let mut any = false;
        for iy in 0..h {
            for ix in 0..w {
                if !frontier[iy * w + ix] {
                    continue;
                }
                let from_c = spec.cell_center(Cell::new(ix, iy));
                let from = PlanarState::new(from_c.x, from_c.y, t_from);
                for (dx, dy) in MOORE_STEPS {
                    let nx = ix as i64 + dx as i64;
                    let ny = iy as i64 + dy as i64;
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if next[ny * w + nx] {
                        continue;
                    }
                    let to_c = spec.cell_center(Cell::new(nx, ny));
                    let to = PlanarState::new(to_c.x, to_c.y, t_to);
                    if !edge_is_safe(&from, &to, teb, stack, grid.collision_check_step_m) {
                        continue;
                    }
                    if nx == goal_cell.ix && ny == goal_cell.iy {
                        return Some(k + 1);
                    }
                    next[ny * w + nx] = true;
                    any = true;
                }
            }
        }
        if !any {
            return None;
        }
        frontier = next;
    }
    None
}

/// Arrival time for [`dijkstra_arrival_steps`], in seconds.
pub fn dijkstra_arrival_time(
    start: PlanarState,
    goal: Vec2,
    teb: &TrackingErrorBound,
    stack: &ObstacleStack,
    grid: &PlannerGrid,
) -> Option<f64> {
    dijkstra_arrival_steps(start, goal, teb, stack, grid).map(|k| start.t + k as f64 * grid.dt_plan)
}
