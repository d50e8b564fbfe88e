//! Scenario runner: sense -> predict -> replan -> track, once per tick.
//!
//! The loop is single-threaded and authoritative. Per-human prediction fans
//! out across threads within a tick and merges in human-index order, so it
//! cannot perturb determinism. Randomness comes from two named sub-streams
//! of the run seed (pedestrians, disturbances); planning is deterministic.
//!
//! Replanning runs as synchronized rounds: all new trajectories start at the
//! next planning-step boundary, and every robot switches references there
//! simultaneously. Between rounds the fleet flies the previous round's
//! trajectories, which the previous round's tubes cover out to infinity, so
//! pairwise keep-out holds across the switch. A robot with no safe plan
//! parks and publishes a stationary tube.

use crate::pedestrian::{pedestrian_rng, pedestrian_step, Pedestrian};
use crate::trace::TraceWriter;
use mrnav_core::coordination::{
    replan_round, tube_clearance, tube_conflicts, tube_from, InProcessBus, PlanRequest,
    PriorityOrder, RoundContext, TimeVaryingTube, TrajectoryBus,
};
use mrnav_core::planning::{replan_needed, ObstacleStack, PlannerGrid};
use mrnav_core::prediction::{
    infer_action, predict, prediction_entropy, update_posterior, HumanActionSet, IntentPosterior,
};
use mrnav_core::rng::substream;
use mrnav_core::scenario::{ConfigError, ScenarioConfig};
use mrnav_core::tracking::{
    reference_at, reference_velocity_at, step_tracker, tracking_control, RelativeState,
};
use mrnav_core::types::GridSpec;
use mrnav_core::{
    PlanarState, PredictionStack, RobotPhysicalState, TrackingErrorBound, Trajectory, Vec2,
};
use rand::RngExt;
use serde::Serialize;
use std::io::Write;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid scenario:\n{}", .0.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<ConfigError>),
    #[error("trace output: {0}")]
    Io(#[from] std::io::Error),
}

/// Summary statistics over a series of wall-clock measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct TimingStats {
    pub count: usize,
    pub mean_s: f64,
    pub std_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    pub median_s: f64,
}

impl TimingStats {
    fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return TimingStats::default();
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        TimingStats {
            count: samples.len(),
            mean_s: mean,
            std_s: var.sqrt(),
            min_s: sorted[0],
            max_s: *sorted.last().unwrap(),
            median_s: sorted[sorted.len() / 2],
        }
    }
}

/// Deterministic safety/progress counters; timing-free so they can appear in
/// trace snapshots. Distances use `inf` (JSON `null`) when no pair exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SafetySnapshot {
    pub min_tube_clearance: f64,
    pub min_robot_human_distance: f64,
    pub max_planned_collision_prob: f64,
    pub planned_pth_violations: usize,
    pub tube_intersections: usize,
    pub containment_violations: usize,
    pub blocked_plans: usize,
    pub prediction_underflows: usize,
}

impl Default for SafetySnapshot {
    fn default() -> Self {
        SafetySnapshot {
            min_tube_clearance: f64::INFINITY,
            min_robot_human_distance: f64::INFINITY,
            max_planned_collision_prob: 0.0,
            planned_pth_violations: 0,
            tube_intersections: 0,
            containment_violations: 0,
            blocked_plans: 0,
            prediction_underflows: 0,
        }
    }
}

/// Everything a run reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub completed: bool,
    pub duration_s: f64,
    pub ticks: usize,
    pub rounds: usize,
    /// Arrival time per robot; `null` for robots that never arrived.
    pub arrival_times: Vec<Option<f64>>,
    #[serde(flatten)]
    pub safety: SafetySnapshot,
    pub plan_time_stats: TimingStats,
    pub prediction_time_stats: TimingStats,
}

#[derive(Serialize)]
struct HeaderRecord<'a> {
    #[serde(rename = "type")]
    kind: &'a str,
    version: u32,
    seed: u64,
    sim_dt: f64,
    robots: usize,
    humans: usize,
}

#[derive(Serialize)]
struct AgentState {
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
}

#[derive(Serialize)]
struct PosteriorSummary {
    expected_beta: f64,
    map_goal: usize,
    map_beta: f64,
    map_weight: f64,
}

#[derive(Serialize)]
struct BusRecord {
    robot_id: usize,
    round: u64,
    trajectory: Vec<[f64; 3]>,
    teb: TrackingErrorBound,
}

#[derive(Serialize)]
struct TubeRecord {
    robot_id: usize,
    slices: Vec<[f64; 6]>,
}

#[derive(Serialize)]
struct RoundRecord {
    round: u64,
    messages: Vec<BusRecord>,
    tubes: Vec<TubeRecord>,
    blocked: Vec<usize>,
}

#[derive(Serialize)]
struct TickRecord {
    #[serde(rename = "type")]
    kind: &'static str,
    tick: usize,
    t: f64,
    robots: Vec<AgentState>,
    humans: Vec<AgentState>,
    #[serde(skip_serializing_if = "Option::is_none")]
    posteriors: Option<Vec<PosteriorSummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    entropies: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    round: Option<RoundRecord>,
    metrics: SafetySnapshot,
}

struct RobotState {
    physical: RobotPhysicalState,
    active: Option<Trajectory>,
    pending: Option<Trajectory>,
    goal: Vec2,
    teb: TrackingErrorBound,
}

impl RobotState {
    /// Reference trajectory in force at time `t`, promoting a pending plan
    /// whose start boundary has been reached.
    fn current(&mut self, t: f64) -> &Trajectory {
        if let Some(p) = &self.pending {
            if p.first().t <= t + 1e-9 {
                self.active = self.pending.take();
            }
        }
        self.active.as_ref().expect("robot has no trajectory yet")
    }

    /// Where the reference will be at the aligned restart time `t_start`.
    fn restart_state(&self, t_start: f64) -> Option<PlanarState> {
        let traj = self.pending.as_ref().or(self.active.as_ref())?;
        let r = reference_at(traj, t_start);
        Some(PlanarState::new(r.x, r.y, t_start))
    }
}

/// Clamp a point into the grid so prediction can always start.
fn clamp_into_grid(spec: &GridSpec, p: Vec2) -> Vec2 {
    let eps = spec.resolution * 1e-6;
    let max_x = spec.origin.x + spec.resolution * spec.width as f64 - eps;
    let max_y = spec.origin.y + spec.resolution * spec.height as f64 - eps;
    Vec2::new(
        p.x.clamp(spec.origin.x, max_x),
        p.y.clamp(spec.origin.y, max_y),
    )
}

fn every(period_s: f64, dt: f64) -> usize {
    ((period_s / dt).round() as usize).max(1)
}

/// Run a scenario to completion or timeout, streaming a trace when given a
/// sink. See the module docs for the loop structure.
pub fn run_scenario(
    config: &ScenarioConfig,
    trace_out: Option<Box<dyn Write>>,
) -> Result<RunMetrics, RunError> {
    config.validate().map_err(RunError::Validation)?;

    let dt = config.sim.dt;
    let obs_every = every(config.prediction.dt, dt);
    let replan_every = every(config.sim.replan_period_s, dt);
    let max_ticks = (config.sim.max_duration_s / dt).ceil() as usize;
    let horizon_steps = config.prediction.horizon_steps();
    let pred_spec = config.prediction_grid();
    let planner_grid = PlannerGrid::new(
        config.planner_grid_spec(),
        config.planner.v_max_plan,
        config.planner.collision_check_step_m,
    );
    let order = PriorityOrder::from_priorities(
        &config.robots.iter().map(|r| r.priority).collect::<Vec<_>>(),
    )
    .expect("validated priorities");
    let actions = HumanActionSet::new(config.prediction.resolution, config.prediction.dt);
    let world = config.world.bounds();

    let mut trace = trace_out.map(TraceWriter::new);
    if let Some(w) = trace.as_mut() {
        w.write(&HeaderRecord {
            kind: "header",
            version: 1,
            seed: config.sim.seed,
            sim_dt: dt,
            robots: config.robots.len(),
            humans: config.humans.len(),
        })?;
    }

    let mut ped_rng = pedestrian_rng(config.sim.seed);
    let mut dist_rng = substream(config.sim.seed, "disturbances");

    let mut robots: Vec<RobotState> = config
        .robots
        .iter()
        .map(|r| RobotState {
            physical: RobotPhysicalState::at_rest(r.start),
            active: None,
            pending: None,
            goal: r.goal,
            teb: r.teb,
        })
        .collect();
    let mut peds: Vec<Pedestrian> = config
        .humans
        .iter()
        .map(|h| Pedestrian {
            pos: h.start,
            vel: Vec2::ZERO,
            goal: h.true_goal,
        })
        .collect();
    let mut posteriors: Vec<IntentPosterior> = config
        .humans
        .iter()
        .map(|h| {
            IntentPosterior::uniform(
                h.candidate_goals.clone(),
                config.prediction.beta_grid.clone(),
            )
        })
        .collect();
    let mut prev_obs: Vec<Vec2> = peds.iter().map(|p| p.pos).collect();
    let mut stacks: Vec<PredictionStack> = Vec::new();
    let mut prediction_t0 = 0.0;

    let mut bus = InProcessBus::new();
    let mut round_counter: u64 = 0;
    let mut arrivals: Vec<Option<f64>> = vec![None; robots.len()];

    let mut safety = SafetySnapshot::default();
    let mut plan_times: Vec<f64> = Vec::new();
    let mut prediction_times: Vec<f64> = Vec::new();
    let mut rounds = 0usize;
    let mut completed = false;
    let mut end_t = 0.0;
    let mut ticks = 0usize;

    for tick in 0..max_ticks {
        let t = tick as f64 * dt;
        ticks = tick + 1;
        let refresh = tick % obs_every == 0;

        // Sense and predict.
        let mut posterior_record = None;
        let mut entropy_record = None;
        if refresh && !peds.is_empty() {
            if tick > 0 {
                for (i, ped) in peds.iter().enumerate() {
                    let action = infer_action(
                        &PlanarState::new(prev_obs[i].x, prev_obs[i].y, t - config.prediction.dt),
                        &PlanarState::new(ped.pos.x, ped.pos.y, t),
                        config.prediction.dt,
                        &actions,
                    );
                    let up = update_posterior(&posteriors[i], &actions, prev_obs[i], action);
                    if up.underflow {
                        safety.prediction_underflows += 1;
                    }
                    posteriors[i] = up.posterior;
                    prev_obs[i] = ped.pos;
                }
            }

            // Fan out per human; merge in index order.
            let mut timed: Vec<(PredictionStack, f64)> = Vec::with_capacity(peds.len());
            std::thread::scope(|scope| {
                let handles: Vec<_> = peds
                    .iter()
                    .zip(&posteriors)
                    .map(|(ped, post)| {
                        let start = clamp_into_grid(&pred_spec, ped.pos);
                        let dt_pred = config.prediction.dt;
                        scope.spawn(move || {
                            let began = Instant::now();
                            let stack = predict(post, start, horizon_steps, dt_pred, pred_spec);
                            (stack, began.elapsed().as_secs_f64())
                        })
                    })
                    .collect();
                for h in handles {
                    timed.push(h.join().expect("prediction thread"));
                }
            });
            stacks = Vec::with_capacity(timed.len());
            for (stack, secs) in timed {
                prediction_times.push(secs);
                stacks.push(stack);
            }
            prediction_t0 = t;
            let entropies: Vec<f64> = stacks
                .iter()
                .map(|s| prediction_entropy(s, horizon_steps))
                .collect();

            posterior_record = Some(
                posteriors
                    .iter()
                    .map(|p| {
                        let (ti, bi) = p.map_pair();
                        PosteriorSummary {
                            expected_beta: p.expected_beta(),
                            map_goal: ti,
                            map_beta: p.betas[bi],
                            map_weight: p.weight(ti, bi),
                        }
                    })
                    .collect::<Vec<_>>(),
            );
            entropy_record = Some(entropies);
        }

        // Decide whether this tick runs a replan round.
        let timer_due = tick % replan_every == 0;
        let mut round_due = timer_due
            || robots
                .iter()
                .any(|r| r.active.is_none() && r.pending.is_none());
        if !round_due && refresh {
            // Fresh predictions may have invalidated someone's trajectory.
            round_due = robots.iter().enumerate().any(|(i, robot)| {
                let Some(traj) = robot.pending.as_ref().or(robot.active.as_ref()) else {
                    return true;
                };
                let tubes: Vec<TimeVaryingTube> = robots
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .filter_map(|(j, _)| bus.latest(j))
                    .map(|m| tube_from(&m.trajectory, &m.teb, config.keepout.robot_robot_margin))
                    .collect();
                let stack = ObstacleStack {
                    static_boxes: &config.static_obstacles,
                    tubes: &tubes,
                    presence: &[],
                    humans: &stacks,
                    prediction_t0,
                    p_th: config.p_th,
                    keepout: config.keepout,
                };
                replan_needed(
                    traj,
                    t,
                    &robot.teb,
                    &stack,
                    robot.goal,
                    config.sim.goal_tolerance_m,
                    false,
                )
            });
        }

        let mut round_record = None;
        if round_due && !robots.is_empty() {
            // All new trajectories begin at the next planning-step boundary,
            // so the whole fleet switches references simultaneously.
            let t_start =
                ((t - 1e-9) / planner_grid.dt_plan).ceil().max(0.0) * planner_grid.dt_plan;
            let requests: Vec<PlanRequest> = robots
                .iter()
                .enumerate()
                .map(|(i, robot)| PlanRequest {
                    robot_id: i,
                    start: robot.restart_state(t_start).unwrap_or(PlanarState::new(
                        robot.physical.x,
                        robot.physical.y,
                        t_start,
                    )),
                    goal: robot.goal,
                    teb: robot.teb,
                })
                .collect();
            let ctx = RoundContext {
                static_boxes: &config.static_obstacles,
                humans: &stacks,
                prediction_t0,
                p_th: config.p_th,
                keepout: config.keepout,
                grid: &planner_grid,
            };
            let outcomes = replan_round(&requests, &order, &ctx, &mut bus, round_counter);
            plan_times.extend(outcomes.iter().map(|o| o.plan_seconds));

            // Post-hoc safety audit of this round.
            let ordered: Vec<usize> = order.iter().collect();
            for (hi_pos, &hi) in ordered.iter().enumerate() {
                let hi_tube = tube_from(
                    &outcomes[hi].trajectory,
                    &robots[hi].teb,
                    config.keepout.robot_robot_margin,
                );
                for &lo in &ordered[hi_pos + 1..] {
                    safety.tube_intersections +=
                        tube_conflicts(&outcomes[lo].trajectory, &robots[lo].teb, &hi_tube);
                    let c = tube_clearance(&outcomes[lo].trajectory, &robots[lo].teb, &hi_tube);
                    safety.min_tube_clearance = safety.min_tube_clearance.min(c);
                }
            }
            let audit_stack = ObstacleStack {
                static_boxes: &config.static_obstacles,
                tubes: &[],
                presence: &[],
                humans: &stacks,
                prediction_t0,
                p_th: config.p_th,
                keepout: config.keepout,
            };
            for (i, out) in outcomes.iter().enumerate() {
                if out.blocked {
                    safety.blocked_plans += 1;
                }
                if !out.blocked {
                    for s in out.trajectory.samples() {
                        let p = audit_stack.human_collision_prob(s, &robots[i].teb);
                        safety.max_planned_collision_prob =
                            safety.max_planned_collision_prob.max(p);
                        if p > config.p_th {
                            safety.planned_pth_violations += 1;
                        }
                    }
                }
            }

            if trace.is_some() {
                round_record = Some(RoundRecord {
                    round: round_counter,
                    messages: outcomes
                        .iter()
                        .map(|o| BusRecord {
                            robot_id: o.robot_id,
                            round: round_counter,
                            trajectory: o
                                .trajectory
                                .samples()
                                .iter()
                                .map(|s| [s.x, s.y, s.t])
                                .collect(),
                            teb: robots[o.robot_id].teb,
                        })
                        .collect(),
                    tubes: outcomes
                        .iter()
                        .map(|o| {
                            let tube = tube_from(
                                &o.trajectory,
                                &robots[o.robot_id].teb,
                                config.keepout.robot_robot_margin,
                            );
                            TubeRecord {
                                robot_id: o.robot_id,
                                slices: tube
                                    .slices
                                    .iter()
                                    .map(|s| {
                                        [
                                            s.t_start,
                                            s.t_end,
                                            s.bounds.min.x,
                                            s.bounds.min.y,
                                            s.bounds.max.x,
                                            s.bounds.max.y,
                                        ]
                                    })
                                    .collect(),
                            }
                        })
                        .collect(),
                    blocked: outcomes
                        .iter()
                        .filter(|o| o.blocked)
                        .map(|o| o.robot_id)
                        .collect(),
                });
            }

            for out in outcomes {
                let r = &mut robots[out.robot_id];
                if r.active.is_none() {
                    r.active = Some(out.trajectory);
                } else {
                    r.pending = Some(out.trajectory);
                }
            }
            round_counter += 1;
            rounds += 1;
        }

        // Emit the pre-step record for this tick.
        if let Some(w) = trace.as_mut() {
            w.write(&TickRecord {
                kind: "tick",
                tick,
                t,
                robots: robots
                    .iter()
                    .map(|r| AgentState {
                        x: r.physical.x,
                        y: r.physical.y,
                        vx: r.physical.vx,
                        vy: r.physical.vy,
                    })
                    .collect(),
                humans: peds
                    .iter()
                    .map(|p| AgentState {
                        x: p.pos.x,
                        y: p.pos.y,
                        vx: p.vel.x,
                        vy: p.vel.y,
                    })
                    .collect(),
                posteriors: posterior_record,
                entropies: entropy_record,
                round: round_record,
                metrics: safety,
            })?;
        }

        // Advance trackers and pedestrians from the same tick-t snapshot.
        let robot_positions: Vec<Vec2> = robots.iter().map(|r| r.physical.pos()).collect();
        for robot in robots.iter_mut() {
            let traj = robot.current(t).clone();
            let reference = reference_at(&traj, t);
            let ref_vel = reference_velocity_at(&traj, t);
            let rel = RelativeState::between(&robot.physical, &reference, ref_vel);
            let cmd = tracking_control(&rel, &config.tracker);
            let disturbance = Vec2::new(
                dist_rng.random_range(-config.tracker.d_max..=config.tracker.d_max),
                dist_rng.random_range(-config.tracker.d_max..=config.tracker.d_max),
            );
            robot.physical = step_tracker(&robot.physical, cmd, disturbance, &config.tracker);

            let ref_next = reference_at(&traj, t + dt);
            if (robot.physical.x - ref_next.x).abs() > robot.teb.half_width_x
                || (robot.physical.y - ref_next.y).abs() > robot.teb.half_width_y
            {
                safety.containment_violations += 1;
            }
        }
        if !peds.is_empty() {
            pedestrian_step(
                &mut peds,
                &robot_positions,
                &config.pedestrians,
                &world,
                dt,
                &mut ped_rng,
            );
        }

        let t_next = t + dt;
        end_t = t_next;
        for (i, robot) in robots.iter().enumerate() {
            if arrivals[i].is_none()
                && robot.physical.pos().dist(robot.goal) <= config.sim.goal_tolerance_m
            {
                arrivals[i] = Some(t_next);
            }
            for ped in &peds {
                let d = robot.physical.pos().dist(ped.pos);
                safety.min_robot_human_distance = safety.min_robot_human_distance.min(d);
            }
        }

        if arrivals.iter().all(Option::is_some) {
            completed = true;
            break;
        }
    }

    if let Some(w) = trace {
        w.finish()?;
    }

    Ok(RunMetrics {
        completed,
        duration_s: end_t,
        ticks,
        rounds,
        arrival_times: arrivals,
        safety,
        plan_time_stats: TimingStats::from_samples(&plan_times),
        prediction_time_stats: TimingStats::from_samples(&prediction_times),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use mrnav_core::scenario::{
        PedestrianParams, PlannerConfig, PredictionConfig, RobotConfig, SimConfig, WorldSpec,
    };
    use mrnav_core::tracking::TrackerParams;
    use mrnav_core::types::KeepOutSpec;

    fn degenerate() -> ScenarioConfig {
        ScenarioConfig {
            world: WorldSpec {
                origin: Vec2::ZERO,
                size: Vec2::new(15.0, 15.0),
            },
            static_obstacles: vec![],
            robots: vec![RobotConfig {
                start: Vec2::new(0.75, 0.75),
                goal: Vec2::new(12.75, 0.75),
                teb: TrackingErrorBound::new(0.35, 0.35),
                priority: 1,
            }],
            humans: vec![],
            p_th: 0.05,
            prediction: PredictionConfig {
                horizon_s: 2.0,
                dt: 0.25,
                resolution: 0.25,
                beta_grid: vec![0.05, 0.5, 5.0, 50.0],
            },
            planner: PlannerConfig {
                resolution: 1.5,
                collision_check_step_m: 0.1,
                v_max_plan: 1.0,
            },
            sim: SimConfig {
                dt: 0.05,
                seed: 0,
                max_duration_s: 60.0,
                replan_period_s: 1.0,
                goal_tolerance_m: 0.5,
            },
            pedestrians: PedestrianParams::default(),
            keepout: KeepOutSpec::default(),
            tracker: TrackerParams::default(),
        }
    }

    #[test]
    fn degenerate_run_reaches_goal_with_clean_metrics() {
        let m = run_scenario(&degenerate(), None).unwrap();
        assert!(m.completed, "robot never arrived: {m:?}");
        assert!(m.arrival_times[0].is_some());
        assert!(m.safety.min_robot_human_distance.is_infinite());
        assert!(m.safety.min_tube_clearance.is_infinite());
        assert_eq!(m.safety.max_planned_collision_prob, 0.0);
        assert_eq!(m.safety.tube_intersections, 0);
        assert_eq!(m.safety.planned_pth_violations, 0);
        assert_eq!(m.safety.containment_violations, 0);
    }

    #[test]
    fn invalid_config_reports_all_errors() {
        let mut c = degenerate();
        c.p_th = 1.5;
        c.sim.dt = 0.0;
        let err = run_scenario(&c, None).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("p_th"));
        assert!(text.contains("sim.dt"));
    }

    #[test]
    fn timeout_reports_incomplete_not_panic() {
        let mut c = degenerate();
        c.sim.max_duration_s = 0.5; // not enough time to cross the map
        let m = run_scenario(&c, None).unwrap();
        assert!(!m.completed);
        assert!(m.arrival_times[0].is_none());
    }
}
