//! Priority-ordered sequential replanning.
//!
//! Robots plan one at a time in a fixed priority order. Each robot treats the
//! TEB-augmented trajectories already published this round by higher-priority
//! robots as time-varying tube obstacles, then publishes its own trajectory
//! and TEB on the bus for the robots after it. A robot that cannot find a
//! safe plan parks: it publishes a stationary tube at its current position
//! and is marked blocked for the round.
//!
//! Rounds are synchronous sweeps; the bus guarantees publish-before-read
//! ordering within a round by construction.

use crate::geometry::{Aabb, Vec2};
use crate::planning::{plan, ObstacleStack, PlannerGrid};
use crate::types::{
    teb_box_at, KeepOutSpec, PlanarState, PredictionStack, TrackingErrorBound, Trajectory,
};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

/// One time slice of a tube: a box occupied over `[t_start, t_end)`.
/// The final slice of a tube has `t_end = +inf` (the robot parks at goal).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeSlice {
    pub t_start: f64,
    pub t_end: f64,
    pub bounds: Aabb,
}

impl TubeSlice {
    pub fn contains_time(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_end
    }
}

/// A TEB-augmented trajectory swept through time as time-ordered,
/// non-overlapping box slices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeVaryingTube {
    pub slices: Vec<TubeSlice>,
}

impl TimeVaryingTube {
    pub fn slice_at(&self, t: f64) -> Option<&TubeSlice> {
        // Slices are ordered and non-overlapping; binary search on t_start.
        let idx = self.slices.partition_point(|s| s.t_start <= t);
        if idx == 0 {
            return None;
        }
        let s = &self.slices[idx - 1];
        s.contains_time(t).then_some(s)
    }
}

/// Sweep a trajectory into a tube. Each segment contributes the hull of the
/// margin-inflated TEB boxes at its endpoints (covering the interpolation);
/// a terminal slice at the last state extends to infinity.
pub fn tube_from(traj: &Trajectory, teb: &TrackingErrorBound, margin: f64) -> TimeVaryingTube {
    let samples = traj.samples();
    let mut slices = Vec::with_capacity(samples.len());
    for w in samples.windows(2) {
        let a = teb_box_at(&w[0], teb, margin);
        let b = teb_box_at(&w[1], teb, margin);
        slices.push(TubeSlice {
            t_start: w[0].t,
            t_end: w[1].t,
            bounds: a.hull(&b),
        });
    }
    let last = traj.last();
    slices.push(TubeSlice {
        t_start: last.t,
        t_end: f64::INFINITY,
        bounds: teb_box_at(last, teb, margin),
    });
    TimeVaryingTube { slices }
}

/// Fixed priority ordering over robot ids, valid for the whole run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorityOrder {
    order: Vec<usize>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OrderError {
    #[error("priorities must be a permutation of 1..=N")]
    NotAPermutation,
}

impl PriorityOrder {
    /// Robot ids ordered highest priority first.
    pub fn new(order: Vec<usize>) -> Self {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert!(
            sorted.iter().enumerate().all(|(i, &v)| i == v),
            "order must be a permutation of 0..N"
        );
        PriorityOrder { order }
    }

    /// Build from 1-based priority labels, one per robot: priority 1 plans
    /// first.
    pub fn from_priorities(priorities: &[u32]) -> Result<Self, OrderError> {
        let n = priorities.len();
        let mut seen = vec![false; n];
        for &p in priorities {
            if p == 0 || p as usize > n || seen[p as usize - 1] {
                return Err(OrderError::NotAPermutation);
            }
            seen[p as usize - 1] = true;
        }
        let mut ids: Vec<usize> = (0..n).collect();
        ids.sort_by_key(|&i| priorities[i]);
        Ok(PriorityOrder { order: ids })
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.order.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Record shared on the bus: everything a lower-priority robot needs to
/// reconstruct the sender's tube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusMessage {
    pub robot_id: usize,
    pub round: u64,
    pub trajectory: Trajectory,
    pub teb: TrackingErrorBound,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("trajectory bus is closed")]
pub struct BusClosed;

/// Transport for trajectories and TEBs between robots. In-process by
/// default; the trait boundary is where a networked transport would plug in.
pub trait TrajectoryBus {
    /// Publish, replacing any earlier message from the same robot.
    fn publish(&mut self, msg: BusMessage) -> Result<(), BusClosed>;
    /// Latest message from `robot_id`, if any.
    fn latest(&self, robot_id: usize) -> Option<&BusMessage>;
}

/// Centralized in-process bus: a last-writer-wins mailbox per robot.
#[derive(Debug, Default)]
pub struct InProcessBus {
    closed: bool,
    latest: HashMap<usize, BusMessage>,
}

impl InProcessBus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn close(&mut self) {
        self.closed = true;
    }
}

impl TrajectoryBus for InProcessBus {
    fn publish(&mut self, msg: BusMessage) -> Result<(), BusClosed> {
        if self.closed {
            return Err(BusClosed);
        }
        self.latest.insert(msg.robot_id, msg);
        Ok(())
    }

    fn latest(&self, robot_id: usize) -> Option<&BusMessage> {
        self.latest.get(&robot_id)
    }
}

/// Publish a robot's trajectory and TEB so later (lower-priority) readers in
/// the same round see it.
pub fn share_trajectory(
    bus: &mut dyn TrajectoryBus,
    robot_id: usize,
    round: u64,
    trajectory: Trajectory,
    teb: TrackingErrorBound,
) -> Result<(), BusClosed> {
    bus.publish(BusMessage {
        robot_id,
        round,
        trajectory,
        teb,
    })
}

/// Per-robot input to a replan round.
#[derive(Debug, Clone)]
pub struct PlanRequest {
    pub robot_id: usize,
    /// Where and when the new reference starts; a planner cell center.
    pub start: PlanarState,
    pub goal: Vec2,
    pub teb: TrackingErrorBound,
}

/// Per-robot outcome of a replan round.
#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub robot_id: usize,
    pub trajectory: Trajectory,
    /// True when no safe plan existed and the robot parked in place.
    pub blocked: bool,
    /// Wall-clock planning time for this robot.
    pub plan_seconds: f64,
}

/// Shared world inputs to a replan round.
pub struct RoundContext<'a> {
    pub static_boxes: &'a [Aabb],
    pub humans: &'a [PredictionStack],
    /// Time the prediction stacks are rooted at.
    pub prediction_t0: f64,
    pub p_th: f64,
    pub keepout: KeepOutSpec,
    pub grid: &'a PlannerGrid,
}

/// One full priority sweep: every robot replans against the static map, all
/// human prediction stacks, and the tubes published this round by robots
/// ahead of it. Outcomes are returned in `requests` order.
///
/// Robots later in the order have not committed a trajectory yet, so each is
/// pinned at its restart state for one planning step: nobody may plan
/// through a position another robot cannot have vacated yet. Combined with
/// a replan period no longer than the planning step, every executed segment
/// was planned while the current positions of all robots were protected.
pub fn replan_round(
    requests: &[PlanRequest],
    order: &PriorityOrder,
    ctx: &RoundContext,
    bus: &mut dyn TrajectoryBus,
    round: u64,
) -> Vec<RoundOutcome> {
    assert_eq!(requests.len(), order.len(), "one request per robot");
    let mut outcomes: HashMap<usize, RoundOutcome> = HashMap::new();
    let mut tubes: Vec<TimeVaryingTube> = Vec::new();

    for robot_id in order.iter() {
        let req = requests
            .iter()
            .find(|r| r.robot_id == robot_id)
            .expect("every ordered robot must have a request");

        // Re-read the bus so a networked implementation behaves identically:
        // only this round's messages from higher-priority robots count.
        tubes.clear();
        for higher in order.iter().take_while(|&id| id != robot_id) {
            if let Some(msg) = bus.latest(higher) {
                if msg.round == round {
                    tubes.push(tube_from(
                        &msg.trajectory,
                        &msg.teb,
                        ctx.keepout.robot_robot_margin,
                    ));
                }
            }
        }
        // Presence of the robots that plan after this one: pinned at their
        // restart states for one planning step.
        let presence: Vec<TubeSlice> = order
            .iter()
            .skip_while(|&id| id != robot_id)
            .skip(1)
            .map(|later| {
                let other = requests
                    .iter()
                    .find(|r| r.robot_id == later)
                    .expect("every ordered robot must have a request");
                TubeSlice {
                    t_start: other.start.t,
                    t_end: other.start.t + ctx.grid.dt_plan,
                    bounds: teb_box_at(&other.start, &other.teb, ctx.keepout.robot_robot_margin),
                }
            })
            .collect();

        let stack = ObstacleStack {
            static_boxes: ctx.static_boxes,
            tubes: &tubes,
            presence: &presence,
            humans: ctx.humans,
            prediction_t0: ctx.prediction_t0,
            p_th: ctx.p_th,
            keepout: ctx.keepout,
        };

        let began = std::time::Instant::now();
        let (trajectory, blocked) = match plan(req.start, req.goal, &req.teb, &stack, ctx.grid) {
            Ok(t) => (t, false),
            Err(_) => (Trajectory::hold(req.start), true),
        };
        let plan_seconds = began.elapsed().as_secs_f64();

        share_trajectory(bus, robot_id, round, trajectory.clone(), req.teb)
            .expect("bus closed during a round");
        outcomes.insert(
            robot_id,
            RoundOutcome {
                robot_id,
                trajectory,
                blocked,
                plan_seconds,
            },
        );
    }

    requests
        .iter()
        .map(|r| outcomes.remove(&r.robot_id).unwrap())
        .collect()
}

/// Count post-hoc keep-out violations between a planned trajectory and a
/// higher-priority robot's tube: samples whose TEB box intersects the tube
/// slice active at the sample time.
pub fn tube_conflicts(
    traj: &Trajectory,
    teb: &TrackingErrorBound,
    tube: &TimeVaryingTube,
) -> usize {
    traj.samples()
        .iter()
        .filter(|s| {
            tube.slice_at(s.t)
                .is_some_and(|slice| teb_box_at(s, teb, 0.0).intersects(&slice.bounds))
        })
        .count()
}

/// Minimum clearance between a planned trajectory's TEB boxes and the tube
/// slices active at each sample time; `inf` when they never coexist in time.
pub fn tube_clearance(traj: &Trajectory, teb: &TrackingErrorBound, tube: &TimeVaryingTube) -> f64 {
    traj.samples()
        .iter()
        .filter_map(|s| {
            tube.slice_at(s.t)
                .map(|slice| teb_box_at(s, teb, 0.0).gap(&slice.bounds))
        })
        .fold(f64::INFINITY, f64::min)
}
