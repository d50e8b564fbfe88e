//! Planner optimality and heuristic checks against the brute-force search.

use mrnav_core::coordination::{tube_from, TimeVaryingTube};
use mrnav_core::oracle::dijkstra_arrival_steps;
use mrnav_core::planning::{plan, ObstacleStack, PlanError, PlannerGrid};
use mrnav_core::rng::substream;
use mrnav_core::types::{Cell, KeepOutSpec, OccupancyGrid, MOORE_STEPS};
use mrnav_core::{
    Aabb, GridSpec, PlanarState, PredictionStack, TrackingErrorBound, Trajectory, Vec2,
};
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

const W: usize = 12;
const H: usize = 12;

fn grid() -> PlannerGrid {
    let spec = GridSpec::new(Vec2::ZERO, 1.0, W, H);
    let mut g = PlannerGrid::new(spec, 1.0, 0.1);
    g.plan_horizon_s = 40.0;
    g
}

fn teb() -> TrackingErrorBound {
    TrackingErrorBound::new(0.3, 0.3)
}

struct Instance {
    statics: Vec<Aabb>,
    tubes: Vec<TimeVaryingTube>,
    humans: Vec<PredictionStack>,
    start: PlanarState,
    goal: Vec2,
}

impl Instance {
    fn stack(&self) -> ObstacleStack<'_> {
        ObstacleStack {
            static_boxes: &self.statics,
            tubes: &self.tubes,
            presence: &[],
            humans: &self.humans,
            prediction_t0: 0.0,
            p_th: 0.3,
            keepout: KeepOutSpec {
                robot_robot_margin: 0.1,
                robot_human_margin: 0.1,
            },
        }
    }
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let spec = grid().spec;
    let statics = (0..rng.random_range(0..=4usize))
        .map(|_| {
            let cx = rng.random_range(1.0..(W as f64 - 1.0));
            let cy = rng.random_range(1.0..(H as f64 - 1.0));
            let hx = rng.random_range(0.3..2.0);
            let hy = rng.random_range(0.3..2.0);
            Aabb::from_center(Vec2::new(cx, cy), hx, hy)
        })
        .collect();

    let tubes = (0..rng.random_range(0..=2usize))
        .map(|_| {
            let n = rng.random_range(2..=4usize);
            let mut t = rng.random_range(0.0..5.0);
            let samples = (0..n)
                .map(|_| {
                    let s = PlanarState::new(
                        rng.random_range(0.5..(W as f64 - 0.5)),
                        rng.random_range(0.5..(H as f64 - 0.5)),
                        t,
                    );
                    t += rng.random_range(1.0..4.0);
                    s
                })
                .collect();
            tube_from(&Trajectory::new(samples), &teb(), 0.1)
        })
        .collect();

    let humans = (0..rng.random_range(0..=2usize))
        .map(|_| {
            let grids = (0..8)
                .map(|_| {
                    let mut mass = vec![0.0; spec.n_cells()];
                    let blobs = rng.random_range(1..=3usize);
                    let mut total = 0.0;
                    for _ in 0..blobs {
                        let c = Cell::new(rng.random_range(0..W), rng.random_range(0..H));
                        let m = rng.random_range(0.1..1.0);
                        mass[spec.index(c)] += m;
                        total += m;
                    }
                    for v in &mut mass {
                        *v /= total;
                    }
                    OccupancyGrid::new(spec, mass, 0.0)
                })
                .collect();
            PredictionStack { dt: 1.0, grids }
        })
        .collect();

    let start_cell = Cell::new(rng.random_range(0..W), rng.random_range(0..H));
    let goal_cell = Cell::new(rng.random_range(0..W), rng.random_range(0..H));
    Instance {
        statics,
        tubes,
        humans,
        start: PlanarState::new(
            spec.cell_center(start_cell).x,
            spec.cell_center(start_cell).y,
            0.0,
        ),
        goal: spec.cell_center(goal_cell),
    }
}

fn planned_steps(result: Result<Trajectory, PlanError>, dt: f64) -> Option<usize> {
    result
        .ok()
        .map(|t| ((t.last().t - t.first().t) / dt).round() as usize)
}

#[test]
fn arrival_matches_brute_force_on_random_product_graphs() {
    let g = grid();
    let mut rng = substream(2024, "planner-oracle");
    let mut nontrivial = 0;
    for i in 0..60 {
        let inst = random_instance(&mut rng);
        let stack = inst.stack();
        let fast = planned_steps(plan(inst.start, inst.goal, &teb(), &stack, &g), g.dt_plan);
        let slow = dijkstra_arrival_steps(inst.start, inst.goal, &teb(), &stack, &g);
        assert_eq!(fast, slow, "instance {i} disagrees");
        if fast.is_some() {
            nontrivial += 1;
        }
    }
    assert!(nontrivial > 30, "too few solvable instances: {nontrivial}");
}

#[test]
fn free_space_heuristic_is_exact() {
    // In free space the per-axis straight-line bound is the true arrival
    // time, so h <= cost holds with equality everywhere.
    let g = grid();
    let start = PlanarState::new(0.5, 0.5, 0.0);
    for iy in 0..H {
        for ix in 0..W {
            let goal = g.spec.cell_center(Cell::new(ix, iy));
            let steps =
                dijkstra_arrival_steps(start, goal, &teb(), &ObstacleStack::EMPTY, &g).unwrap();
            let chebyshev = ix.max(iy);
            assert_eq!(steps, chebyshev);
        }
    }
}

#[test]
fn adding_an_obstacle_never_speeds_arrival() {
    let g = grid();
    let mut rng = substream(77, "planner-monotone");
    for _ in 0..30 {
        let mut inst = random_instance(&mut rng);
        let before = planned_steps(
            plan(inst.start, inst.goal, &teb(), &inst.stack(), &g),
            g.dt_plan,
        );
        inst.statics.push(Aabb::from_center(
            Vec2::new(rng.random_range(1.0..11.0), rng.random_range(1.0..11.0)),
            rng.random_range(0.3..1.5),
            rng.random_range(0.3..1.5),
        ));
        let after = planned_steps(
            plan(inst.start, inst.goal, &teb(), &inst.stack(), &g),
            g.dt_plan,
        );
        match (before, after) {
            (Some(b), Some(a)) => assert!(a >= b, "obstacle sped arrival: {b} -> {a}"),
            (None, Some(_)) => panic!("obstacle un-blocked an instance"),
            _ => {}
        }
    }
}

#[test]
fn wall_with_gap_matches_oracle() {
    let g = grid();
    // A wall across the map with one gap: covers y in [4.6, 5.4] except x in
    // (6.0, 8.2), forcing the path through the gap cell columns.
    let statics = vec![
        Aabb::new(Vec2::new(0.0, 4.6), Vec2::new(6.0, 5.4)),
        Aabb::new(Vec2::new(8.2, 4.6), Vec2::new(12.0, 5.4)),
    ];
    let stack = ObstacleStack {
        static_boxes: &statics,
        ..ObstacleStack::EMPTY
    };
    let start = PlanarState::new(0.5, 0.5, 0.0);
    let goal = Vec2::new(0.5, 10.5);
    let fast = planned_steps(plan(start, goal, &teb(), &stack, &g), g.dt_plan).unwrap();
    let slow = dijkstra_arrival_steps(start, goal, &teb(), &stack, &g).unwrap();
    assert_eq!(fast, slow);
    // Detour through the gap at x≈7 is much longer than the direct 10 steps.
    assert!(fast > 10, "wall did not force a detour: {fast} steps");
}

#[test]
fn planning_is_deterministic() {
    let g = grid();
    let mut rng = substream(5150, "planner-determinism");
    let inst = random_instance(&mut rng);
    let a = plan(inst.start, inst.goal, &teb(), &inst.stack(), &g);
    let b = plan(inst.start, inst.goal, &teb(), &inst.stack(), &g);
    assert_eq!(
        a.ok().map(|t| t.samples().to_vec()),
        b.ok().map(|t| t.samples().to_vec())
    );
}

#[test]
fn every_returned_edge_recheck_passes() {
    use mrnav_core::planning::state_safe;
    let g = grid();
    let mut rng = substream(31337, "planner-recheck");
    for _ in 0..20 {
        let inst = random_instance(&mut rng);
        let stack = inst.stack();
        if let Ok(traj) = plan(inst.start, inst.goal, &teb(), &stack, &g) {
            for w in traj.samples().windows(2) {
                assert!(mrnav_core::planning::edge_is_safe(
                    &w[0],
                    &w[1],
                    &teb(),
                    &stack,
                    g.collision_check_step_m
                ));
            }
            for s in traj.samples() {
                assert!(state_safe(s, &teb(), &stack));
            }
            // One grid move per step, per axis.
            for w in traj.samples().windows(2) {
                let (dx, dy) = (w[1].x - w[0].x, w[1].y - w[0].y);
                assert!(MOORE_STEPS.iter().any(
                    |&(mx, my)| (dx - mx as f64).abs() < 1e-9 && (dy - my as f64).abs() < 1e-9
                ));
            }
        }
    }
}
