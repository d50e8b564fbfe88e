//! Shared geometric and probabilistic primitives: states, grids, trajectories,
//! error bounds, and keep-out margins.
//!
//! Everything here is an immutable value type once constructed and safe to
//! share across threads.
//!
//! Speed limits throughout the crate are per-axis bounds: the tracking model
//! moves independently in x and y, so a diagonal grid move at `v_max` per axis
//! is admissible even though its Euclidean speed is `sqrt(2) * v_max`.

use crate::geometry::{Aabb, Vec2};
use serde::{Deserialize, Serialize};

/// The 3x3 cell neighborhood: stay first, then the 8-connected ring
/// counterclockwise from east. The fixed order is load-bearing: action
/// snapping and planner expansion both break ties by list position.
pub const MOORE_STEPS: [(i32, i32); 9] = [
    (0, 0),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Planner-model state: a planar position stamped with time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarState {
    pub x: f64,
    pub y: f64,
    /// Seconds, nonnegative.
    pub t: f64,
}

impl PlanarState {
    pub fn new(x: f64, y: f64, t: f64) -> Self {
        debug_assert!(x.is_finite() && y.is_finite() && t.is_finite() && t >= 0.0);
        PlanarState { x, y, t }
    }

    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Physical robot state: position and velocity of the tracking model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotPhysicalState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl RobotPhysicalState {
    pub fn at_rest(pos: Vec2) -> Self {
        RobotPhysicalState {
            x: pos.x,
            y: pos.y,
            vx: 0.0,
            vy: 0.0,
        }
    }

    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn vel(&self) -> Vec2 {
        Vec2::new(self.vx, self.vy)
    }
}

/// Discrete cell index into a [`GridSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub ix: usize,
    pub iy: usize,
}

impl Cell {
    pub fn new(ix: usize, iy: usize) -> Self {
        Cell { ix, iy }
    }
}

/// Geometry of a planar grid: origin corner, cell size, and cell counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Vec2,
    /// Meters per cell, > 0.
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn new(origin: Vec2, resolution: f64, width: usize, height: usize) -> Self {
        assert!(resolution > 0.0, "resolution must be positive");
        assert!(
            width >= 1 && height >= 1,
            "grid must have at least one cell"
        );
        GridSpec {
            origin,
            resolution,
            width,
            height,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    /// Cell containing `p` under half-open cell intervals
    /// `[origin + k*res, origin + (k+1)*res)`, or `None` when out of bounds.
    pub fn world_to_cell(&self, p: Vec2) -> Option<Cell> {
        let fx = (p.x - self.origin.x) / self.resolution;
        let fy = (p.y - self.origin.y) / self.resolution;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let ix = fx.floor() as usize;
        let iy = fy.floor() as usize;
        if ix >= self.width || iy >= self.height {
            return None;
        }
        Some(Cell { ix, iy })
    }

    pub fn cell_center(&self, cell: Cell) -> Vec2 {
        Vec2::new(
            self.origin.x + (cell.ix as f64 + 0.5) * self.resolution,
            self.origin.y + (cell.iy as f64 + 0.5) * self.resolution,
        )
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.iy * self.width + cell.ix
    }

    /// Inclusive index range of cells whose centers fall inside `b`,
    /// clamped to the grid; `None` when no center is covered.
    pub fn cells_with_center_in(&self, b: &Aabb) -> Option<(Cell, Cell)> {
        let res = self.resolution;
        let lo_x = ((b.min.x - self.origin.x) / res - 0.5).ceil().max(0.0);
        let lo_y = ((b.min.y - self.origin.y) / res - 0.5).ceil().max(0.0);
        let hi_x = ((b.max.x - self.origin.x) / res - 0.5).floor();
        let hi_y = ((b.max.y - self.origin.y) / res - 0.5).floor();
        if hi_x < lo_x || hi_y < lo_y || hi_x < 0.0 || hi_y < 0.0 {
            return None;
        }
        let hi_x = (hi_x as usize).min(self.width - 1);
        let hi_y = (hi_y as usize).min(self.height - 1);
        let lo_x = lo_x as usize;
        let lo_y = lo_y as usize;
        if lo_x > hi_x || lo_y > hi_y || lo_x >= self.width || lo_y >= self.height {
            return None;
        }
        Some((Cell::new(lo_x, lo_y), Cell::new(hi_x, hi_y)))
    }
}

/// Probability mass over the cells of a grid at one instant.
///
/// Mass that a propagation step would push past the grid edge is accumulated
/// in `escaped` rather than renormalized away, so `total_mass() + escaped`
/// stays 1 and normalization checks remain meaningful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub spec: GridSpec,
    mass: Vec<f64>,
    pub escaped: f64,
}

impl OccupancyGrid {
    pub fn new(spec: GridSpec, mass: Vec<f64>, escaped: f64) -> Self {
        assert_eq!(mass.len(), spec.n_cells(), "mass length mismatch");
        debug_assert!(mass.iter().all(|&m| (-1e-12..=1.0 + 1e-12).contains(&m)));
        OccupancyGrid {
            spec,
            mass,
            escaped,
        }
    }

    /// All mass on a single cell.
    pub fn point_mass(spec: GridSpec, cell: Cell) -> Self {
        let mut mass = vec![0.0; spec.n_cells()];
        mass[spec.index(cell)] = 1.0;
        OccupancyGrid {
            spec,
            mass,
            escaped: 0.0,
        }
    }

    pub fn mass_at(&self, cell: Cell) -> f64 {
        self.mass[self.spec.index(cell)]
    }

    pub fn cells(&self) -> &[f64] {
        &self.mass
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Total mass of cells whose centers lie inside `b` (closed box).
    pub fn mass_in_box(&self, b: &Aabb) -> f64 {
        let Some((lo, hi)) = self.spec.cells_with_center_in(b) else {
            return 0.0;
        };
        let mut total = 0.0;
        for iy in lo.iy..=hi.iy {
            let row = iy * self.spec.width;
            for ix in lo.ix..=hi.ix {
                total += self.mass[row + ix];
            }
        }
        total.clamp(0.0, 1.0)
    }
}

/// Time-indexed occupancy distributions for one human: one grid per future
/// step `tau` in `1..=horizon_steps`, each `dt` seconds apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionStack {
    pub dt: f64,
    pub grids: Vec<OccupancyGrid>,
}

impl PredictionStack {
    pub fn horizon_steps(&self) -> usize {
        self.grids.len()
    }

    pub fn spec(&self) -> &GridSpec {
        &self.grids[0].spec
    }

    /// Grid for 1-based step index `tau`.
    pub fn grid_at(&self, tau: usize) -> &OccupancyGrid {
        &self.grids[tau - 1]
    }
}

/// Time-stamped sequence of planner-model states with strictly increasing t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    samples: Vec<PlanarState>,
}

impl Trajectory {
    pub fn new(samples: Vec<PlanarState>) -> Self {
        assert!(!samples.is_empty(), "trajectory must be nonempty");
        assert!(
            samples.windows(2).all(|w| w[1].t > w[0].t),
            "trajectory times must be strictly increasing"
        );
        Trajectory { samples }
    }

    /// Single-state trajectory; the reference holds this state forever.
    pub fn hold(state: PlanarState) -> Self {
        Trajectory {
            samples: vec![state],
        }
    }

    pub fn samples(&self) -> &[PlanarState] {
        &self.samples
    }

    pub fn first(&self) -> &PlanarState {
        &self.samples[0]
    }

    pub fn last(&self) -> &PlanarState {
        self.samples.last().unwrap()
    }

    /// Largest per-axis speed over all segments (0 for a single sample).
    pub fn max_axis_speed(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| {
                let dt = w[1].t - w[0].t;
                ((w[1].x - w[0].x).abs() / dt).max((w[1].y - w[0].y).abs() / dt)
            })
            .fold(0.0, f64::max)
    }
}

/// Axis-aligned bound on the tracking model's position error relative to the
/// planner reference; inflates the robot footprint during collision checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingErrorBound {
    pub half_width_x: f64,
    pub half_width_y: f64,
}

impl TrackingErrorBound {
    pub fn new(half_width_x: f64, half_width_y: f64) -> Self {
        assert!(
            half_width_x > 0.0 && half_width_y > 0.0,
            "TEB half-widths must be positive"
        );
        TrackingErrorBound {
            half_width_x,
            half_width_y,
        }
    }
}

/// Extra clearance margins realizing the robot-robot and robot-human
/// keep-out sets on top of the TEB boxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeepOutSpec {
    pub robot_robot_margin: f64,
    pub robot_human_margin: f64,
}

impl Default for KeepOutSpec {
    fn default() -> Self {
        KeepOutSpec {
            robot_robot_margin: 0.1,
            robot_human_margin: 0.3,
        }
    }
}

/// Robot footprint at a planned state: the error bound centered on the state,
/// grown by `margin` on every side.
pub fn teb_box_at(state: &PlanarState, teb: &TrackingErrorBound, margin: f64) -> Aabb {
    debug_assert!(margin >= 0.0);
    Aabb::from_center(
        state.pos(),
        teb.half_width_x + margin,
        teb.half_width_y + margin,
    )
}
