//! Confidence-aware human motion prediction.
//!
//! Each human is modeled as a noisily-rational agent: actions are drawn from
//! a Boltzmann distribution over a goal-seeking utility, sharpened by an
//! inverse-temperature `beta`. Observed motion drives a Bayesian update over
//! the joint (goal, beta) hypothesis grid; the resulting posterior mixes the
//! per-hypothesis action distributions into a single per-cell kernel that
//! propagates an occupancy grid forward in time. When observed behavior
//! departs from every modeled goal, low-beta hypotheses absorb the posterior
//! and the predictions flatten on their own.
//!
//! Per-human pipelines share no mutable state and may run in parallel;
//! posterior updates for one human are sequential in observation order.

use crate::geometry::Vec2;
use crate::types::{
    teb_box_at, Cell, GridSpec, OccupancyGrid, PlanarState, PredictionStack, TrackingErrorBound,
    MOORE_STEPS,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ACTION_COUNT: usize = 9;
/// Index of the zero action in [`MOORE_STEPS`].
pub const ACTION_STAY: usize = 0;
/// Index of the unit east step in [`MOORE_STEPS`].
pub const ACTION_EAST: usize = 1;

/// The 9 discrete planar moves: the 8-connected unit cell steps scaled to one
/// grid resolution per prediction step, plus stay. Diagonal moves displace
/// one cell per axis, so their Euclidean speed is sqrt(2) times `axis_speed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanActionSet {
    /// Meters per second per axis: grid resolution / dt.
    pub axis_speed: f64,
    /// Prediction step length in seconds.
    pub dt: f64,
}

impl HumanActionSet {
    pub fn new(resolution: f64, dt: f64) -> Self {
        assert!(resolution > 0.0 && dt > 0.0);
        HumanActionSet {
            axis_speed: resolution / dt,
            dt,
        }
    }

    pub fn len(&self) -> usize {
        ACTION_COUNT
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Velocity of action `a` in meters per second.
    pub fn velocity(&self, a: usize) -> Vec2 {
        let (dx, dy) = MOORE_STEPS[a];
        Vec2::new(dx as f64 * self.axis_speed, dy as f64 * self.axis_speed)
    }

    /// Displacement of action `a` over one step.
    pub fn displacement(&self, a: usize) -> Vec2 {
        self.velocity(a) * self.dt
    }

    /// Nearest action to `v` by Euclidean distance in velocity space; ties
    /// break toward the earlier entry in the fixed action order.
    pub fn snap(&self, v: Vec2) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for a in 0..ACTION_COUNT {
            let d = (self.velocity(a) - v).norm();
            if d < best_d {
                best_d = d;
                best = a;
            }
        }
        best
    }
}

/// Infer the action a human took between two observations by inverting the
/// single-integrator dynamics and snapping to the discrete action set.
///
/// The returned index refers to [`MOORE_STEPS`] order. `dt` must be positive.
pub fn infer_action(
    prev: &PlanarState,
    curr: &PlanarState,
    dt: f64,
    actions: &HumanActionSet,
) -> usize {
    assert!(dt > 0.0, "observation interval must be positive");
    let v = Vec2::new((curr.x - prev.x) / dt, (curr.y - prev.y) / dt);
    actions.snap(v)
}

/// Weight of the incurred-step-length term in the utility. Strictly below 1
/// so that moving toward the goal strictly beats idling (at weight 1 the
/// triangle equality makes stay tie with every on-ray move and the argmax
/// degenerates); strictly above 0 so that diagonal dithering stays penalized.
pub const STEP_COST_WEIGHT: f64 = 0.5;

/// Goal-seeking utility: negative incurred path length (half-weighted) plus
/// negative remaining straight-line distance to the goal, measured in grid
/// cells so that one cell of progress is one unit of utility regardless of
/// resolution. Zero at the goal under the stay action; strictly negative
/// otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QFunction {
    pub goal: Vec2,
    pub dt: f64,
    /// Per-axis action speed, matching the action set.
    pub speed: f64,
}

impl QFunction {
    pub fn new(goal: Vec2, actions: &HumanActionSet) -> Self {
        QFunction {
            goal,
            dt: actions.dt,
            speed: actions.axis_speed,
        }
    }

    pub fn value(&self, state: Vec2, action: usize) -> f64 {
        let (dx, dy) = MOORE_STEPS[action];
        let vel = Vec2::new(dx as f64 * self.speed, dy as f64 * self.speed);
        let next = state + vel * self.dt;
        let cell = self.speed * self.dt; // one grid resolution
        -(STEP_COST_WEIGHT * vel.norm() * self.dt + (next - self.goal).norm()) / cell
    }

    pub fn values_at(&self, state: Vec2) -> [f64; ACTION_COUNT] {
        std::array::from_fn(|a| self.value(state, a))
    }
}

/// Softmax of `beta * q` with max-subtraction; sums to 1 within 1e-12 and is
/// invariant to adding a constant to all q-values.
pub fn boltzmann_from_q(q: &[f64; ACTION_COUNT], beta: f64) -> [f64; ACTION_COUNT] {
    debug_assert!(beta >= 0.0);
    let m = q.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(beta * b));
    let mut p = std::array::from_fn(|a| (beta * q[a] - m).exp());
    let z: f64 = p.iter().sum();
    for v in &mut p {
        *v /= z;
    }
    p
}

/// Distribution over the 9 actions at `state` under goal `q.goal` and
/// confidence `beta`.
pub fn boltzmann(state: Vec2, beta: f64, q: &QFunction) -> [f64; ACTION_COUNT] {
    boltzmann_from_q(&q.values_at(state), beta)
}

/// Discrete joint distribution over candidate goals (theta) and confidence
/// values (beta). Weights are stored theta-major and sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentPosterior {
    pub thetas: Vec<Vec2>,
    pub betas: Vec<f64>,
    weights: Vec<f64>,
}

impl IntentPosterior {
    /// Uniform prior over every (theta, beta) pair.
    pub fn uniform(thetas: Vec<Vec2>, betas: Vec<f64>) -> Self {
        assert!(!thetas.is_empty() && !betas.is_empty());
        assert!(betas.iter().all(|&b| b >= 0.0));
        let n = thetas.len() * betas.len();
        IntentPosterior {
            thetas,
            betas,
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn with_weights(thetas: Vec<Vec2>, betas: Vec<f64>, weights: Vec<f64>) -> Self {
        assert_eq!(weights.len(), thetas.len() * betas.len());
        let total: f64 = weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-9, "weights must sum to 1");
        IntentPosterior {
            thetas,
            betas,
            weights,
        }
    }

    pub fn weight(&self, theta_idx: usize, beta_idx: usize) -> f64 {
        self.weights[theta_idx * self.betas.len() + beta_idx]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Posterior mass on one candidate goal, summed over beta.
    pub fn theta_marginal(&self, theta_idx: usize) -> f64 {
        (0..self.betas.len())
            .map(|b| self.weight(theta_idx, b))
            .sum()
    }

    pub fn expected_beta(&self) -> f64 {
        let mut e = 0.0;
        for ti in 0..self.thetas.len() {
            for bi in 0..self.betas.len() {
                e += self.weight(ti, bi) * self.betas[bi];
            }
        }
        e
    }

    /// Index of the heaviest (theta, beta) pair; ties to the earlier pair.
    pub fn map_pair(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_w = -1.0;
        for ti in 0..self.thetas.len() {
            for bi in 0..self.betas.len() {
                let w = self.weight(ti, bi);
                if w > best_w {
                    best_w = w;
                    best = (ti, bi);
                }
            }
        }
        best
    }

    /// Posterior-weighted action distribution at `state`: the mixture of the
    /// per-hypothesis Boltzmann distributions.
    pub fn action_mixture(&self, state: Vec2, actions: &HumanActionSet) -> [f64; ACTION_COUNT] {
        let mut mix = [0.0; ACTION_COUNT];
        for (ti, theta) in self.thetas.iter().enumerate() {
            let q = QFunction::new(*theta, actions);
            let qs = q.values_at(state);
            for (bi, &beta) in self.betas.iter().enumerate() {
                let w = self.weight(ti, bi);
                if w == 0.0 {
                    continue;
                }
                let p = boltzmann_from_q(&qs, beta);
                for a in 0..ACTION_COUNT {
                    mix[a] += w * p[a];
                }
            }
        }
        mix
    }
}

/// Result of one Bayesian posterior update.
pub struct PosteriorUpdate {
    pub posterior: IntentPosterior,
    /// True when every likelihood underflowed to zero and the prior was
    /// returned unchanged; signals total model mismatch.
    pub underflow: bool,
}

/// Bayes update of the (theta, beta) weights given an observed action taken
/// from `state`. The input posterior is unchanged; a fresh one is returned.
pub fn update_posterior(
    post: &IntentPosterior,
    actions: &HumanActionSet,
    state: Vec2,
    observed_action: usize,
) -> PosteriorUpdate {
    assert!(observed_action < ACTION_COUNT);
    let nb = post.betas.len();
    let mut weights = vec![0.0; post.weights.len()];
    let mut total = 0.0;
    for (ti, theta) in post.thetas.iter().enumerate() {
        let q = QFunction::new(*theta, actions);
        let qs = q.values_at(state);
        for (bi, &beta) in post.betas.iter().enumerate() {
            let prior = post.weight(ti, bi);
            if prior == 0.0 {
                continue;
            }
            let lik = boltzmann_from_q(&qs, beta)[observed_action];
            let w = prior * lik;
            weights[ti * nb + bi] = w;
            total += w;
        }
    }
    if total <= 0.0 {
        return PosteriorUpdate {
            posterior: post.clone(),
            underflow: true,
        };
    }
    for w in &mut weights {
        *w /= total;
    }
    PosteriorUpdate {
        posterior: IntentPosterior {
            thetas: post.thetas.clone(),
            betas: post.betas.clone(),
            weights,
        },
        underflow: false,
    }
}

/// Propagate an occupancy distribution `horizon_steps` prediction steps ahead
/// of the human's current position.
///
/// Mass starts as a point at the cell containing `curr`; each step pushes
/// every cell's mass through the posterior action mixture evaluated at the
/// cell center, moving it to the 8-connected neighbor (or keeping it in
/// place). Mass that would leave the grid accumulates in `escaped`, so every
/// returned grid satisfies mass + escaped = 1.
///
/// # Panics
///
/// Panics when `curr` lies outside `spec` (contract violation).
pub fn predict(
    post: &IntentPosterior,
    curr: Vec2,
    horizon_steps: usize,
    dt: f64,
    spec: GridSpec,
) -> PredictionStack {
    let start = spec
        .world_to_cell(curr)
        .expect("prediction start must be inside the grid");
    let actions = HumanActionSet::new(spec.resolution, dt);
    let w = spec.width;
    let h = spec.height;

    // The mixture depends only on the cell, not the step; cache lazily since
    // the reachable support is tiny compared to the grid.
    let mut kernel: Vec<Option<[f64; ACTION_COUNT]>> = vec![None; spec.n_cells()];

    let mut mass = vec![0.0; spec.n_cells()];
    mass[spec.index(start)] = 1.0;
    let mut escaped = 0.0;
    let mut grids = Vec::with_capacity(horizon_steps);

    for _ in 0..horizon_steps {
        let mut next = vec![0.0; spec.n_cells()];
        for iy in 0..h {
            for ix in 0..w {
                let m = mass[iy * w + ix];
                if m == 0.0 {
                    continue;
                }
                let idx = iy * w + ix;
                let mix = kernel[idx].get_or_insert_with(|| {
                    post.action_mixture(spec.cell_center(Cell::new(ix, iy)), &actions)
                });
                for (a, &(dx, dy)) in MOORE_STEPS.iter().enumerate() {
                    let p = m * mix[a];
                    if p == 0.0 {
                        continue;
                    }
                    let tx = ix as i64 + dx as i64;
                    let ty = iy as i64 + dy as i64;
                    if tx < 0 || ty < 0 || tx >= w as i64 || ty >= h as i64 {
                        escaped += p;
                    } else {
                        next[ty as usize * w + tx as usize] += p;
                    }
                }
            }
        }
        mass = next;
        grids.push(OccupancyGrid::new(spec, mass.clone(), escaped));
    }

    PredictionStack { dt, grids }
}

/// Marginal probability that a robot whose footprint is the margin-inflated
/// TEB box at `s` collides with at least one human at prediction step `tau`
/// (1-based), assuming independence between humans:
/// `1 - prod_i (1 - p_i)` with `p_i` the in-box mass of human i's grid.
pub fn collision_prob_marginal(
    s: &PlanarState,
    teb: &TrackingErrorBound,
    margin: f64,
    stacks: &[PredictionStack],
    tau: usize,
) -> f64 {
    let b = teb_box_at(s, teb, margin);
    let mut miss_all = 1.0;
    for stack in stacks {
        debug_assert!(tau >= 1 && tau <= stack.horizon_steps());
        let p = stack.grid_at(tau).mass_in_box(&b);
        miss_all *= 1.0 - p.clamp(0.0, 1.0);
    }
    1.0 - miss_all
}

/// One outcome of an explicit joint distribution: a cell per human.
#[derive(Debug, Clone, PartialEq)]
pub struct JointOutcome {
    pub cells: Vec<Cell>,
    pub prob: f64,
}

/// Explicitly enumerable joint distribution over human cell tuples at one
/// prediction step. Test-scale only; a support cap guards against misuse.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    pub spec: GridSpec,
    pub outcomes: Vec<JointOutcome>,
}

pub const JOINT_ORACLE_SUPPORT_CAP: usize = 1_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error(
        "joint support of {0} outcomes exceeds the enumeration cap of {JOINT_ORACLE_SUPPORT_CAP}"
    )]
    SupportTooLarge(usize),
}

/// Exact probability that at least one human's cell center lies inside the
/// margin-inflated TEB box at `s`, by enumeration over the joint support.
///
/// This is the reference for the marginal approximation: for independent
/// joints the two agree; for correlated joints they may differ.
pub fn collision_prob_joint_oracle(
    s: &PlanarState,
    teb: &TrackingErrorBound,
    margin: f64,
    joint: &JointDistribution,
) -> Result<f64, OracleError> {
    if joint.outcomes.len() > JOINT_ORACLE_SUPPORT_CAP {
        return Err(OracleError::SupportTooLarge(joint.outcomes.len()));
    }
    let b = teb_box_at(s, teb, margin);
    let mut hit = 0.0;
    for outcome in &joint.outcomes {
        let any_inside = outcome
            .cells
            .iter()
            .any(|&c| b.contains(joint.spec.cell_center(c)));
        if any_inside {
            hit += outcome.prob;
        }
    }
    Ok(hit)
}

/// Shannon entropy (nats) of the step-`tau` distribution, with the escaped
/// mass counted as one pseudo-cell.
pub fn prediction_entropy(stack: &PredictionStack, tau: usize) -> f64 {
    let grid = stack.grid_at(tau);
    let mut h = 0.0;
    for &p in grid.cells() {
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    if grid.escaped > 0.0 {
        h -= grid.escaped * grid.escaped.ln();
    }
    h
}
