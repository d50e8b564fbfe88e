//! Joint-vs-marginal collision probability cross-check, exposed to the CLI.

use mrnav_core::prediction::{
    collision_prob_joint_oracle, collision_prob_marginal, JointDistribution, JointOutcome,
};
use mrnav_core::rng::substream;
use mrnav_core::types::{Cell, OccupancyGrid};
use mrnav_core::{GridSpec, PlanarState, PredictionStack, TrackingErrorBound, Vec2};
use rand::RngExt;

/// Max |exact joint - marginal approximation| over seeded independent joint
/// distributions on an n-by-n grid with `humans` agents. For independent
/// humans the two formulas agree, so anything above float noise is a bug.
pub fn eq2_eq3_max_discrepancy(grid: usize, humans: usize, instances: usize, seed: u64) -> f64 {
    assert!(grid >= 1 && humans >= 1);
    let spec = GridSpec::new(Vec2::ZERO, 1.0, grid, grid);
    let mut rng = substream(seed, "oracle-eq2-eq3");
    let mut worst: f64 = 0.0;

    for _ in 0..instances {
        let marginals: Vec<OccupancyGrid> = (0..humans)
            .map(|_| {
                let mut mass: Vec<f64> = (0..spec.n_cells())
                    .map(|_| rng.random_range(0.0..1.0))
                    .collect();
                let total: f64 = mass.iter().sum();
                for m in &mut mass {
                    *m /= total;
                }
                OccupancyGrid::new(spec, mass, 0.0)
            })
            .collect();

        // Product joint over all cell tuples.
        let mut outcomes = vec![JointOutcome {
            cells: vec![],
            prob: 1.0,
        }];
        for grid_i in &marginals {
            let mut next = Vec::with_capacity(outcomes.len() * spec.n_cells());
            for o in &outcomes {
                for iy in 0..spec.height {
                    for ix in 0..spec.width {
                        let c = Cell::new(ix, iy);
                        let mut cells = o.cells.clone();
                        cells.push(c);
                        next.push(JointOutcome {
                            cells,
                            prob: o.prob * grid_i.mass_at(c),
                        });
                    }
                }
            }
            outcomes = next;
        }
        let joint = JointDistribution { spec, outcomes };
        let stacks: Vec<PredictionStack> = marginals
            .into_iter()
            .map(|g| PredictionStack {
                dt: 1.0,
                grids: vec![g],
            })
            .collect();

        for _ in 0..4 {
            let s = PlanarState::new(
                rng.random_range(-0.5..(grid as f64 + 0.5)),
                rng.random_range(-0.5..(grid as f64 + 0.5)),
                1.0,
            );
            let teb =
                TrackingErrorBound::new(rng.random_range(0.2..2.5), rng.random_range(0.2..2.5));
            let fast = collision_prob_marginal(&s, &teb, 0.0, &stacks, 1);
            let slow = collision_prob_joint_oracle(&s, &teb, 0.0, &joint)
                .expect("support within the oracle cap");
            worst = worst.max((fast - slow).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrepancy_is_float_noise() {
        assert!(eq2_eq3_max_discrepancy(5, 3, 10, 1) <= 1e-12);
    }
}
