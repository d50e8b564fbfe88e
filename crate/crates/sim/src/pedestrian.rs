//! Potential-field pedestrians: pulled toward their own goal, pushed away
//! from every nearby agent (humans and robots alike).

use mrnav_core::rng::substream;
use mrnav_core::scenario::PedestrianParams;
use mrnav_core::{Aabb, Vec2};
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

/// A simulated pedestrian's kinematic state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pedestrian {
    pub pos: Vec2,
    pub vel: Vec2,
    pub goal: Vec2,
}

/// Make an RNG for the pedestrian stream of a run seed.
pub fn pedestrian_rng(seed: u64) -> ChaCha8Rng {
    substream(seed, "pedestrians")
}

/// Advance every pedestrian one tick.
///
/// Velocity is goal attraction `k_attract * (goal - pos)` plus an
/// inverse-square push `k_repulse * (pos - other) / |pos - other|^3` from
/// every agent within `repulse_radius`, clamped to `v_max_ped`; positions
/// integrate by Euler and stay clamped to `world`. Coincident agents
/// (closer than 1e-6 m) repulse along a seeded random unit vector.
pub fn pedestrian_step(
    humans: &mut [Pedestrian],
    robots: &[Vec2],
    params: &PedestrianParams,
    world: &Aabb,
    dt: f64,
    rng: &mut ChaCha8Rng,
) {
    assert!(dt > 0.0);
    let positions: Vec<Vec2> = humans.iter().map(|h| h.pos).collect();
    for (i, ped) in humans.iter_mut().enumerate() {
        let mut v = (ped.goal - ped.pos) * params.k_attract;

        let others = positions
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, p)| *p)
            .chain(robots.iter().copied());
        for other in others {
            let d = ped.pos.dist(other);
            if d >= params.repulse_radius {
                continue;
            }
            if d < 1e-6 {
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                v = v + Vec2::new(angle.cos(), angle.sin()) * (params.k_repulse / 1e-4);
            } else {
                v = v + (ped.pos - other) * (params.k_repulse / (d * d * d));
            }
        }

        if params.jitter > 0.0 {
            v = v + Vec2::new(
                rng.random_range(-params.jitter..=params.jitter),
                rng.random_range(-params.jitter..=params.jitter),
            );
        }

        let v = v.clamp_norm(params.v_max_ped);
        let p = ped.pos + v * dt;
        ped.pos = Vec2::new(
            p.x.clamp(world.min.x, world.max.x),
            p.y.clamp(world.min.y, world.max.y),
        );
        ped.vel = v;
    }
}
