//! Ray-fraction visibility model.
//!
//! Confidence is the fraction of sight rays, cast from the robot's sensor
//! point to `RAY_COUNT` sample points spread over a disc of radius
//! `WORKER_RADIUS` around the worker, that no occluder intersects. Sample
//! points follow a sunflower (Vogel) spiral, which covers the disc evenly
//! and is fully deterministic.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::safety::{HumanState, Occluder, RobotState};

pub const RAY_COUNT: usize = 25;
pub const WORKER_RADIUS: f64 = 0.3;

/// Sample targets around a worker standing at `center`.
pub fn sample_points(center: Vec2) -> [Vec2; RAY_COUNT] {
    let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    std::array::from_fn(|i| {
        let r = WORKER_RADIUS * ((i as f64 + 0.5) / RAY_COUNT as f64).sqrt();
        let theta = i as f64 * golden;
        center + Vec2::from_angle(theta) * r
    })
}

/// Which of the `RAY_COUNT` rays each occluder blocks.
fn blocked_mask(robot: &RobotState, human: &HumanState, occluder: &Occluder) -> [bool; RAY_COUNT] {
    let origin = robot.position;
    sample_points(human.position).map(|p| occluder.blocks(origin, p))
}

/// Number of rays that at least one occluder blocks.
pub fn blocked_rays(robot: &RobotState, human: &HumanState, occluders: &[Occluder]) -> usize {
    let origin = robot.position;
    sample_points(human.position)
        .iter()
        .filter(|p| occluders.iter().any(|o| o.blocks(origin, **p)))
        .count()
}

/// Confidence in `[0, 1]` that the worker is seen.
pub fn compute_visibility(robot: &RobotState, human: &HumanState, occluders: &[Occluder]) -> f64 {
    let blocked = blocked_rays(robot, human, occluders);
    (RAY_COUNT - blocked) as f64 / RAY_COUNT as f64
}

/// One occluder's share of the blocked sight rays.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribution {
    pub occluder_id: String,
    pub blocked_rays: usize,
}

/// Occluders blocking at least one ray, most rays first, ties by id.
pub fn attribute_occlusion(
    robot: &RobotState,
    human: &HumanState,
    occluders: &[Occluder],
) -> Vec<Attribution> {
    let mut out: Vec<Attribution> = occluders
        .iter()
        .map(|o| Attribution {
            occluder_id: o.occluder_id.clone(),
            blocked_rays: blocked_mask(robot, human, o).iter().filter(|b| **b).count(),
        })
        .filter(|a| a.blocked_rays > 0)
        .collect();
    out.sort_by(|a, b| {
        b.blocked_rays
            .cmp(&a.blocked_rays)
            .then_with(|| a.occluder_id.cmp(&b.occluder_id))
    });
    out
}
