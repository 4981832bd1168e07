//! Hand-built states for tests and examples.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::geometry::Vec2;

use super::{Behavior, EnvState, HumanState, Load, RobotState, SafetyParams, SafetyState};

/// Robot at the origin heading +x in `Continue`; worker `w1` on the robot's
/// left at `distance` meters with the given visibility; no occluders.
pub fn state_with(distance: f64, visibility: f64) -> SafetyState {
    state_with_params(distance, visibility, Arc::new(SafetyParams::default()))
}

pub fn state_with_params(distance: f64, visibility: f64, params: Arc<SafetyParams>) -> SafetyState {
    SafetyState {
        tick: 1,
        human: HumanState {
            worker_id: "w1".into(),
            position: Vec2::new(0.0, distance),
            velocity: Vec2::ZERO,
            role: "rigger".into(),
        },
        robot: RobotState {
            position: Vec2::ZERO,
            heading: 0.0,
            speed: 0.5,
            load: Load::CarryingBeam,
            mode: Behavior::Continue,
        },
        env: EnvState {
            occluders: Vec::new(),
            visibility: BTreeMap::from([("w1".to_string(), visibility)]),
        },
        params,
    }
}
